#pragma once

#include "lfbm/params.hpp"

#include <functional>
#include <map>
#include <string>

namespace lfbm {

// Central-difference gradient (f(p + h e_i) - f(p - h e_i)) / 2h for every
// scalar of every parameter. `params` is perturbed in place and restored.
std::map<std::string, Matrix> finite_diff_grad(const std::function<double(const ParamGroup&)>& f,
                                               ParamGroup& params, double h = 1e-5);

// Central-difference gradient of a scalar function of a plain vector.
Vector finite_diff_grad(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-5);

}  // namespace lfbm
