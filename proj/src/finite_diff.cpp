#include "lfbm/finite_diff.hpp"

#include "lfbm/error.hpp"

namespace lfbm {

std::map<std::string, Matrix> finite_diff_grad(const std::function<double(const ParamGroup&)>& f,
                                               ParamGroup& params, double h) {
  if (!(h > 0.0)) throw ContractError("finite_diff_grad: h must be positive");
  std::map<std::string, Matrix> out;
  for (auto& [name, p] : params) {
    Matrix& v = p.mutable_value();
    Matrix g(v.rows(), v.cols());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double orig = v.data()[i];
      v.data()[i] = orig + h;
      const double fp = f(params);
      v.data()[i] = orig - h;
      const double fm = f(params);
      v.data()[i] = orig;
      g.data()[i] = (fp - fm) / (2.0 * h);
    }
    out.emplace(name, std::move(g));
  }
  return out;
}

Vector finite_diff_grad(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
  if (!(h > 0.0)) throw ContractError("finite_diff_grad: h must be positive");
  Vector g(x.size());
  Vector xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + h;
    const double fp = f(xp);
    xp(i) = x(i) - h;
    const double fm = f(xp);
    xp(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace lfbm
