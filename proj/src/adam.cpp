#include "lfbm/adam.hpp"

#include "lfbm/error.hpp"

#include <cmath>

namespace lfbm {

double AdamState::effective_lr() const {
  return options.lr * std::pow(options.decay, static_cast<double>(epochs_completed));
}

void adam_step(ParamGroup& params, AdamState& state) {
  for (const auto& [name, p] : params) {
    if (!p.has_grad()) throw ContractError("adam_step: parameter '" + name + "' has no gradient");
  }
  const auto& o = state.options;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(o.beta1, t);
  const double bc2 = 1.0 - std::pow(o.beta2, t);
  const double lr = state.effective_lr();

  for (auto& [name, p] : params) {
    const Matrix& g = p.grad();
    auto [mit, mnew] = state.m.try_emplace(name, Matrix::Zero(g.rows(), g.cols()));
    auto [vit, vnew] = state.v.try_emplace(name, Matrix::Zero(g.rows(), g.cols()));
    Matrix& m = mit->second;
    Matrix& v = vit->second;
    if (m.rows() != g.rows() || m.cols() != g.cols()) {
      throw ContractError("adam_step: moment shape mismatch for '" + name + "'");
    }
    m = o.beta1 * m + (1.0 - o.beta1) * g;
    v = o.beta2 * v + (1.0 - o.beta2) * g.cwiseProduct(g);
    Matrix step = (m.array() / bc1) / ((v.array() / bc2).sqrt() + o.eps);
    p.mutable_value() -= lr * step;
    check_finite(p.value(), "adam_step");
  }
  params.zero_grad();
}

}  // namespace lfbm
