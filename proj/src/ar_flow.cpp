#include "lfbm/ar_flow.hpp"

#include "lfbm/error.hpp"

#include <cmath>

namespace lfbm {

namespace {

// Connectivity masks so that outputs (shift_i, logscale_i) see inputs < i only.
std::vector<Matrix> made_masks(int d, int hidden) {
  std::vector<int> hidden_degree(static_cast<std::size_t>(hidden));
  for (int k = 0; k < hidden; ++k) hidden_degree[static_cast<std::size_t>(k)] = d > 1 ? k % (d - 1) + 1 : 0;
  Matrix in_mask(d, hidden);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < hidden; ++k) in_mask(i, k) = hidden_degree[static_cast<std::size_t>(k)] >= i + 1 ? 1.0 : 0.0;
  Matrix out_mask(hidden, 2 * d);
  for (int k = 0; k < hidden; ++k)
    for (int j = 0; j < d; ++j) {
      const double v = j + 1 > hidden_degree[static_cast<std::size_t>(k)] && hidden_degree[static_cast<std::size_t>(k)] > 0 ? 1.0 : 0.0;
      out_mask(k, j) = v;
      out_mask(k, d + j) = v;
    }
  return {in_mask, out_mask};
}

}  // namespace

ArPosteriorFlow::ArPosteriorFlow(const ArFlowConfig& cfg, ParamGroup& params, const std::string& prefix,
                                 std::mt19937_64& rng)
    : cfg_(cfg) {
  if (cfg_.dim < 1 || cfg_.steps < 1 || cfg_.hidden < 1) throw ContractError("ArPosteriorFlow: invalid config");
  for (int l = 0; l < cfg_.steps; ++l) {
    Mlp net(params, prefix + ".ar" + std::to_string(l), {cfg_.dim, cfg_.hidden, 2 * cfg_.dim}, Activation::Tanh,
            Activation::Identity, rng, true);
    net.set_masks(made_masks(cfg_.dim, cfg_.hidden));
    nets_.push_back(std::move(net));
  }
}

std::pair<Tensor, Tensor> ArPosteriorFlow::apply(const ParamGroup& params, const Tensor& z0) const {
  if (z0.cols() != cfg_.dim) {
    throw ContractError("ar_flow_apply: expected dimension " + std::to_string(cfg_.dim) + ", got " +
                        std::to_string(z0.cols()));
  }
  std::vector<int> shift_idx(static_cast<std::size_t>(cfg_.dim));
  std::vector<int> scale_idx(static_cast<std::size_t>(cfg_.dim));
  for (int j = 0; j < cfg_.dim; ++j) {
    shift_idx[static_cast<std::size_t>(j)] = j;
    scale_idx[static_cast<std::size_t>(j)] = cfg_.dim + j;
  }
  Tensor z = z0;
  Tensor log_det = Tensor::constant(Matrix::Zero(z0.rows(), 1));
  for (const Mlp& net : nets_) {
    Tensor out = net.forward(params, z);
    Tensor m = select_cols(out, shift_idx);
    Tensor s = scale(tanh(scale(select_cols(out, scale_idx), 1.0 / cfg_.clamp)), cfg_.clamp);
    z = add(mul(z, exp(s)), m);
    log_det = add(log_det, sum_cols(s));
  }
  return {z, log_det};
}

Matrix ArPosteriorFlow::invert(const ParamGroup& params, const Matrix& z) const {
  const ParamGroup frozen = params.detached();
  Matrix x = z;
  for (auto it = nets_.rbegin(); it != nets_.rend(); ++it) {
    // Output coordinate i depends only on inputs < i: solve in order.
    Matrix y = x;  // target of this step
    Matrix cur = Matrix::Zero(z.rows(), cfg_.dim);
    for (int i = 0; i < cfg_.dim; ++i) {
      Matrix out = it->forward(frozen, Tensor::constant(cur)).value();
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double s = cfg_.clamp * std::tanh(out(r, cfg_.dim + i) / cfg_.clamp);
        cur(r, i) = (y(r, i) - out(r, i)) * std::exp(-s);
      }
    }
    x = cur;
  }
  return x;
}

ArFlowOutput ar_flow_apply(const ArPosteriorFlow& flow, const ParamGroup& params, const Matrix& z0) {
  auto [z, ld] = flow.apply(params.detached(), Tensor::constant(z0));
  return {z.value(), ld.value().col(0)};
}

}  // namespace lfbm
