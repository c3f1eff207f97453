#pragma once

// Autoregressive affine flow used as the variational posterior's transform.
// Every step computes, for each coordinate i, a shift m_i and a bounded
// log-scale s_i from coordinates < i only (masked one-hidden-layer MLP), and
// applies z_i' = z_i * exp(s_i) + m_i. All steps share the same ordering, so
// the composed Jacobian stays lower triangular.

#include "lfbm/nn.hpp"

#include <random>
#include <string>
#include <vector>

namespace lfbm {

struct ArFlowConfig {
  int dim = 2;
  int steps = 2;
  int hidden = 64;
  double clamp = 2.0;
};

class ArPosteriorFlow {
 public:
  ArPosteriorFlow() = default;
  // Conditioners are zero-initialized at the output layer (identity map).
  ArPosteriorFlow(const ArFlowConfig& cfg, ParamGroup& params, const std::string& prefix, std::mt19937_64& rng);

  const ArFlowConfig& config() const { return cfg_; }
  int dim() const { return cfg_.dim; }

  // z0 -> z with per-example log |det dz/dz0| (n x 1).
  std::pair<Tensor, Tensor> apply(const ParamGroup& params, const Tensor& z0) const;
  // Sequential inverse sweep (values only).
  Matrix invert(const ParamGroup& params, const Matrix& z) const;

 private:
  ArFlowConfig cfg_;
  std::vector<Mlp> nets_;
};

struct ArFlowOutput {
  Matrix z;
  Vector log_det;
};

ArFlowOutput ar_flow_apply(const ArPosteriorFlow& flow, const ParamGroup& params, const Matrix& z0);

}  // namespace lfbm
