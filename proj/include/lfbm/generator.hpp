#pragma once

// Top-down Gaussian decoder p(x|z) = N(g(z), sigma^2 I) and the joint density
// with the flow prior, log p(x, z) = log p(z) + log p(x|z).

#include "lfbm/flow.hpp"
#include "lfbm/nn.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace lfbm {

struct GeneratorConfig {
  int latent_dim = 100;
  int data_dim = 784;
  std::vector<int> hidden = {256, 256};
  double sigma = 1.0;
  // Tanh keeps outputs in the (-1, 1) data range; Identity gives the affine
  // family used by the closed-form checks.
  Activation output = Activation::Tanh;
};

class Generator {
 public:
  Generator() = default;
  Generator(const GeneratorConfig& cfg, std::uint64_t seed);

  const GeneratorConfig& config() const { return cfg_; }
  int latent_dim() const { return cfg_.latent_dim; }
  int data_dim() const { return cfg_.data_dim; }
  double sigma() const { return cfg_.sigma; }

  ParamGroup& params() { return params_; }
  const ParamGroup& params() const { return params_; }
  Generator frozen() const;

  Tensor decode(const Tensor& z) const;
  // Per-example log p(x|z), n x 1. With a mask (1 x D or n x D of {0,1})
  // only visible coordinates enter the residual and the normalizer.
  Tensor log_likelihood(const Matrix& x, const Tensor& z, const Matrix* mask = nullptr) const;

 private:
  GeneratorConfig cfg_;
  ParamGroup params_;
  Mlp net_;
};

// Validates a 1 x D or n x D binary mask and broadcasts it to n x D.
Matrix expand_mask(const Matrix& mask, Eigen::Index n, Eigen::Index data_dim);

Matrix decode(const Generator& gen, const Matrix& z);
Vector log_likelihood(const Generator& gen, const Matrix& x, const Matrix& z);
Vector masked_log_likelihood(const Generator& gen, const Matrix& x, const Matrix& z, const Matrix& mask);
Vector joint_log_prob(const FlowModel& prior, const Generator& gen, const Matrix& x, const Matrix& z,
                      const Matrix* mask = nullptr);

// Joint log-density graph on frozen models with z as the only gradient
// leaf; used by posterior sampling.
Tensor joint_log_prob_graph(const FlowModel& frozen_prior, const Generator& frozen_gen, const Matrix& x,
                            const Tensor& z, const Matrix* mask = nullptr);

// d/dz [log p(z) + log p(x|z)] per example (mask-restricted if given).
Matrix posterior_grad_z(const FlowModel& prior, const Generator& gen, const Matrix& x, const Matrix& z,
                        const Matrix* mask = nullptr);

}  // namespace lfbm
