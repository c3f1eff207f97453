#pragma once

// Normalizing-flow prior over the latent space.
//
// Generation direction (base -> latent), one step:
//   actnorm:  y = x * exp(log_scale) + bias
//   permute:  reverse the coordinate order
//   coupling: even coordinates pass through and condition an affine map of
//             the odd ones, z_b' = z_b * exp(s(z_a)) + t(z_a),
//             with s = clamp * tanh(raw / clamp).
// The density is evaluated with one pass of the inverse map.

#include "lfbm/nn.hpp"
#include "lfbm/params.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace lfbm {

struct FlowConfig {
  int dim = 100;
  int depth = 5;
  int hidden = 128;
  double clamp = 2.0;
};

// Output of a flow pass on a batch: transformed points and per-example
// log |det J| of the pass that produced them.
struct FlowPass {
  Tensor out;      // n x d
  Tensor log_det;  // n x 1
};

struct FlowOutput {
  Matrix z;
  Vector log_det;
};

class FlowModel {
 public:
  FlowModel() = default;
  // Identity-initialized: actnorm scale 1 / bias 0, couplings emit zero.
  FlowModel(const FlowConfig& cfg, std::uint64_t seed);

  const FlowConfig& config() const { return cfg_; }
  int dim() const { return cfg_.dim; }
  int depth() const { return cfg_.depth; }

  ParamGroup& params() { return params_; }
  const ParamGroup& params() const { return params_; }

  bool actnorm_initialized() const { return actnorm_initialized_; }
  void set_actnorm_initialized(bool v) { actnorm_initialized_ = v; }
  // Data-dependent actnorm initialization from latent samples: each actnorm
  // layer, met in inverse order, standardizes the activations reaching it.
  void initialize_actnorm(const Matrix& z);

  // Copy whose parameters are constants sharing this model's storage.
  FlowModel frozen() const;

  FlowPass forward(const Tensor& z0) const;
  FlowPass inverse(const Tensor& z) const;
  // Per-example log p(z), n x 1.
  Tensor log_prob(const Tensor& z) const;

  // Latent-space coupling log-scales of every step for the given base points
  // (diagnostics for the clamp bound).
  std::vector<Matrix> coupling_log_scales(const Matrix& z0) const;

  const std::vector<int>& even_index() const { return even_; }
  const std::vector<int>& odd_index() const { return odd_; }
  const std::vector<int>& permutation() const { return perm_; }

 private:
  std::string step_prefix(int l) const;
  void check_dim(const Tensor& x, const char* op) const;

  FlowConfig cfg_;
  ParamGroup params_;
  std::vector<Mlp> scale_nets_;
  std::vector<Mlp> shift_nets_;
  std::vector<int> even_;
  std::vector<int> odd_;
  std::vector<int> perm_;
  bool actnorm_initialized_ = false;
};

FlowOutput flow_forward(const FlowModel& model, const Matrix& z0);
FlowOutput flow_inverse(const FlowModel& model, const Matrix& z);
Vector flow_log_prob(const FlowModel& model, const Matrix& z);
// Ancestral sampling: z = f(z0), z0 ~ N(0, I).
Matrix flow_sample(const FlowModel& model, int n, std::mt19937_64& rng);
// Per-example score d/dz log p(z).
Matrix grad_log_prob_z(const FlowModel& model, const Matrix& z);

// log N(x; 0, I) per row, as a graph op.
Tensor standard_normal_log_density(const Tensor& x);

}  // namespace lfbm
