#pragma once

// Amortized posterior for the variational baseline: a Gaussian encoder
// q0(z0 | x) followed by an autoregressive flow, and the single-sample
// reparameterized evidence lower bound
//   log p(x|z) + log p(z) - log q0(z0|x) + log |det dz/dz0|.

#include "lfbm/ar_flow.hpp"
#include "lfbm/flow.hpp"
#include "lfbm/generator.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace lfbm {

struct PosteriorNetConfig {
  int data_dim = 784;
  int latent_dim = 100;
  std::vector<int> hidden = {256, 256};
  int flow_steps = 2;
  int flow_hidden = 64;
  double logvar_min = -8.0;
  double logvar_max = 4.0;
};

struct EncoderOutput {
  Tensor mean;    // n x d
  Tensor logvar;  // n x d, inside (logvar_min, logvar_max)
};

class PosteriorNet {
 public:
  PosteriorNet() = default;
  PosteriorNet(const PosteriorNetConfig& cfg, std::uint64_t seed);

  const PosteriorNetConfig& config() const { return cfg_; }
  ParamGroup& params() { return params_; }
  const ParamGroup& params() const { return params_; }
  PosteriorNet frozen() const;

  EncoderOutput encode(const Matrix& x) const;
  // Reparameterized draw z = f(mu + exp(logvar / 2) * eps) and per-example
  // log q(z | x) (n x 1).
  std::pair<Tensor, Tensor> sample(const Matrix& x, const Matrix& eps) const;

 private:
  PosteriorNetConfig cfg_;
  ParamGroup params_;
  Mlp encoder_;
  ArPosteriorFlow flow_;
};

// Per-example ELBO graph (n x 1) for one noise draw eps (n x d).
Tensor elbo(const FlowModel& prior, const Generator& gen, const PosteriorNet& post, const Matrix& x,
            const Matrix& eps);

// Mean single-sample ELBO estimates over `samples` draws per example:
// returns the n x samples matrix of values.
Matrix elbo_samples(const FlowModel& prior, const Generator& gen, const PosteriorNet& post, const Matrix& x,
                    int samples, std::mt19937_64& rng);

}  // namespace lfbm
