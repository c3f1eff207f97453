#pragma once

// Short-run unadjusted Langevin sampling of p(z | x):
//   z_{k+1} = z_k + step_size * grad_z log p(z_k | x) + sqrt(2 step_size) eps_k
// with z_0 ~ N(0, I) drawn fresh on every call.

#include "lfbm/flow.hpp"
#include "lfbm/generator.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace lfbm {

struct LangevinConfig {
  int steps = 20;
  double step_size = 0.1;
  bool noise_enabled = true;
  std::uint64_t seed = 0;
};

struct LangevinTraceRow {
  int step = 0;
  double mean_grad_norm = 0.0;
  double mean_joint_log_prob = 0.0;
};

struct PosteriorSample {
  Matrix z;
  std::vector<LangevinTraceRow> trace;
};

// Optional per-step observer, called with the state after each update.
using ChainObserver = std::function<void(int step, const Matrix& z)>;

// Chain i draws from its own stream keyed by (cfg.seed, i), so results do not
// depend on how chains are scheduled. `mask` restricts the evidence to
// visible coordinates (1 x D or n x D).
PosteriorSample sample_posterior(const FlowModel& prior, const Generator& gen, const Matrix& x,
                                 const LangevinConfig& cfg, const Matrix* mask = nullptr,
                                 const ChainObserver& observer = {});

void validate(const LangevinConfig& cfg);

// Deterministic 64-bit mix of (seed, stream) for per-chain generators.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream);

void write_trace_csv(std::ostream& os, const std::vector<LangevinTraceRow>& trace);

}  // namespace lfbm
