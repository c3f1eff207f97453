#include "lfbm/langevin.hpp"

#include "lfbm/error.hpp"

#include <cmath>
#include <ostream>
#include <random>
#include <string>

namespace lfbm {

void validate(const LangevinConfig& cfg) {
  if (cfg.steps < 0) throw ConfigError("langevin: steps must be >= 0");
  if (!(cfg.step_size > 0.0) || !std::isfinite(cfg.step_size)) throw ConfigError("langevin: step_size must be > 0");
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over a combination of both words
  std::uint64_t x = seed ^ (stream + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

PosteriorSample sample_posterior(const FlowModel& prior, const Generator& gen, const Matrix& x,
                                 const LangevinConfig& cfg, const Matrix* mask, const ChainObserver& observer) {
  validate(cfg);
  check_finite(x, "sample_posterior input");
  if (x.cols() != gen.data_dim()) throw ContractError("sample_posterior: data dimension mismatch");
  const Eigen::Index n = x.rows();
  const int d = prior.dim();

  // One engine and one distribution per chain: normal_distribution caches
  // a spare variate, so it must not be shared between streams.
  struct ChainRng {
    std::mt19937_64 engine;
    std::normal_distribution<double> normal{0.0, 1.0};
    double operator()() { return normal(engine); }
  };
  std::vector<ChainRng> streams;
  streams.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    streams.push_back(ChainRng{std::mt19937_64(stream_seed(cfg.seed, static_cast<std::uint64_t>(i)))});
  }

  PosteriorSample result;
  result.z.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& rng = streams[static_cast<std::size_t>(i)];
    for (int j = 0; j < d; ++j) result.z(i, j) = rng();
  }
  if (cfg.steps == 0) return result;

  const Matrix m = mask ? expand_mask(*mask, n, x.cols()) : Matrix();
  const Matrix* mp = mask ? &m : nullptr;
  const FlowModel fprior = prior.frozen();
  const Generator fgen = gen.frozen();
  const double noise_scale = std::sqrt(2.0 * cfg.step_size);
  result.trace.reserve(static_cast<std::size_t>(cfg.steps));

  for (int k = 0; k < cfg.steps; ++k) {
    try {
      Tensor zt = Tensor::parameter(result.z);
      Tensor joint = joint_log_prob_graph(fprior, fgen, x, zt, mp);
      backward(sum(joint));
      const Matrix& g = zt.grad();
      result.trace.push_back({k, g.rowwise().norm().mean(), joint.value().mean()});
      result.z += cfg.step_size * g;
      if (cfg.noise_enabled) {
        for (Eigen::Index i = 0; i < n; ++i) {
          auto& rng = streams[static_cast<std::size_t>(i)];
          for (int j = 0; j < d; ++j) result.z(i, j) += noise_scale * rng();
        }
      }
      check_finite(result.z, "langevin update");
    } catch (const NumericError& e) {
      throw NumericError("Langevin chain diverged at step " + std::to_string(k) + ": " + e.what());
    }
    if (observer) observer(k, result.z);
  }
  return result;
}

void write_trace_csv(std::ostream& os, const std::vector<LangevinTraceRow>& trace) {
  os << "step,mean_grad_norm,mean_joint_log_prob\n";
  os.precision(17);
  for (const auto& r : trace) os << r.step << ',' << r.mean_grad_norm << ',' << r.mean_joint_log_prob << '\n';
}

}  // namespace lfbm
