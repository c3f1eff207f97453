#include "lfbm/training.hpp"

#include "lfbm/error.hpp"
#include "lfbm/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <ostream>

namespace lfbm {

const char* mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::Mcmc: return "mcmc";
    case TrainMode::Vae: return "vae";
    case TrainMode::Recovery: return "recovery";
  }
  return "mcmc";
}

void validate(const TrainConfig& cfg) {
  if (cfg.iterations < 0) throw ConfigError("iterations must be >= 0");
  if (cfg.batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (cfg.lr_prior < 0.0 || cfg.lr_generator < 0.0 || cfg.lr_inference < 0.0) {
    throw ConfigError("learning rates must be >= 0");
  }
  if (!(cfg.decay > 0.0 && cfg.decay <= 1.0)) throw ConfigError("decay must lie in (0, 1]");
  if (cfg.latent_dim < 1 || cfg.flow_depth < 1 || cfg.flow_hidden < 1) {
    throw ConfigError("latent_dim, flow_depth and flow_hidden must be >= 1");
  }
  if (!(cfg.sigma > 0.0)) throw ConfigError("sigma must be > 0");
  if (cfg.log_every < 1) throw ConfigError("log_every must be >= 1");
  if (cfg.checkpoint_every_epochs < 1) throw ConfigError("checkpoint_every_epochs must be >= 1");
  if (cfg.inner_update_steps < 1) throw ConfigError("inner_update_steps must be >= 1");
  if (cfg.mode == TrainMode::Recovery && !cfg.mask) throw ConfigError("recovery mode requires a mask");
  if (cfg.mode != TrainMode::Recovery && cfg.mask) throw ConfigError("mask is only valid in recovery mode");
  if (cfg.mask) validate(*cfg.mask);
  validate(cfg.langevin);
}

namespace {

// Stream tags keep the random sources of a run independent of each other.
enum : std::uint64_t { kTagModels = 1, kTagBatches = 2, kTagLangevin = 3, kTagDiagnostics = 4, kTagElbo = 5 };

std::uint64_t run_seed(const TrainConfig& cfg, std::uint64_t tag, std::uint64_t index = 0) {
  return stream_seed(stream_seed(cfg.seed, tag), index);
}

AdamState make_opt(double lr, double decay) {
  AdamOptions o;
  o.lr = lr;
  o.decay = decay;
  return AdamState(o);
}

class BatchSampler {
 public:
  BatchSampler(Eigen::Index n, int batch, std::uint64_t seed)
      : perm_(static_cast<std::size_t>(n)), batch_(std::min<std::size_t>(static_cast<std::size_t>(batch), perm_.size())),
        rng_(seed) {
    std::iota(perm_.begin(), perm_.end(), Eigen::Index{0});
    std::shuffle(perm_.begin(), perm_.end(), rng_);
  }

  // Next batch of row indices; `epoch_done` is set when the remaining rows
  // cannot fill another batch (the remainder is dropped).
  std::vector<Eigen::Index> next(bool& epoch_done) {
    std::vector<Eigen::Index> idx(perm_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                  perm_.begin() + static_cast<std::ptrdiff_t>(pos_ + batch_));
    pos_ += batch_;
    epoch_done = pos_ + batch_ > perm_.size();
    if (epoch_done) {
      std::shuffle(perm_.begin(), perm_.end(), rng_);
      pos_ = 0;
    }
    return idx;
  }

 private:
  std::vector<Eigen::Index> perm_;
  std::size_t batch_;
  std::size_t pos_ = 0;
  std::mt19937_64 rng_;
};

Matrix rows_of(const Matrix& m, const std::vector<Eigen::Index>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

FlowModel independent_copy(const FlowModel& m) {
  FlowModel out = m;
  out.params() = m.params().clone();
  return out;
}

Generator independent_copy(const Generator& g) {
  Generator out = g;
  out.params() = g.params().clone();
  return out;
}

std::pair<double, double> mean_norm_and_se(const std::vector<Vector>& per_example) {
  const double n = static_cast<double>(per_example.size());
  Vector mean = Vector::Zero(per_example.front().size());
  for (const auto& g : per_example) mean += g;
  mean /= n;
  double trace = 0.0;
  for (const auto& g : per_example) trace += (g - mean).squaredNorm();
  trace /= (n - 1.0);
  return {mean.norm(), std::sqrt(trace / n)};
}

struct Clock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::string checkpoint_path(const TrainConfig& cfg, const char* name) {
  return (std::filesystem::path(cfg.checkpoint_dir) / name).string();
}

void save_run_checkpoint(const TrainConfig& cfg, const ModelState& s, const char* name) {
  std::filesystem::create_directories(cfg.checkpoint_dir);
  CheckpointInfo info = cfg.provenance;
  info.mode = mode_name(cfg.mode);
  save_checkpoint(checkpoint_path(cfg, name), s, info);
}

[[noreturn]] void abort_run(const TrainConfig& cfg, const ModelState& last_good, long long iteration,
                            const NumericError& e) {
  std::string msg = "training aborted at iteration " + std::to_string(iteration) + ": " + e.what();
  if (!cfg.checkpoint_dir.empty()) {
    save_run_checkpoint(cfg, last_good, "abort.ckpt");
    msg += " (last good state saved to " + checkpoint_path(cfg, "abort.ckpt") + ")";
  }
  throw NumericError(msg);
}

bool learns_prior(const TrainConfig& cfg) { return cfg.prior_trainable && cfg.lr_prior > 0.0; }

RunLogRecord make_record(long long iteration, const ModelState& s, const Matrix& x, const Matrix& z,
                         const Matrix* mask, const TrainConfig& cfg, const Clock& clock) {
  std::mt19937_64 rng(run_seed(cfg, kTagDiagnostics, static_cast<std::uint64_t>(iteration)));
  const DiagnosticRecord d = diagnostics_step(s.prior, s.gen, x, z, rng, mask);
  RunLogRecord r;
  r.iteration = iteration;
  r.recon_mse = mse(x, decode(s.gen, z), mask);
  r.mean_prior_log_prob = d.mean_prior_log_prob;
  r.prior_residual = d.prior_residual;
  r.generator_residual = d.generator_residual;
  r.mmd = d.mmd;
  r.wall_seconds = clock.seconds();
  return r;
}

// Alternating Langevin inference and prior/generator updates; `masks` (N x D) switches on visible-only inference and
// generator updates.
TrainResult run_mcmc_loop(const Dataset& data, const Matrix* masks, const Matrix* ground_truth,
                          const TrainConfig& cfg, ModelState state) {
  validate(cfg);
  const Eigen::Index n = data.x.rows();
  if (n < 2) throw DataError("training needs at least two examples");
  if (data.dim() != state.gen.data_dim()) throw DataError("data dimension does not match the generator");
  check_finite(data.x, "training data");
  if (masks) {
    if (masks->rows() != n || masks->cols() != data.x.cols()) throw DataError("mask shape does not match data");
    const Eigen::Index bad = first_fully_occluded(*masks);
    if (bad >= 0) throw DataError("example " + std::to_string(bad) + " has no visible pixels");
  }
  Matrix occluded;
  if (masks && ground_truth) {
    if (ground_truth->rows() != n || ground_truth->cols() != data.x.cols()) {
      throw DataError("ground truth shape does not match data");
    }
    occluded = Matrix::Ones(n, data.x.cols()) - *masks;
  }

  TrainResult result;
  Matrix z_store;
  if (masks) z_store = Matrix::Zero(n, state.prior.dim());
  auto record_recovery = [&](RunLogRecord& r) {
    if (!masks) return;
    result.recovered = decode(state.gen, z_store);
    if (ground_truth && occluded.sum() > 0.0) r.masked_mse = mse(result.recovered, *ground_truth, &occluded);
  };

  const Clock clock;
  BatchSampler sampler(n, cfg.batch_size, run_seed(cfg, kTagBatches));
  for (long long t = 0; t < cfg.iterations; ++t) {
    bool epoch_done = false;
    const auto idx = sampler.next(epoch_done);
    const Matrix xb = rows_of(data.x, idx);
    const Matrix mb = masks ? rows_of(*masks, idx) : Matrix();
    const Matrix* mp = masks ? &mb : nullptr;
    LangevinConfig lc = cfg.langevin;
    lc.seed = run_seed(cfg, kTagLangevin, static_cast<std::uint64_t>(t));

    const ModelState last_good = clone(state);
    Matrix z;
    try {
      z = sample_posterior(state.prior, state.gen, xb, lc, mp).z;
      if (t == 0) {
        RunLogRecord r = make_record(0, state, xb, z, mp, cfg, clock);
        record_recovery(r);
        result.log.append(r);
      }
      if (learns_prior(cfg)) update_prior(state.prior, z, state.prior_opt);
      update_generator(state.gen, xb, z, state.gen_opt, mp);
    } catch (const NumericError& e) {
      abort_run(cfg, last_good, t + 1, e);
    }
    state.iteration = t + 1;
    if (masks) {
      for (std::size_t i = 0; i < idx.size(); ++i) z_store.row(idx[i]) = z.row(static_cast<Eigen::Index>(i));
    }
    if (epoch_done) {
      state.prior_opt.end_epoch();
      state.gen_opt.end_epoch();
      if (!cfg.checkpoint_dir.empty() && state.gen_opt.epochs_completed % cfg.checkpoint_every_epochs == 0) {
        save_run_checkpoint(cfg, state, "periodic.ckpt");
      }
    }
    if ((t + 1) % cfg.log_every == 0 || t + 1 == cfg.iterations) {
      RunLogRecord r = make_record(t + 1, state, xb, z, mp, cfg, clock);
      record_recovery(r);
      result.log.append(r);
    }
  }
  if (masks && result.recovered.size() == 0) result.recovered = decode(state.gen, z_store);
  result.state = std::move(state);
  return result;
}

}  // namespace

ModelState make_model_state(const TrainConfig& cfg, int data_dim) {
  validate(cfg);
  if (data_dim < 1) throw DataError("data dimension must be >= 1");
  ModelState s;
  s.prior = FlowModel({cfg.latent_dim, cfg.flow_depth, cfg.flow_hidden, 2.0}, run_seed(cfg, kTagModels, 0));
  GeneratorConfig gc;
  gc.latent_dim = cfg.latent_dim;
  gc.data_dim = data_dim;
  gc.hidden = cfg.decoder_hidden;
  gc.sigma = cfg.sigma;
  gc.output = cfg.decoder_output;
  s.gen = Generator(gc, run_seed(cfg, kTagModels, 1));
  s.prior_trainable = cfg.prior_trainable;
  if (cfg.mode == TrainMode::Vae) {
    PosteriorNetConfig pc;
    pc.data_dim = data_dim;
    pc.latent_dim = cfg.latent_dim;
    pc.hidden = cfg.encoder_hidden;
    s.posterior = PosteriorNet(pc, run_seed(cfg, kTagModels, 2));
  }
  s.prior_opt = make_opt(cfg.lr_prior, cfg.decay);
  s.gen_opt = make_opt(cfg.lr_generator, cfg.decay);
  s.inference_opt = make_opt(cfg.lr_inference, cfg.decay);
  return s;
}

void RunLog::write_csv(std::ostream& os) const {
  os << "iteration,recon_mse,mean_prior_log_prob,prior_residual,generator_residual,mmd,masked_mse,elbo,"
        "wall_seconds\n";
  os.precision(17);
  for (const auto& r : records) {
    os << r.iteration << ',' << r.recon_mse << ',' << r.mean_prior_log_prob << ',' << r.prior_residual << ','
       << r.generator_residual << ',' << r.mmd << ',' << r.masked_mse << ',' << r.elbo << ',' << r.wall_seconds
       << '\n';
  }
}

void update_prior(FlowModel& prior, const Matrix& z, AdamState& opt) {
  if (!prior.actnorm_initialized() && opt.options.lr > 0.0) prior.initialize_actnorm(z);
  prior.params().zero_grad();
  backward(scale(mean(prior.log_prob(Tensor::constant(z))), -1.0));
  adam_step(prior.params(), opt);
}

void update_generator(Generator& gen, const Matrix& x, const Matrix& z, AdamState& opt, const Matrix* mask) {
  gen.params().zero_grad();
  backward(scale(mean(gen.log_likelihood(x, Tensor::constant(z), mask)), -1.0));
  adam_step(gen.params(), opt);
}

Vector prior_gradient(const FlowModel& prior, const Matrix& z) {
  FlowModel p = independent_copy(prior);
  backward(mean(p.log_prob(Tensor::constant(z))));
  return p.params().flat_grad();
}

Vector generator_gradient(const Generator& gen, const Matrix& x, const Matrix& z, const Matrix* mask) {
  Generator g = independent_copy(gen);
  backward(mean(g.log_likelihood(x, Tensor::constant(z), mask)));
  return g.params().flat_grad();
}

DiagnosticRecord diagnostics_step(const FlowModel& prior, const Generator& gen, const Matrix& x, const Matrix& z,
                                  std::mt19937_64& rng, const Matrix* mask, bool with_standard_errors) {
  if (x.rows() != z.rows()) throw ContractError("diagnostics_step: batch sizes differ");
  DiagnosticRecord d;
  d.mean_prior_log_prob = flow_log_prob(prior, z).mean();
  const Matrix m = mask ? expand_mask(*mask, x.rows(), x.cols()) : Matrix();
  const Matrix* mp = mask ? &m : nullptr;
  if (with_standard_errors) {
    if (z.rows() < 2) throw ContractError("diagnostics_step: standard errors need two or more examples");
    std::vector<Vector> gp, gg;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const Matrix zi = z.row(i);
      const Matrix xi = x.row(i);
      const Matrix mi = mask ? Matrix(m.row(i)) : Matrix();
      gp.push_back(prior_gradient(prior, zi));
      gg.push_back(generator_gradient(gen, xi, zi, mask ? &mi : nullptr));
    }
    std::tie(d.prior_residual, d.prior_residual_se) = mean_norm_and_se(gp);
    std::tie(d.generator_residual, d.generator_residual_se) = mean_norm_and_se(gg);
  } else {
    d.prior_residual = prior_gradient(prior, z).norm();
    d.generator_residual = generator_gradient(gen, x, z, mp).norm();
  }
  if (z.rows() >= 2) d.mmd = mmd(flow_sample(prior, static_cast<int>(z.rows()), rng), z);
  return d;
}

TrainResult train_mcmc(const Dataset& data, const TrainConfig& cfg) {
  return train_mcmc(data, cfg, make_model_state(cfg, data.dim()));
}

TrainResult train_mcmc(const Dataset& data, const TrainConfig& cfg, ModelState init) {
  if (cfg.mode != TrainMode::Mcmc) throw ConfigError("train_mcmc requires mode mcmc");
  return run_mcmc_loop(data, nullptr, nullptr, cfg, std::move(init));
}

TrainResult train_recovery(const MaskedDataset& data, const TrainConfig& cfg, const Matrix* ground_truth) {
  return train_recovery(data, cfg, ground_truth, make_model_state(cfg, data.occluded.dim()));
}

TrainResult train_recovery(const MaskedDataset& data, const TrainConfig& cfg, const Matrix* ground_truth,
                           ModelState init) {
  if (cfg.mode != TrainMode::Recovery) throw ConfigError("train_recovery requires mode recovery");
  return run_mcmc_loop(data.occluded, &data.mask, ground_truth, cfg, std::move(init));
}

TrainResult train_vae(const Dataset& data, const TrainConfig& cfg) {
  return train_vae(data, cfg, make_model_state(cfg, data.dim()));
}

TrainResult train_vae(const Dataset& data, const TrainConfig& cfg, ModelState state) {
  if (cfg.mode != TrainMode::Vae) throw ConfigError("train_vae requires mode vae");
  validate(cfg);
  if (!state.posterior) throw ContractError("train_vae: model state has no posterior network");
  const Eigen::Index n = data.x.rows();
  if (n < 2) throw DataError("training needs at least two examples");
  if (data.dim() != state.gen.data_dim()) throw DataError("data dimension does not match the generator");
  check_finite(data.x, "training data");

  TrainResult result;
  const Clock clock;
  BatchSampler sampler(n, cfg.batch_size, run_seed(cfg, kTagBatches));
  const int d = state.prior.dim();
  for (long long t = 0; t < cfg.iterations; ++t) {
    bool epoch_done = false;
    const auto idx = sampler.next(epoch_done);
    const Matrix xb = rows_of(data.x, idx);
    const ModelState last_good = clone(state);
    Matrix z;
    double elbo_mean = 0.0;
    try {
      for (int s = 0; s < cfg.inner_update_steps; ++s) {
        std::mt19937_64 rng(run_seed(cfg, kTagElbo, static_cast<std::uint64_t>(t * cfg.inner_update_steps + s)));
        std::normal_distribution<double> normal(0.0, 1.0);
        Matrix eps(xb.rows(), d);
        for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = normal(rng);
        if (s == 0 && !state.prior.actnorm_initialized() && learns_prior(cfg)) {
          state.prior.initialize_actnorm(state.posterior->frozen().sample(xb, eps).first.value());
        }
        state.prior.params().zero_grad();
        state.gen.params().zero_grad();
        state.posterior->params().zero_grad();
        Tensor e = elbo(state.prior, state.gen, *state.posterior, xb, eps);
        if (s == 0) {
          elbo_mean = e.value().mean();
          z = state.posterior->frozen().sample(xb, eps).first.value();
          if (t == 0) {
            RunLogRecord r = make_record(0, state, xb, z, nullptr, cfg, clock);
            r.elbo = elbo_mean;
            result.log.append(r);
          }
        }
        backward(scale(mean(e), -1.0));
        if (learns_prior(cfg)) adam_step(state.prior.params(), state.prior_opt);
        adam_step(state.posterior->params(), state.inference_opt);
        if (s + 1 == cfg.inner_update_steps) adam_step(state.gen.params(), state.gen_opt);
      }
      state.prior.params().zero_grad();
      state.gen.params().zero_grad();
    } catch (const NumericError& e) {
      abort_run(cfg, last_good, t + 1, e);
    }
    state.iteration = t + 1;
    if (epoch_done) {
      state.prior_opt.end_epoch();
      state.gen_opt.end_epoch();
      state.inference_opt.end_epoch();
      if (!cfg.checkpoint_dir.empty() && state.gen_opt.epochs_completed % cfg.checkpoint_every_epochs == 0) {
        save_run_checkpoint(cfg, state, "periodic.ckpt");
      }
    }
    if ((t + 1) % cfg.log_every == 0 || t + 1 == cfg.iterations) {
      RunLogRecord r = make_record(t + 1, state, xb, z, nullptr, cfg, clock);
      r.elbo = elbo_mean;
      result.log.append(r);
    }
  }
  result.state = std::move(state);
  return result;
}

}  // namespace lfbm
