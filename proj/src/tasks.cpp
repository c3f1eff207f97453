#include "lfbm/tasks.hpp"

#include "lfbm/error.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

namespace lfbm {

ReconstructResult reconstruct(const FlowModel& prior, const Generator& gen, const Matrix& x,
                              const LangevinConfig& cfg) {
  ReconstructResult r;
  r.recon = decode(gen, sample_posterior(prior, gen, x, cfg).z);
  r.per_example_mse = (r.recon - x).array().square().rowwise().mean();
  r.mean_mse = r.per_example_mse.mean();
  return r;
}

InpaintResult inpaint(const FlowModel& prior, const Generator& gen, const Matrix& x_true, const Matrix& mask,
                      int completions, const LangevinConfig& cfg) {
  if (completions < 1) throw ContractError("inpaint: need at least one completion");
  const Matrix m = expand_mask(mask, x_true.rows(), x_true.cols());
  const Matrix occluded = Matrix::Ones(m.rows(), m.cols()) - m;
  const Matrix observed = x_true.cwiseProduct(m);
  InpaintResult r;
  for (int k = 0; k < completions; ++k) {
    LangevinConfig c = cfg;
    c.seed = stream_seed(cfg.seed, static_cast<std::uint64_t>(k));
    const Matrix g = decode(gen, sample_posterior(prior, gen, observed, c, &m).z);
    r.completions.push_back(observed + g.cwiseProduct(occluded));
    if (occluded.sum() > 0.0) r.masked_mse.push_back(mse(r.completions.back(), x_true, &occluded));
  }
  return r;
}

Matrix ancestral_sample(const FlowModel& prior, const Generator& gen, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return decode(gen, flow_sample(prior, n, rng));
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) throw ContractError("mean_of: empty input");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

AnomalyResult anomaly_protocol(const Dataset& train_set, const Dataset& test, int heldout, const TrainConfig& cfg,
                               const LangevinConfig& test_cfg, int repeats) {
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (train_set.labels.empty() || test.labels.empty()) throw DataError("anomaly protocol needs labelled data");
  std::vector<Eigen::Index> normal;
  for (std::size_t i = 0; i < train_set.labels.size(); ++i) {
    if (train_set.labels[i] != heldout) normal.push_back(static_cast<Eigen::Index>(i));
  }
  const Dataset normals = subset(train_set, normal);
  ScoredSet scored;
  for (int l : test.labels) scored.labels.push_back(l == heldout ? 1 : 0);

  AnomalyResult out;
  std::vector<double> values;
  for (int r = 0; r < repeats; ++r) {
    TrainConfig c = cfg;
    c.seed = cfg.seed + static_cast<std::uint64_t>(r);
    const TrainResult trained = train_mcmc(normals, c);
    LangevinConfig lc = test_cfg;
    lc.seed = stream_seed(c.seed, 0x7e57);
    scored.scores = anomaly_scores(trained.state.prior, trained.state.gen, test.x, lc);
    out.runs.push_back({c.seed, auprc(scored)});
    values.push_back(out.runs.back().auprc);
  }
  out.mean = mean_of(values);
  out.sd = sample_sd(values);
  return out;
}

SweepParam parse_sweep_param(const std::string& s) {
  if (s == "steps") return SweepParam::Steps;
  if (s == "step_size") return SweepParam::StepSize;
  if (s == "latent_dim") return SweepParam::LatentDim;
  if (s == "flow_depth") return SweepParam::FlowDepth;
  throw ConfigError("sweep parameter must be steps, step_size, latent_dim or flow_depth (got '" + s + "')");
}

const char* sweep_param_name(SweepParam p) {
  switch (p) {
    case SweepParam::Steps: return "steps";
    case SweepParam::StepSize: return "step_size";
    case SweepParam::LatentDim: return "latent_dim";
    case SweepParam::FlowDepth: return "flow_depth";
  }
  return "steps";
}

namespace {

int as_count(double v, const char* what) {
  if (v != std::floor(v) || v < 0.0) throw ConfigError(std::string(what) + " values must be non-negative integers");
  return static_cast<int>(v);
}

}  // namespace

double sample_mmd(const FlowModel& prior, const Generator& gen, const Matrix& data, int n, std::uint64_t seed) {
  const Eigen::Index rows = std::min<Eigen::Index>(n, data.rows());
  const Eigen::Index stride = data.rows() / rows;
  Matrix ref(rows, data.cols());
  for (Eigen::Index i = 0; i < rows; ++i) ref.row(i) = data.row(i * stride);
  return mmd(ancestral_sample(prior, gen, n, seed), ref);
}

TrainResult train(const Dataset& data, const TrainConfig& cfg) {
  switch (cfg.mode) {
    case TrainMode::Mcmc: return train_mcmc(data, cfg);
    case TrainMode::Vae: return train_vae(data, cfg);
    case TrainMode::Recovery: {
      if (!cfg.mask) throw ConfigError("recovery mode requires a mask");
      const MaskedDataset md = apply_mask(data, *cfg.mask);
      return train_recovery(md, cfg, &data.x);
    }
  }
  throw ConfigError("unknown mode");
}

std::vector<SweepRow> sweep(const RunConfig& base, const Dataset& data, SweepParam param,
                            const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<SweepRow> rows;
  for (double v : values) {
    TrainConfig c = base.train;
    switch (param) {
      case SweepParam::Steps: c.langevin.steps = as_count(v, "steps"); break;
      case SweepParam::StepSize: c.langevin.step_size = v; break;
      case SweepParam::LatentDim: c.latent_dim = as_count(v, "latent_dim"); break;
      case SweepParam::FlowDepth: c.flow_depth = as_count(v, "flow_depth"); break;
    }
    const TrainResult r = train(data, c);
    SweepRow row;
    row.value = v;
    row.final_mmd = sample_mmd(r.state.prior, r.state.gen, data.x, 1000, stream_seed(c.seed, 0x5eed));
    row.final_mse = r.log.records.empty() ? std::nan("") : r.log.records.back().recon_mse;
    rows.push_back(row);
  }
  return rows;
}

void write_sweep_csv(std::ostream& os, SweepParam param, const std::vector<SweepRow>& rows) {
  os << sweep_param_name(param) << ",final_mmd,final_mse\n";
  os.precision(17);
  for (const auto& r : rows) os << r.value << ',' << r.final_mmd << ',' << r.final_mse << '\n';
}

}  // namespace lfbm
