#pragma once

// Evaluation tasks on trained models: reconstruction, inpainting, anomaly
// detection, recovery evaluation and hyperparameter sweeps.

#include "lfbm/config.hpp"
#include "lfbm/metrics.hpp"
#include "lfbm/training.hpp"

#include <string>
#include <vector>

namespace lfbm {

struct ReconstructResult {
  Matrix recon;
  Vector per_example_mse;
  double mean_mse = 0.0;
};

ReconstructResult reconstruct(const FlowModel& prior, const Generator& gen, const Matrix& x, const LangevinConfig& cfg);

struct InpaintResult {
  // One n x D matrix per chain seed: visible pixels copied from the input,
  // occluded pixels taken from g(z).
  std::vector<Matrix> completions;
  // Mean squared error over occluded pixels, per completion set.
  std::vector<double> masked_mse;
};

// Chain m runs with seed stream_seed(cfg.seed, m). An all-ones mask makes the
// completions equal the reconstructions and leaves masked_mse empty.
InpaintResult inpaint(const FlowModel& prior, const Generator& gen, const Matrix& x_true, const Matrix& mask,
                      int completions, const LangevinConfig& cfg);

// Samples the generator through the prior: g(f(z0)).
Matrix ancestral_sample(const FlowModel& prior, const Generator& gen, int n, std::uint64_t seed);

struct AnomalyRun {
  std::uint64_t seed = 0;
  double auprc = 0.0;
};

struct AnomalyResult {
  std::vector<AnomalyRun> runs;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (0 for one run)
};

// One repeat per seed: train on the training rows whose label differs from
// `heldout`, score every test row, and compute AUPRC with the held-out class
// as positives.
AnomalyResult anomaly_protocol(const Dataset& train, const Dataset& test, int heldout, const TrainConfig& cfg,
                               const LangevinConfig& test_cfg, int repeats);

double mean_of(const std::vector<double>& v);
double sample_sd(const std::vector<double>& v);

enum class SweepParam { Steps, StepSize, LatentDim, FlowDepth };
SweepParam parse_sweep_param(const std::string& s);
const char* sweep_param_name(SweepParam p);

struct SweepRow {
  double value = 0.0;
  double final_mmd = 0.0;  // ancestral samples vs training data
  double final_mse = 0.0;  // reconstruction MSE of the last logged batch
};

// One full training run per value with the shared base seed.
std::vector<SweepRow> sweep(const RunConfig& base, const Dataset& data, SweepParam param,
                            const std::vector<double>& values);
void write_sweep_csv(std::ostream& os, SweepParam param, const std::vector<SweepRow>& rows);

// MMD between `n` ancestral samples and at most `n` evenly strided data rows.
double sample_mmd(const FlowModel& prior, const Generator& gen, const Matrix& data, int n, std::uint64_t seed);

// Runs the training entry point selected by cfg.mode on data (recovery mode
// applies cfg.mask first and measures against the clean data).
TrainResult train(const Dataset& data, const TrainConfig& cfg);

}  // namespace lfbm
