#pragma once

#include "lfbm/checkpoint.hpp"
#include "lfbm/dataset.hpp"
#include "lfbm/langevin.hpp"
#include "lfbm/masks.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace lfbm {

enum class TrainMode { Mcmc, Vae, Recovery };

const char* mode_name(TrainMode m);

struct TrainConfig {
  TrainMode mode = TrainMode::Mcmc;
  int iterations = 1000;
  int batch_size = 100;
  double lr_prior = 4e-4;
  double lr_generator = 4e-4;
  double decay = 0.998;
  LangevinConfig langevin;  // training-time chain; its seed is ignored

  int latent_dim = 100;
  int flow_depth = 5;
  int flow_hidden = 128;
  std::vector<int> decoder_hidden = {256, 256};
  Activation decoder_output = Activation::Tanh;
  double sigma = 1.0;
  // false: prior stays at its identity initialization, i.e. N(0, I).
  bool prior_trainable = true;

  // vae mode
  double lr_inference = 4e-4;
  int inner_update_steps = 1;
  std::vector<int> encoder_hidden = {256, 256};

  // recovery mode (used by callers that build the occluded dataset)
  std::optional<MaskSpec> mask;

  std::uint64_t seed = 0;
  int log_every = 100;
  std::string checkpoint_dir;  // empty: no periodic or abort checkpoints
  int checkpoint_every_epochs = 10;
  CheckpointInfo provenance;
};

void validate(const TrainConfig& cfg);

// Fresh models and optimizers for data of dimension `data_dim`.
ModelState make_model_state(const TrainConfig& cfg, int data_dim);

struct RunLogRecord {
  long long iteration = 0;
  double recon_mse = 0.0;
  double mean_prior_log_prob = 0.0;
  double prior_residual = 0.0;
  double generator_residual = 0.0;
  double mmd = 0.0;
  double masked_mse = std::numeric_limits<double>::quiet_NaN();
  double elbo = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
};

struct RunLog {
  std::vector<RunLogRecord> records;
  void append(const RunLogRecord& r) { records.push_back(r); }
  void write_csv(std::ostream& os) const;
};

struct TrainResult {
  ModelState state;
  RunLog log;
  Matrix recovered;  // recovery mode: g(z) for every training example
};

TrainResult train_mcmc(const Dataset& data, const TrainConfig& cfg);
TrainResult train_mcmc(const Dataset& data, const TrainConfig& cfg, ModelState init);
TrainResult train_vae(const Dataset& data, const TrainConfig& cfg);
TrainResult train_vae(const Dataset& data, const TrainConfig& cfg, ModelState init);
// `ground_truth` (same shape as data.occluded.x) enables the masked-region MSE
// column of the log.
TrainResult train_recovery(const MaskedDataset& data, const TrainConfig& cfg, const Matrix* ground_truth = nullptr);
TrainResult train_recovery(const MaskedDataset& data, const TrainConfig& cfg, const Matrix* ground_truth,
                           ModelState init);

// One Adam step ascending mean log p(z) over the (constant) latents. The
// first call on an uninitialized prior runs the data-dependent actnorm
// initialization on z unless the learning rate is zero.
void update_prior(FlowModel& prior, const Matrix& z, AdamState& opt);
// One Adam step ascending mean log p(x | z).
void update_generator(Generator& gen, const Matrix& x, const Matrix& z, AdamState& opt,
                      const Matrix* mask = nullptr);

// Mean gradients of the two learning objectives at fixed latents.
Vector prior_gradient(const FlowModel& prior, const Matrix& z);
Vector generator_gradient(const Generator& gen, const Matrix& x, const Matrix& z, const Matrix* mask = nullptr);

struct DiagnosticRecord {
  double prior_residual = 0.0;
  double generator_residual = 0.0;
  // sqrt(trace(per-example gradient covariance) / n), when requested
  double prior_residual_se = std::numeric_limits<double>::quiet_NaN();
  double generator_residual_se = std::numeric_limits<double>::quiet_NaN();
  double mean_prior_log_prob = 0.0;
  double mmd = 0.0;
};

DiagnosticRecord diagnostics_step(const FlowModel& prior, const Generator& gen, const Matrix& x, const Matrix& z,
                                  std::mt19937_64& rng, const Matrix* mask = nullptr,
                                  bool with_standard_errors = false);

}  // namespace lfbm
