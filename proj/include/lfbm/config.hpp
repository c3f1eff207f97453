#pragma once

// JSON run configuration. Omitted fields take the defaults of the selected
// hyperparameter profile ("svhn" unless "profile" says otherwise); keys the
// schema does not know are rejected with a ConfigError.

#include "lfbm/dataset.hpp"
#include "lfbm/training.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace lfbm {

struct DatasetConfig {
  std::string kind = "gaussian_mixture";  // gaussian_mixture | two_rings | idx
  int n = 2000;
  GaussianMixtureSpec mixture{{Vector::Constant(2, -2.0), Vector::Constant(2, 2.0)}, {0.5, 0.5}, {}};
  TwoRingsSpec rings;
  std::string images;
  std::string labels;
  int limit = 0;                     // 0 = all rows
  std::vector<int> exclude_labels;  // idx only
};

struct RunConfig {
  std::string profile = "svhn";
  TrainConfig train;
  int test_steps = 400;
  DatasetConfig dataset;
  std::string out_dir = "out";
};

RunConfig parse_config(const nlohmann::json& j);
// Missing or unreadable file -> ConfigError naming the path.
RunConfig load_config(const std::string& path);

// Effective configuration with every field filled in.
nlohmann::json to_json(const RunConfig& cfg);
// FNV-1a over the canonical dump of to_json without out_dir, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

// Profile defaults for a mode (one table for mcmc/recovery, another for vae).
RunConfig profile_defaults(const std::string& profile, TrainMode mode);

Dataset build_dataset(const DatasetConfig& cfg, std::uint64_t seed);

}  // namespace lfbm
