#pragma once

// Binary checkpoint layout (all integers and floats little-endian):
//   "LFBM" | u32 version | u64 metadata length | metadata (JSON text)
//   | u32 array count | per array: u32 name length, name, u64 rows,
//     u64 cols, rows * cols f64 values (row-major)
// Optimizer moments are stored as arrays named "opt/<group>/{m,v}/<param>".

#include "lfbm/adam.hpp"
#include "lfbm/flow.hpp"
#include "lfbm/generator.hpp"
#include "lfbm/vae.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace lfbm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct ModelState {
  FlowModel prior;
  Generator gen;
  bool prior_trainable = true;
  std::optional<PosteriorNet> posterior;
  AdamState prior_opt;
  AdamState gen_opt;
  AdamState inference_opt;
  long long iteration = 0;
};

struct CheckpointInfo {
  std::string mode = "mcmc";
  std::string config_hash;
  nlohmann::json config = nlohmann::json::object();
};

struct LoadedCheckpoint {
  ModelState state;
  CheckpointInfo info;
  std::vector<std::string> warnings;
};

// Writes to a temporary file and renames it into place.
void save_checkpoint(const std::string& path, const ModelState& state, const CheckpointInfo& info);

struct ShapeExpectation {
  int latent_dim = 0;
  int data_dim = 0;
  int flow_depth = 0;
};

// Throws DataError on malformed files, version mismatch, or a shape that
// disagrees with `expect`. A config hash differing from `expected_hash`
// only adds a warning.
LoadedCheckpoint load_checkpoint(const std::string& path, const ShapeExpectation* expect = nullptr,
                                 const std::string* expected_hash = nullptr);

// Deep copy with fresh parameter storage and copied optimizer state.
ModelState clone(const ModelState& s);

}  // namespace lfbm
