#pragma once

#include "lfbm/dataset.hpp"

#include <cstdint>

namespace lfbm {

struct MaskSpec {
  enum class Kind { Region, SaltPepper };
  enum class Placement { Center, Random };

  Kind kind = Kind::SaltPepper;
  int side = 20;                  // region side length
  Placement placement = Placement::Random;
  double fraction = 0.5;          // salt-and-pepper occlusion probability
  std::uint64_t seed = 0;
};

struct MaskedDataset {
  Dataset occluded;  // occluded coordinates set to 0
  Matrix mask;       // N x D, 1 = visible
};

void validate(const MaskSpec& spec);

// Region masks need image-shaped data; salt-and-pepper works on any rows.
MaskedDataset apply_mask(const Dataset& ds, const MaskSpec& spec);

// Index of the first example with no visible coordinate, or -1.
Eigen::Index first_fully_occluded(const Matrix& mask);

}  // namespace lfbm
