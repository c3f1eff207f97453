#include "lfbm/masks.hpp"

#include "lfbm/error.hpp"

#include <random>
#include <string>

namespace lfbm {

void validate(const MaskSpec& spec) {
  if (spec.kind == MaskSpec::Kind::SaltPepper && !(spec.fraction > 0.0 && spec.fraction < 1.0)) {
    throw ConfigError("salt_pepper fraction must lie in (0, 1)");
  }
  if (spec.kind == MaskSpec::Kind::Region && spec.side < 1) throw ConfigError("region side must be >= 1");
}

MaskedDataset apply_mask(const Dataset& ds, const MaskSpec& spec) {
  validate(spec);
  const Eigen::Index n = ds.x.rows();
  const Eigen::Index dim = ds.x.cols();
  MaskedDataset out{ds, Matrix::Ones(n, dim)};
  std::mt19937_64 rng(spec.seed);

  if (spec.kind == MaskSpec::Kind::SaltPepper) {
    std::bernoulli_distribution occlude(spec.fraction);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < dim; ++j)
        if (occlude(rng)) out.mask(i, j) = 0.0;
  } else {
    if (!ds.is_image() || static_cast<Eigen::Index>(ds.height) * ds.width != dim) {
      throw ConfigError("region mask needs image-shaped data");
    }
    if (spec.side > ds.height || spec.side > ds.width) {
      throw ConfigError("region side " + std::to_string(spec.side) + " does not fit a " + std::to_string(ds.height) +
                        "x" + std::to_string(ds.width) + " image");
    }
    std::uniform_int_distribution<int> top(0, ds.height - spec.side);
    std::uniform_int_distribution<int> left(0, ds.width - spec.side);
    for (Eigen::Index i = 0; i < n; ++i) {
      int r0 = (ds.height - spec.side) / 2;
      int c0 = (ds.width - spec.side) / 2;
      if (spec.placement == MaskSpec::Placement::Random) {
        r0 = top(rng);
        c0 = left(rng);
      }
      for (int r = r0; r < r0 + spec.side; ++r)
        for (int c = c0; c < c0 + spec.side; ++c) out.mask(i, r * ds.width + c) = 0.0;
    }
  }
  out.occluded.x = ds.x.cwiseProduct(out.mask);
  return out;
}

Eigen::Index first_fully_occluded(const Matrix& mask) {
  for (Eigen::Index i = 0; i < mask.rows(); ++i)
    if (mask.row(i).sum() == 0.0) return i;
  return -1;
}

}  // namespace lfbm
