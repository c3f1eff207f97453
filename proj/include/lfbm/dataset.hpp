#pragma once

#include "lfbm/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lfbm {

struct Dataset {
  Matrix x;                 // N x D, values in [-1, 1]
  std::vector<int> labels;  // empty or N entries
  std::string name;
  int height = 0;  // image shape when the rows are images, else 0
  int width = 0;
  // Affine map applied to raw synthetic values: stored = (raw - offset) * scale.
  double offset = 0.0;
  double scale = 1.0;

  Eigen::Index size() const { return x.rows(); }
  int dim() const { return static_cast<int>(x.cols()); }
  bool is_image() const { return height > 0 && width > 0; }
};

// Throws DataError on empty data, out-of-range values or label count mismatch.
void validate(const Dataset& ds);

Dataset subset(const Dataset& ds, const std::vector<Eigen::Index>& rows);

struct GaussianMixtureSpec {
  std::vector<Vector> means;
  std::vector<double> stddevs;  // isotropic, one per component
  std::vector<double> weights;  // empty = uniform
};

struct TwoRingsSpec {
  double inner_radius = 0.5;
  double outer_radius = 1.0;
  double noise = 0.05;
};

// Samples are rescaled by a fixed factor derived from the family parameters
// (extent of mean +- 4 sd, or outer radius + 4 noise) and clipped into
// [-0.999, 0.999]. Labels hold the component / ring index.
Dataset gen_gaussian_mixture(const GaussianMixtureSpec& spec, int n, std::uint64_t seed);
Dataset gen_two_rings(const TwoRingsSpec& spec, int n, std::uint64_t seed);

// IDX (big-endian) image file, optionally with a label file. Pixels map to
// x = 2 v / 255 - 1.
Dataset load_idx(const std::string& images_path, const std::optional<std::string>& labels_path = std::nullopt);

// Inverse of load_idx for data in [-1, 1] (pixel = round(255 (x + 1) / 2)).
void write_idx_images(const std::string& path, const Matrix& x, int rows, int cols);
void write_idx_labels(const std::string& path, const std::vector<int>& labels);

// Binary PGM grid: images tiled row-major, `cols` per row, 2-pixel black
// separators between tiles.
void export_grid(const Matrix& images, int height, int width, int cols, const std::string& path);

void write_points_csv(const std::string& path, const Matrix& points);

}  // namespace lfbm
