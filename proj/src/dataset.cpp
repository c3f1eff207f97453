#include "lfbm/dataset.hpp"

#include "lfbm/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>

namespace lfbm {

void validate(const Dataset& ds) {
  if (ds.x.rows() < 1 || ds.x.cols() < 1) throw DataError("dataset '" + ds.name + "' is empty");
  if (!ds.x.allFinite() || ds.x.maxCoeff() > 1.0 || ds.x.minCoeff() < -1.0) {
    throw DataError("dataset '" + ds.name + "' has values outside [-1, 1]");
  }
  if (!ds.labels.empty() && static_cast<Eigen::Index>(ds.labels.size()) != ds.x.rows()) {
    throw DataError("dataset '" + ds.name + "' has " + std::to_string(ds.labels.size()) + " labels for " +
                    std::to_string(ds.x.rows()) + " examples");
  }
  if (ds.is_image() && ds.height * ds.width != ds.x.cols()) {
    throw DataError("dataset '" + ds.name + "' image shape does not match its dimension");
  }
}

Dataset subset(const Dataset& ds, const std::vector<Eigen::Index>& rows) {
  Dataset out = ds;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), ds.x.cols());
  out.labels.clear();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= ds.x.rows()) throw ContractError("subset: row index out of range");
    out.x.row(static_cast<Eigen::Index>(i)) = ds.x.row(rows[i]);
    if (!ds.labels.empty()) out.labels.push_back(ds.labels[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

namespace {

void clip_into_range(Matrix& x) { x = x.cwiseMax(-0.999).cwiseMin(0.999); }

}  // namespace

Dataset gen_gaussian_mixture(const GaussianMixtureSpec& spec, int n, std::uint64_t seed) {
  const std::size_t k = spec.means.size();
  if (k == 0 || n < 1) throw ConfigError("gaussian_mixture: need at least one component and n >= 1");
  if (spec.stddevs.size() != k) throw ConfigError("gaussian_mixture: one stddev per component required");
  if (!spec.weights.empty() && spec.weights.size() != k) throw ConfigError("gaussian_mixture: weight count");
  const Eigen::Index d = spec.means[0].size();
  double extent = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    if (spec.means[c].size() != d || d < 1) throw ConfigError("gaussian_mixture: inconsistent mean dimensions");
    if (!(spec.stddevs[c] > 0.0)) throw ConfigError("gaussian_mixture: stddev must be positive");
    extent = std::max(extent, spec.means[c].cwiseAbs().maxCoeff() + 4.0 * spec.stddevs[c]);
  }
  std::vector<double> w = spec.weights.empty() ? std::vector<double>(k, 1.0) : spec.weights;
  for (double v : w)
    if (!(v > 0.0)) throw ConfigError("gaussian_mixture: weights must be positive");

  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> pick(w.begin(), w.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset ds;
  ds.name = "gaussian_mixture";
  ds.x.resize(n, d);
  ds.labels.resize(static_cast<std::size_t>(n));
  ds.scale = extent > 1.0 ? 1.0 / extent : 1.0;
  for (int i = 0; i < n; ++i) {
    const int c = pick(rng);
    ds.labels[static_cast<std::size_t>(i)] = c;
    for (Eigen::Index j = 0; j < d; ++j) {
      ds.x(i, j) = (spec.means[static_cast<std::size_t>(c)](j) + spec.stddevs[static_cast<std::size_t>(c)] * normal(rng)) *
                   ds.scale;
    }
  }
  clip_into_range(ds.x);
  return ds;
}

Dataset gen_two_rings(const TwoRingsSpec& spec, int n, std::uint64_t seed) {
  if (n < 1 || !(spec.inner_radius > 0.0) || !(spec.outer_radius > spec.inner_radius) || spec.noise < 0.0) {
    throw ConfigError("two_rings: need 0 < inner_radius < outer_radius, noise >= 0, n >= 1");
  }
  const double extent = spec.outer_radius + 4.0 * spec.noise;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::bernoulli_distribution outer(0.5);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset ds;
  ds.name = "two_rings";
  ds.x.resize(n, 2);
  ds.labels.resize(static_cast<std::size_t>(n));
  ds.scale = extent > 1.0 ? 1.0 / extent : 1.0;
  for (int i = 0; i < n; ++i) {
    const bool o = outer(rng);
    const double r = o ? spec.outer_radius : spec.inner_radius;
    const double a = angle(rng);
    ds.labels[static_cast<std::size_t>(i)] = o ? 1 : 0;
    ds.x(i, 0) = (r * std::cos(a) + spec.noise * normal(rng)) * ds.scale;
    ds.x(i, 1) = (r * std::sin(a) + spec.noise * normal(rng)) * ds.scale;
  }
  clip_into_range(ds.x);
  return ds;
}

namespace {

std::vector<unsigned char> read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off, const std::string& path) {
  if (off + 4 > b.size()) {
    throw DataError("'" + path + "' truncated at byte offset " + std::to_string(off) + " (header)");
  }
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
         std::uint32_t{b[off + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                         static_cast<char>(v)};
  out.write(bytes, 4);
}

void check_magic(std::uint32_t got, std::uint32_t want, const std::string& path) {
  if (got != want) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "wrong magic 0x%08X (expected 0x%08X) at byte offset 0", got, want);
    throw DataError("'" + path + "': " + buf);
  }
}

unsigned char to_pixel(double v) {
  const double p = std::round(255.0 * (std::clamp(v, -1.0, 1.0) + 1.0) / 2.0);
  return static_cast<unsigned char>(p);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::optional<std::string>& labels_path) {
  const auto img = read_all(images_path);
  check_magic(be32(img, 0, images_path), 0x00000803u, images_path);
  const std::uint32_t count = be32(img, 4, images_path);
  const std::uint32_t rows = be32(img, 8, images_path);
  const std::uint32_t cols = be32(img, 12, images_path);
  const std::size_t dim = std::size_t{rows} * cols;
  const std::size_t need = 16 + std::size_t{count} * dim;
  if (img.size() < need) {
    throw DataError("'" + images_path + "' truncated at byte offset " + std::to_string(img.size()) + " (expected " +
                    std::to_string(need) + " bytes)");
  }
  if (count == 0 || dim == 0) throw DataError("'" + images_path + "' holds no pixels");

  Dataset ds;
  ds.name = images_path;
  ds.height = static_cast<int>(rows);
  ds.width = static_cast<int>(cols);
  ds.x.resize(count, static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      ds.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          2.0 * (static_cast<double>(img[16 + i * dim + j]) / 255.0) - 1.0;
    }
  }

  if (labels_path) {
    const auto lab = read_all(*labels_path);
    check_magic(be32(lab, 0, *labels_path), 0x00000801u, *labels_path);
    const std::uint32_t n = be32(lab, 4, *labels_path);
    if (n != count) {
      throw DataError("'" + *labels_path + "' has " + std::to_string(n) + " labels for " + std::to_string(count) +
                      " images (byte offset 4)");
    }
    if (lab.size() < 8 + std::size_t{n}) {
      throw DataError("'" + *labels_path + "' truncated at byte offset " + std::to_string(lab.size()));
    }
    ds.labels.assign(lab.begin() + 8, lab.begin() + 8 + n);
  }
  return ds;
}

void write_idx_images(const std::string& path, const Matrix& x, int rows, int cols) {
  if (static_cast<Eigen::Index>(rows) * cols != x.cols()) throw ContractError("write_idx_images: shape mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  put_be32(out, 0x00000803u);
  put_be32(out, static_cast<std::uint32_t>(x.rows()));
  put_be32(out, static_cast<std::uint32_t>(rows));
  put_be32(out, static_cast<std::uint32_t>(cols));
  std::vector<char> payload(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) payload[static_cast<std::size_t>(i)] = static_cast<char>(to_pixel(x.data()[i]));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw DataError("write failed for '" + path + "'");
}

void write_idx_labels(const std::string& path, const std::vector<int>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  put_be32(out, 0x00000801u);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) out.put(static_cast<char>(l));
  if (!out) throw DataError("write failed for '" + path + "'");
}

void export_grid(const Matrix& images, int height, int width, int cols, const std::string& path) {
  if (height < 1 || width < 1 || static_cast<Eigen::Index>(height) * width != images.cols()) {
    throw ContractError("export_grid: image shape does not match row length");
  }
  if (cols < 1 || images.rows() < 1) throw ContractError("export_grid: need cols >= 1 and at least one image");
  constexpr int kSep = 2;
  const int n = static_cast<int>(images.rows());
  const int ncols = std::min(cols, n);
  const int nrows = (n + ncols - 1) / ncols;
  const int canvas_w = ncols * width + (ncols - 1) * kSep;
  const int canvas_h = nrows * height + (nrows - 1) * kSep;
  std::vector<unsigned char> canvas(static_cast<std::size_t>(canvas_w) * canvas_h, 0);
  for (int k = 0; k < n; ++k) {
    const int oy = (k / ncols) * (height + kSep);
    const int ox = (k % ncols) * (width + kSep);
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c)
        canvas[static_cast<std::size_t>(oy + r) * canvas_w + ox + c] = to_pixel(images(k, r * width + c));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "P5\n" << canvas_w << ' ' << canvas_h << "\n255\n";
  out.write(reinterpret_cast<const char*>(canvas.data()), static_cast<std::streamsize>(canvas.size()));
  if (!out) throw DataError("write failed for '" + path + "'");
}

void write_points_csv(const std::string& path, const Matrix& points) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  for (Eigen::Index j = 0; j < points.cols(); ++j) out << (j ? "," : "") << 'x' << j;
  out << '\n';
  out.precision(17);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index j = 0; j < points.cols(); ++j) out << (j ? "," : "") << points(i, j);
    out << '\n';
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace lfbm
