#include "lfbm/metrics.hpp"

#include "lfbm/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace lfbm {

double mse(const Matrix& a, const Matrix& b, const Matrix* include) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ContractError("mse: shape mismatch");
  if (include == nullptr) {
    if (a.size() == 0) throw ContractError("mse: empty input");
    return (a - b).array().square().mean();
  }
  if (include->cols() != a.cols() || (include->rows() != 1 && include->rows() != a.rows())) {
    throw ContractError("mse: mask shape mismatch");
  }
  const Matrix m = include->rows() == a.rows() ? *include : include->replicate(a.rows(), 1);
  const double count = m.sum();
  if (count <= 0.0) throw ContractError("mse: empty inclusion set");
  return (a - b).array().square().cwiseProduct(m.array()).sum() / count;
}

double auprc(const ScoredSet& s) {
  if (s.scores.size() != s.labels.size()) throw ContractError("auprc: scores and labels differ in length");
  std::size_t positives = 0;
  for (int l : s.labels) {
    if (l != 0 && l != 1) throw ContractError("auprc: labels must be 0 or 1");
    positives += static_cast<std::size_t>(l);
  }
  if (positives == 0 || positives == s.labels.size()) throw ContractError("auprc: need both classes");

  std::vector<std::size_t> order(s.scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });
  double ap = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (s.labels[order[k]] == 1) {
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  return ap / static_cast<double>(positives);
}

namespace {

Matrix sorted_rows(const Matrix& m) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(m.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (m(a, j) != m(b, j)) return m(a, j) < m(b, j);
    }
    return false;
  });
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

// Median of pairwise squared distances over the pooled sample. Large pools
// use an evenly strided subset of the sorted rows.
double median_sq_distance(const Matrix& pooled) {
  constexpr Eigen::Index kMaxPoints = 1500;
  const Eigen::Index n = pooled.rows();
  const Eigen::Index stride = n > kMaxPoints ? (n + kMaxPoints - 1) / kMaxPoints : 1;
  std::vector<Eigen::Index> pick;
  for (Eigen::Index i = 0; i < n; i += stride) pick.push_back(i);
  std::vector<double> d2;
  d2.reserve(pick.size() * (pick.size() - 1) / 2);
  for (std::size_t a = 0; a < pick.size(); ++a)
    for (std::size_t b = a + 1; b < pick.size(); ++b)
      d2.push_back((pooled.row(pick[a]) - pooled.row(pick[b])).squaredNorm());
  if (d2.empty()) return 1.0;
  auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
  std::nth_element(d2.begin(), mid, d2.end());
  return *mid;
}

double kernel_sum(const Matrix& a, const Matrix& b, double inv_two_bw, bool skip_diagonal) {
  const Vector na = a.rowwise().squaredNorm();
  const Vector nb = b.rowwise().squaredNorm();
  double total = 0.0;
  constexpr Eigen::Index kBlock = 512;
  for (Eigen::Index i0 = 0; i0 < a.rows(); i0 += kBlock) {
    const Eigen::Index bi = std::min(kBlock, a.rows() - i0);
    Matrix cross = a.middleRows(i0, bi) * b.transpose();
    for (Eigen::Index i = 0; i < bi; ++i) {
      for (Eigen::Index j = 0; j < b.rows(); ++j) {
        if (skip_diagonal && i0 + i == j) continue;
        const double d2 = std::max(0.0, na(i0 + i) + nb(j) - 2.0 * cross(i, j));
        total += std::exp(-d2 * inv_two_bw);
      }
    }
  }
  return total;
}

}  // namespace

double mmd(const Matrix& x_in, const Matrix& y_in) {
  if (x_in.cols() != y_in.cols()) throw ContractError("mmd: dimension mismatch");
  if (x_in.rows() < 2 || y_in.rows() < 2) throw ContractError("mmd: need at least two samples per set");
  check_finite(x_in, "mmd input");
  check_finite(y_in, "mmd input");
  const Matrix x = sorted_rows(x_in);
  const Matrix y = sorted_rows(y_in);
  Matrix pooled(x.rows() + y.rows(), x.cols());
  pooled << x, y;
  const double bw2 = std::max(median_sq_distance(sorted_rows(pooled)), 1e-12);
  const double inv = 1.0 / (2.0 * bw2);
  const double m = static_cast<double>(x.rows());
  const double n = static_cast<double>(y.rows());
  const double kxx = kernel_sum(x, x, inv, true) / (m * (m - 1.0));
  const double kyy = kernel_sum(y, y, inv, true) / (n * (n - 1.0));
  const double kxy = kernel_sum(x, y, inv, false) / (m * n);
  return std::max(0.0, kxx + kyy - 2.0 * kxy);
}

std::vector<double> anomaly_scores(const FlowModel& prior, const Generator& gen, const Matrix& x,
                                   const LangevinConfig& cfg) {
  PosteriorSample post = sample_posterior(prior, gen, x, cfg);
  Vector s = joint_log_prob(prior, gen, x, post.z);
  return {s.data(), s.data() + s.size()};
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricRow>& rows) {
  os << "metric,value,seed,config_hash\n";
  os.precision(17);
  for (const auto& r : rows) os << r.metric << ',' << r.value << ',' << r.seed << ',' << r.config_hash << '\n';
}

}  // namespace lfbm
