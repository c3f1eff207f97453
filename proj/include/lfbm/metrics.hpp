#pragma once

#include "lfbm/flow.hpp"
#include "lfbm/generator.hpp"
#include "lfbm/langevin.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace lfbm {

// Mean squared difference over the coordinates where `include` is 1
// (all coordinates when null). `include` is 1 x D or n x D.
double mse(const Matrix& a, const Matrix& b, const Matrix* include = nullptr);

struct ScoredSet {
  std::vector<double> scores;  // higher = more normal
  std::vector<int> labels;     // 1 = anomaly (positive class), 0 = normal
};

// Step-wise average precision with anomalies as positives, sweeping items in
// ascending score order (stable for ties).
double auprc(const ScoredSet& s);

// Unbiased Gaussian-kernel MMD^2 with median-heuristic bandwidth on the
// pooled sample, clipped at zero. Rows are sorted first so the value does not
// depend on sample order.
double mmd(const Matrix& x, const Matrix& y);

// Joint log-density of each example at a latent inferred by Langevin
// sampling; higher means more normal.
std::vector<double> anomaly_scores(const FlowModel& prior, const Generator& gen, const Matrix& x,
                                   const LangevinConfig& cfg);

struct MetricRow {
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
};

void write_metrics_csv(std::ostream& os, const std::vector<MetricRow>& rows);

}  // namespace lfbm
