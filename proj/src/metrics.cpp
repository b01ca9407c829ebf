/*
 * Copyright 2026 The ensdiv Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "ensdiv/metrics.hpp"

#include <algorithm>

#include "ensdiv/decomposition.hpp"

namespace ensdiv {

std::string_view MetricName(MetricKind kind) {
  switch (kind) {
    case MetricKind::kZeroOne: return "zero_one";
    case MetricKind::kNll: return "nll";
    case MetricKind::kBrier: return "brier";
    case MetricKind::kEntropy: return "entropy";
    case MetricKind::kQuadUncertainty: return "quad_uncertainty";
  }
  return "unknown";
}

MetricVector ComputeMetric(MetricKind kind, const ProbMatrix& probs,
                           const LabelVector& labels) {
  switch (kind) {
    case MetricKind::kZeroOne: return {kind, ZeroOneError(probs, labels)};
    case MetricKind::kNll: return {kind, Nll(probs, labels)};
    case MetricKind::kBrier: return {kind, Brier(probs, labels)};
    case MetricKind::kEntropy: return {kind, Entropy(probs)};
    case MetricKind::kQuadUncertainty: return {kind, QuadUncertainty(probs)};
  }
  throw ValidationError("metrics", "unknown metric kind");
}

CalibrationSummary Calibration(const ProbMatrix& probs, const LabelVector& labels,
                               int n_bins) {
  if (n_bins < 1) throw ValidationError("metrics", "n_bins must be >= 1");
  internal::CheckLabels(probs, labels);
  CalibrationSummary s;
  s.n_bins = n_bins;
  s.bin_counts.assign(n_bins, 0);
  std::vector<double> conf_sum(n_bins, 0.0), hit_sum(n_bins, 0.0);
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const Eigen::Index pred = ArgMax(probs.row(i));
    const double conf = probs(i, pred);
    int b = static_cast<int>(std::ceil(conf * n_bins)) - 1;
    b = std::clamp(b, 0, n_bins - 1);
    ++s.bin_counts[b];
    conf_sum[b] += conf;
    hit_sum[b] += pred == labels(i) ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(probs.rows());
  double sq = 0.0;
  s.bin_confidence.assign(n_bins, 0.0);
  s.bin_accuracy.assign(n_bins, 0.0);
  for (int b = 0; b < n_bins; ++b) {
    if (s.bin_counts[b] == 0) continue;
    const double cnt = static_cast<double>(s.bin_counts[b]);
    s.bin_confidence[b] = conf_sum[b] / cnt;
    s.bin_accuracy[b] = hit_sum[b] / cnt;
    const double gap = s.bin_accuracy[b] - s.bin_confidence[b];
    s.ece += cnt / n * std::abs(gap);
    sq += cnt / n * gap * gap;
  }
  s.resce = std::sqrt(sq);
  return s;
}

std::string_view FamilyName(DecompositionFamily family) {
  switch (family) {
    case DecompositionFamily::kQuadraticVariance: return "quadratic_variance";
    case DecompositionFamily::kEntropyJsd: return "entropy_jsd";
    case DecompositionFamily::kBrierGap: return "brier_gap";
    case DecompositionFamily::kNllGap: return "nll_gap";
  }
  return "unknown";
}

double UncertaintyRangeMax(DecompositionFamily family, Eigen::Index n_classes) {
  const double c = static_cast<double>(n_classes);
  switch (family) {
    case DecompositionFamily::kQuadraticVariance: return 1.0 - 1.0 / c;
    case DecompositionFamily::kEntropyJsd: return std::log(c);
    case DecompositionFamily::kBrierGap: return 2.0;
    case DecompositionFamily::kNllGap: return -std::log(kLogClamp);
  }
  return 1.0;
}

Histogram MarginalAvgUncertainty(const VectorXd& avg_member, DecompositionFamily family,
                                 Eigen::Index n_classes, int n_cells) {
  if (n_cells < 1) throw ValidationError("decomposition", "n_cells must be >= 1");
  Histogram h;
  h.lo = 0.0;
  h.hi = UncertaintyRangeMax(family, n_classes);
  h.counts.assign(n_cells, 0);
  const double width = h.CellWidth();
  for (Eigen::Index i = 0; i < avg_member.size(); ++i) {
    // Relative slack absorbs rounding at the top edge (e.g. 1 - 10 * 0.01).
    int cell = static_cast<int>(std::floor((avg_member(i) - h.lo) / width + 1e-9));
    h.counts[std::clamp(cell, 0, n_cells - 1)]++;
  }
  return h;
}

}  // namespace ensdiv
