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

#include "ensdiv/improvement_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

namespace ensdiv {

namespace {
constexpr const char* kModule = "improvement_analysis";

// Sum of k(p_i, q_j) over all pairs, skipping the diagonal when `same`.
// Fixed row-major summation order keeps the result reproducible.
double KernelSum(const PointCloud& p, const PointCloud& q, double inv_two_s2, bool same) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < q.rows(); ++j) {
      if (same && i == j) continue;
      row += std::exp(-(p.row(i) - q.row(j)).squaredNorm() * inv_two_s2);
    }
    total += row;
  }
  return total;
}
}  // namespace

ImprovementPair PerPointImprovement(const ProbMatrix& base, const ProbMatrix& alt,
                                    const LabelVector& labels, MetricKind metric,
                                    std::string base_id, std::string alt_id) {
  if (base.rows() != alt.rows() || base.cols() != alt.cols()) {
    throw ValidationError(kModule, "base and alt predictions differ in shape");
  }
  ImprovementPair out;
  out.base_id = std::move(base_id);
  out.alt_id = std::move(alt_id);
  out.metric = metric;
  out.delta = ComputeMetric(metric, base, labels).values - ComputeMetric(metric, alt, labels).values;
  return out;
}

double PearsonR(const VectorXd& a, const VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw ValidationError(kModule, "pearson_r needs equal lengths >= 2");
  }
  const VectorXd da = a.array() - a.mean();
  const VectorXd db = b.array() - b.mean();
  const double saa = da.squaredNorm(), sbb = db.squaredNorm();
  if (saa <= 0.0 || sbb <= 0.0) {
    throw NumericalError(kModule, "undefined correlation: zero variance");
  }
  return std::clamp(da.dot(db) / std::sqrt(saa * sbb), -1.0, 1.0);
}

double Mmd2Unbiased(const PointCloud& x, const PointCloud& y, double bandwidth) {
  const double m = static_cast<double>(x.rows()), n = static_cast<double>(y.rows());
  if (x.rows() < 2 || y.rows() < 2) throw ValidationError(kModule, "MMD needs >= 2 points per side");
  if (!(bandwidth > 0.0)) throw ValidationError(kModule, "MMD bandwidth must be positive");
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  return KernelSum(x, x, inv, true) / (m * (m - 1.0)) +
         KernelSum(y, y, inv, true) / (n * (n - 1.0)) -
         2.0 * KernelSum(x, y, inv, false) / (m * n);
}

double MmdThreshold(long m, double alpha, double kernel_bound) {
  if (m < 1) throw ValidationError(kModule, "threshold needs m >= 1");
  if (!(alpha > 0.0) || alpha > 1.0) throw ValidationError(kModule, "alpha must be in (0, 1]");
  return 4.0 * kernel_bound / std::sqrt(static_cast<double>(m)) * std::sqrt(std::log(1.0 / alpha));
}

double MedianHeuristic(const PointCloud& x, const PointCloud& y, long max_points) {
  const Eigen::Index total = x.rows() + y.rows();
  const Eigen::Index take = std::min<Eigen::Index>(total, std::max<long>(2, max_points));
  PointCloud pooled(take, 2);
  for (Eigen::Index k = 0; k < take; ++k) {
    const Eigen::Index i = k * total / take;
    pooled.row(k) = i < x.rows() ? x.row(i) : y.row(i - x.rows());
  }
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(take * (take - 1) / 2));
  for (Eigen::Index i = 0; i < take; ++i) {
    for (Eigen::Index j = i + 1; j < take; ++j) dist.push_back((pooled.row(i) - pooled.row(j)).norm());
  }
  if (dist.empty()) throw NumericalError(kModule, "median heuristic needs >= 2 points");
  auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  if (!(*mid > 0.0)) throw NumericalError(kModule, "median pairwise distance is zero");
  return *mid;
}

std::string MmdTestResult::Formatted() const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1e (%.3f)", statistic, threshold);
  return buf;
}

MmdTestResult ImprovementSimilarityTest(const ImprovementPair& delta_a,
                                        const ImprovementPair& delta_b,
                                        const ImprovementPair& control, double alpha,
                                        double bandwidth) {
  const Eigen::Index n = delta_a.delta.size();
  if (delta_b.delta.size() != n || control.delta.size() != n) {
    throw ValidationError(kModule, "improvement vectors differ in length");
  }
  PointCloud x(n, 2), y(n, 2);
  x.col(0) = delta_a.delta;
  x.col(1) = delta_b.delta;
  y.col(0) = delta_a.delta;
  y.col(1) = control.delta;
  MmdTestResult r;
  r.alpha = alpha;
  r.m = n;
  r.bandwidth = bandwidth > 0.0 ? bandwidth : MedianHeuristic(x, y);
  r.statistic = Mmd2Unbiased(x, y, r.bandwidth);
  r.threshold = MmdThreshold(n, alpha);
  r.reject = r.statistic > r.threshold;
  return r;
}

}  // namespace ensdiv
