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

#pragma once

#include <string>

#include "ensdiv/metrics.hpp"
#include "ensdiv/types.hpp"

namespace ensdiv {

/// Per-point metric(base) - metric(alt); positive means alt improves.
struct ImprovementPair {
  std::string base_id;
  std::string alt_id;
  VectorXd delta;
  MetricKind metric = MetricKind::kBrier;
};

ImprovementPair PerPointImprovement(const ProbMatrix& base, const ProbMatrix& alt,
                                    const LabelVector& labels, MetricKind metric,
                                    std::string base_id = "", std::string alt_id = "");

/// Sample Pearson correlation.
double PearsonR(const VectorXd& a, const VectorXd& b);

/// Points in the plane, one per row.
using PointCloud = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

/// Unbiased squared MMD with a Gaussian kernel exp(-|u - v|^2 / (2 s^2)).
double Mmd2Unbiased(const PointCloud& x, const PointCloud& y, double bandwidth);

/// Distribution-free acceptance threshold for equal sample sizes m with
/// kernel bound K: (4K / sqrt(m)) * sqrt(ln(1 / alpha)).
double MmdThreshold(long m, double alpha, double kernel_bound = 1.0);

/// Median pairwise Euclidean distance over the pooled clouds, computed on a
/// deterministic strided subsample of at most `max_points` points.
double MedianHeuristic(const PointCloud& x, const PointCloud& y, long max_points = 2000);

struct MmdTestResult {
  double statistic = 0.0;
  double threshold = 0.0;
  double alpha = 0.05;
  double bandwidth = 0.0;
  long m = 0;
  bool reject = false;

  /// "statistic (threshold)", e.g. "2.2e-03 (0.069)".
  std::string Formatted() const;
};

/// Compares the clouds {(a_i, b_i)} and {(a_i, control_i)} with MMD_u^2.
/// A non-positive `bandwidth` selects the median heuristic.
MmdTestResult ImprovementSimilarityTest(const ImprovementPair& delta_a,
                                        const ImprovementPair& delta_b,
                                        const ImprovementPair& control, double alpha = 0.05,
                                        double bandwidth = 0.0);

}  // namespace ensdiv
