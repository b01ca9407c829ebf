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

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ensdiv/decomposition.hpp"
#include "ensdiv/types.hpp"

namespace ensdiv {

enum class SampleSource { kInD, kOOD };

/// Per-point (average member uncertainty, diversity) pairs.
struct JointSample {
  VectorXd avg;
  VectorXd div;
  SampleSource source = SampleSource::kInD;

  Eigen::Index size() const { return avg.size(); }
};

/// Builds the joint sample from the quadratic (variance) or entropy (JSD)
/// decomposition of an ensemble.
JointSample JointSamples(std::span<const ProbMatrix> members, DecompositionFamily family,
                         SampleSource source = SampleSource::kInD);

/// Deterministic strided subsample to at most `cap` points (no-op when the
/// sample is smaller).
JointSample Subsample(const JointSample& sample, Eigen::Index cap);

struct Bandwidth2 {
  double hx = 0.0;
  double hy = 0.0;
};

/// Scott's rule in two dimensions: h = n^(-1/6) * sample std, per axis.
Bandwidth2 ScottBandwidth(const JointSample& sample);

/// Sample standard deviation (1/(n-1)).
double SampleStd(const VectorXd& v);

struct KdeGrid {
  VectorXd x_grid;
  VectorXd y_grid;
  /// density(ix, iy) at (x_grid[ix], y_grid[iy]).
  MatrixXd density;
  Bandwidth2 bandwidth;
  /// Set by ConditionalGrid for columns with no mass.
  std::vector<bool> empty_column;
};

VectorXd Linspace(double lo, double hi, Eigen::Index n);

/// Product-Gaussian KDE evaluated on the grid.
KdeGrid KdeJoint(const JointSample& sample, const VectorXd& x_grid, const VectorXd& y_grid,
                 Bandwidth2 bandwidth);

/// Rescales each x-column to unit sum; columns below 1e-12 total are zeroed
/// and flagged.
KdeGrid ConditionalGrid(KdeGrid grid);

struct ConditionalCurve {
  VectorXd x_grid;
  VectorXd y_hat;
  double bandwidth = 0.0;
  double ridge = 0.0;
};

/// 1e-3 times the population variance of the targets.
double DefaultRidge(const VectorXd& y);

enum class KrrSolver {
  /// Low-rank route above kKrrDenseLimit points, dense below.
  kAuto,
  /// Full n x n Cholesky of K + ridge n I.
  kDense,
  /// Pivoted Cholesky K ~ L L^T truncated once every residual diagonal is
  /// below 1e-13, then ridge regression on the rows of L.
  kLowRank,
};

inline constexpr Eigen::Index kKrrDenseLimit = 400;

/// Gaussian-kernel ridge regression of y on x: solves (K + ridge n I) a = y
/// with a Cholesky factorization and evaluates sum_i a_i k(x*, x_i). On
/// factorization failure the ridge is multiplied by 10, at most 3 times.
ConditionalCurve KrrConditionalExpectation(const VectorXd& x, const VectorXd& y,
                                           double bandwidth, double ridge,
                                           const VectorXd& x_eval,
                                           KrrSolver solver = KrrSolver::kAuto);

/// Pivoted (rank-revealing) Cholesky of the Gaussian Gram matrix of `x`.
struct PivotedCholesky {
  /// n x r factor with K ~ factor * factor^T.
  MatrixXd factor;
  std::vector<Eigen::Index> pivots;
  /// Largest remaining diagonal of K - factor * factor^T.
  double residual = 0.0;
};

PivotedCholesky GaussianPivotedCholesky(const VectorXd& x, double bandwidth,
                                        double tolerance = 1e-13);

enum class DStatMode {
  /// Sum of pointwise differences over the sum of the InD curve.
  kRatioOfSums,
  /// Grid mean of the pointwise relative change.
  kIntegral,
};

double DStatistic(const ConditionalCurve& ind, const ConditionalCurve& ood,
                  DStatMode mode = DStatMode::kRatioOfSums);

/// Value at the given percentile (linear interpolation between order stats).
double Percentile(std::vector<double> values, double pct);

struct PermutationOptions {
  int n_surrogates = 100;
  std::uint64_t seed = 0;
  int workers = 1;
  DStatMode mode = DStatMode::kRatioOfSums;
  std::optional<double> bandwidth;
  std::optional<double> ridge;
  int grid_points = 100;
};

struct DStatResult {
  double d = 0.0;
  double p_value = 1.0;
  int n_surrogates = 0;
  std::vector<double> surrogate_d;
  double bandwidth = 0.0;
  double ridge = 0.0;
  ConditionalCurve curve_ind;
  ConditionalCurve curve_ood;
};

/// Evaluation grid for a pair of samples: grid_points equally spaced values
/// between the 1st and 99th percentile of the pooled averages, restricted to
/// the overlap of both samples' ranges.
VectorXd PairGrid(const VectorXd& pooled_avg, const VectorXd& ind_avg,
                  const VectorXd& ood_avg, int grid_points);

/// Fits both conditional curves with a shared bandwidth and ridge.
std::pair<ConditionalCurve, ConditionalCurve> FitPairCurves(const JointSample& ind,
                                                            const JointSample& ood,
                                                            double bandwidth, double ridge,
                                                            const VectorXd& pooled_avg,
                                                            int grid_points);

/// One-sided Monte Carlo permutation test of the d-statistic. Pooled points
/// are re-partitioned into the original sizes, both curves refit, and
/// p = (#{surrogate d >= observed d} + 1) / (n_surrogates + 1). Bandwidth and
/// ridge default to Scott's hx and DefaultRidge of the pooled sample.
DStatResult PermutationTest(const JointSample& ind, const JointSample& ood,
                            const PermutationOptions& options);

}  // namespace ensdiv
