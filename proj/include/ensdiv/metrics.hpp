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

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "ensdiv/types.hpp"

namespace ensdiv {

enum class MetricKind { kZeroOne, kNll, kBrier, kEntropy, kQuadUncertainty };

std::string_view MetricName(MetricKind kind);

struct MetricVector {
  MetricKind kind;
  VectorXd values;

  double Mean() const { return values.size() ? values.mean() : 0.0; }
};

struct CalibrationSummary {
  int n_bins = 0;
  std::vector<long> bin_counts;
  std::vector<double> bin_confidence;
  std::vector<double> bin_accuracy;
  double ece = 0.0;
  double resce = 0.0;
};

namespace internal {

template <typename Derived>
void CheckLabels(const Eigen::MatrixBase<Derived>& probs,
                 const LabelVector& labels) {
  if (labels.size() != probs.rows()) {
    throw ValidationError("metrics", "label count " +
                                         std::to_string(labels.size()) +
                                         " does not match " +
                                         std::to_string(probs.rows()) + " rows");
  }
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels(i) < 0 || labels(i) >= probs.cols()) {
      throw ValidationError("metrics", "label " + std::to_string(labels(i)) +
                                           " out of range at row " +
                                           std::to_string(i));
    }
  }
}

}  // namespace internal

/// Index of the largest entry in a row; ties go to the lowest class index.
template <typename Derived>
Eigen::Index ArgMax(const Eigen::MatrixBase<Derived>& row) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < row.size(); ++c) {
    if (row(c) > row(best)) best = c;
  }
  return best;
}

/// Squared Euclidean distance between each row and the one-hot target.
template <typename Derived>
VectorT<typename Derived::Scalar> Brier(const Eigen::MatrixBase<Derived>& probs,
                                        const LabelVector& labels) {
  using Scalar = typename Derived::Scalar;
  internal::CheckLabels(probs, labels);
  VectorT<Scalar> out(probs.rows());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const Scalar sq = probs.row(i).squaredNorm();
    const Scalar py = probs(i, labels(i));
    // ||p - e_y||^2 = ||p||^2 - 2 p_y + 1
    out(i) = sq - Scalar(2) * py + Scalar(1);
  }
  return out;
}

/// Negative log of the true-class probability. `clamp` <= 0 disables clamping.
template <typename Derived>
VectorT<typename Derived::Scalar> Nll(const Eigen::MatrixBase<Derived>& probs,
                                      const LabelVector& labels,
                                      double clamp = kLogClamp) {
  using Scalar = typename Derived::Scalar;
  internal::CheckLabels(probs, labels);
  VectorT<Scalar> out(probs.rows());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Scalar p = probs(i, labels(i));
    if (clamp > 0 && p < Scalar(clamp)) p = Scalar(clamp);
    out(i) = -std::log(p);
  }
  return out;
}

template <typename Derived>
VectorT<typename Derived::Scalar> ZeroOneError(
    const Eigen::MatrixBase<Derived>& probs, const LabelVector& labels) {
  using Scalar = typename Derived::Scalar;
  internal::CheckLabels(probs, labels);
  VectorT<Scalar> out(probs.rows());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    out(i) = ArgMax(probs.row(i)) == labels(i) ? Scalar(0) : Scalar(1);
  }
  return out;
}

/// Shannon entropy in nats with 0 ln 0 = 0.
template <typename Derived>
VectorT<typename Derived::Scalar> Entropy(const Eigen::MatrixBase<Derived>& probs) {
  using Scalar = typename Derived::Scalar;
  VectorT<Scalar> out(probs.rows());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Scalar h(0);
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      const Scalar p = probs(i, c);
      if (p > Scalar(0)) h -= p * std::log(p);
    }
    out(i) = h;
  }
  return out;
}

/// 1 - ||p||^2.
template <typename Derived>
VectorT<typename Derived::Scalar> QuadUncertainty(
    const Eigen::MatrixBase<Derived>& probs) {
  using Scalar = typename Derived::Scalar;
  return (Scalar(1) - probs.rowwise().squaredNorm().array()).matrix();
}

/// Converts a nats-valued vector to bits.
inline VectorXd ToBits(const VectorXd& nats) { return nats / std::log(2.0); }

MetricVector ComputeMetric(MetricKind kind, const ProbMatrix& probs,
                           const LabelVector& labels);

/// Confidence-binned calibration. Confidence is the max row probability and
/// lands in bin ceil(conf * n_bins) over (0, 1].
CalibrationSummary Calibration(const ProbMatrix& probs, const LabelVector& labels,
                               int n_bins = 15);

}  // namespace ensdiv
