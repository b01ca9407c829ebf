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

#include <algorithm>
#include <cmath>
#include <span>
#include <string_view>
#include <vector>

#include "ensdiv/core_data.hpp"
#include "ensdiv/metrics.hpp"
#include "ensdiv/types.hpp"

namespace ensdiv {

enum class DecompositionFamily { kQuadraticVariance, kEntropyJsd, kBrierGap, kNllGap };

std::string_view FamilyName(DecompositionFamily family);

/// Per-point decomposition. For the uncertainty families
/// total = diversity + avg_member; for the score-gap families `total` is the
/// ensemble score and avg_member = total + diversity.
template <typename Scalar>
struct DecompositionRecordT {
  DecompositionFamily family;
  VectorT<Scalar> total;
  VectorT<Scalar> diversity;
  VectorT<Scalar> avg_member;
  /// Largest disagreement between the two JSD formulas (entropy family only).
  Scalar kl_crosscheck = Scalar(0);

  bool IsGapFamily() const {
    return family == DecompositionFamily::kBrierGap ||
           family == DecompositionFamily::kNllGap;
  }

  VectorT<Scalar> Residual() const {
    if (IsGapFamily()) return (avg_member - total - diversity).eval();
    return (total - diversity - avg_member).eval();
  }

  Scalar MaxAbsResidual() const {
    return total.size() ? Residual().cwiseAbs().maxCoeff() : Scalar(0);
  }
};

using DecompositionRecord = DecompositionRecordT<double>;

namespace internal {

template <typename Scalar>
void CheckMembers(std::span<const ProbMatrixT<Scalar>> members) {
  if (members.size() < 2) {
    throw ValidationError("decomposition", "need at least 2 ensemble members");
  }
  CheckSameShape(members);
}

template <typename Scalar, typename Fn>
VectorT<Scalar> MemberMean(std::span<const ProbMatrixT<Scalar>> members, Fn&& fn) {
  VectorT<Scalar> acc = VectorT<Scalar>::Zero(members.front().rows());
  for (const auto& m : members) acc += fn(m);
  return acc / Scalar(members.size());
}

}  // namespace internal

/// Sum over classes of the population (1/M) variance across members.
template <typename Scalar>
VectorT<Scalar> VarianceDiversity(std::span<const ProbMatrixT<Scalar>> members) {
  internal::CheckMembers(members);
  const ProbMatrixT<Scalar> mean = FormEnsemble(members);
  VectorT<Scalar> out = VectorT<Scalar>::Zero(mean.rows());
  for (const auto& m : members) out += (m - mean).rowwise().squaredNorm();
  return out / Scalar(members.size());
}

/// Entropy of the mean minus mean member entropy.
template <typename Scalar>
VectorT<Scalar> JsdDiversity(std::span<const ProbMatrixT<Scalar>> members) {
  internal::CheckMembers(members);
  const VectorT<Scalar> mean_h = internal::MemberMean(
      members, [](const ProbMatrixT<Scalar>& m) { return Entropy(m); });
  return Entropy(FormEnsemble(members)) - mean_h;
}

/// Mean over members of KL(member || ensemble); equals the JSD.
template <typename Scalar>
VectorT<Scalar> MeanKlToEnsemble(std::span<const ProbMatrixT<Scalar>> members) {
  internal::CheckMembers(members);
  const ProbMatrixT<Scalar> mean = FormEnsemble(members);
  VectorT<Scalar> out = VectorT<Scalar>::Zero(mean.rows());
  for (const auto& m : members) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      Scalar kl(0);
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const Scalar p = m(i, c);
        if (p > Scalar(0)) kl += p * std::log(p / mean(i, c));
      }
      out(i) += kl;
    }
  }
  return out / Scalar(members.size());
}

template <typename Scalar>
DecompositionRecordT<Scalar> DecomposeQuadratic(
    std::span<const ProbMatrixT<Scalar>> members) {
  internal::CheckMembers(members);
  DecompositionRecordT<Scalar> rec{DecompositionFamily::kQuadraticVariance, {}, {}, {}};
  rec.total = QuadUncertainty(FormEnsemble(members));
  rec.diversity = VarianceDiversity(members);
  rec.avg_member = internal::MemberMean(
      members, [](const ProbMatrixT<Scalar>& m) { return QuadUncertainty(m); });
  return rec;
}

template <typename Scalar>
DecompositionRecordT<Scalar> DecomposeEntropy(
    std::span<const ProbMatrixT<Scalar>> members) {
  internal::CheckMembers(members);
  DecompositionRecordT<Scalar> rec{DecompositionFamily::kEntropyJsd, {}, {}, {}};
  rec.total = Entropy(FormEnsemble(members));
  rec.avg_member = internal::MemberMean(
      members, [](const ProbMatrixT<Scalar>& m) { return Entropy(m); });
  rec.diversity = rec.total - rec.avg_member;
  const VectorT<Scalar> kl = MeanKlToEnsemble(members);
  rec.kl_crosscheck =
      kl.size() ? (kl - rec.diversity).cwiseAbs().maxCoeff() : Scalar(0);
  return rec;
}

/// Mean member Brier minus ensemble Brier, which equals the variance diversity.
template <typename Scalar>
DecompositionRecordT<Scalar> BrierJensenGap(
    std::span<const ProbMatrixT<Scalar>> members, const LabelVector& labels) {
  internal::CheckMembers(members);
  DecompositionRecordT<Scalar> rec{DecompositionFamily::kBrierGap, {}, {}, {}};
  rec.total = Brier(FormEnsemble(members), labels);
  rec.diversity = VarianceDiversity(members);
  rec.avg_member = internal::MemberMean(
      members, [&](const ProbMatrixT<Scalar>& m) { return Brier(m, labels); });
  return rec;
}

/// Mean member NLL minus ensemble NLL, paired with KL(Uniform(M) || Q) where Q
/// normalizes the members' true-class likelihoods. Member likelihoods are
/// clamped at `clamp` (disabled when <= 0) and the ensemble likelihood is the
/// mean of the clamped values so the identity stays exact.
template <typename Scalar>
DecompositionRecordT<Scalar> NllJensenGap(std::span<const ProbMatrixT<Scalar>> members,
                                          const LabelVector& labels,
                                          double clamp = kLogClamp) {
  internal::CheckMembers(members);
  internal::CheckLabels(members.front(), labels);
  const Eigen::Index n = labels.size();
  const Scalar m_count = Scalar(members.size());
  DecompositionRecordT<Scalar> rec{DecompositionFamily::kNllGap,
                                   VectorT<Scalar>(n), VectorT<Scalar>(n),
                                   VectorT<Scalar>(n)};
  std::vector<Scalar> lik(members.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar sum(0), mean_nll(0);
    for (std::size_t k = 0; k < members.size(); ++k) {
      Scalar p = members[k](i, labels(i));
      if (clamp > 0 && p < Scalar(clamp)) p = Scalar(clamp);
      lik[k] = p;
      sum += p;
      mean_nll -= std::log(p);
    }
    mean_nll /= m_count;
    Scalar kl(0);
    for (const Scalar p : lik) {
      const Scalar q = p / sum;
      kl += std::log((Scalar(1) / m_count) / q);
    }
    rec.total(i) = -std::log(sum / m_count);
    rec.avg_member(i) = mean_nll;
    rec.diversity(i) = kl / m_count;
  }
  return rec;
}

template <typename Scalar>
DecompositionRecordT<Scalar> Decompose(DecompositionFamily family,
                                       std::span<const ProbMatrixT<Scalar>> members,
                                       const LabelVector& labels) {
  switch (family) {
    case DecompositionFamily::kQuadraticVariance:
      return DecomposeQuadratic(members);
    case DecompositionFamily::kEntropyJsd:
      return DecomposeEntropy(members);
    case DecompositionFamily::kBrierGap:
      return BrierJensenGap(members, labels);
    case DecompositionFamily::kNllGap:
      return NllJensenGap(members, labels);
  }
  throw ValidationError("decomposition", "unknown family");
}

/// Equal-width histogram over [lo, hi]; values outside are clamped to the
/// end cells.
struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<long> counts;

  double CellWidth() const { return (hi - lo) / static_cast<double>(counts.size()); }
  double CellCenter(std::size_t i) const { return lo + (static_cast<double>(i) + 0.5) * CellWidth(); }
};

/// Upper end of the per-point uncertainty range for a C-class problem.
double UncertaintyRangeMax(DecompositionFamily family, Eigen::Index n_classes);

/// Histogram of per-point average member uncertainty on 100 cells spanning
/// the family's range.
Histogram MarginalAvgUncertainty(const VectorXd& avg_member, DecompositionFamily family,
                                 Eigen::Index n_classes, int n_cells = 100);

}  // namespace ensdiv
