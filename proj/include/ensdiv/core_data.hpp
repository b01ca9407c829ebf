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
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ensdiv/types.hpp"

namespace ensdiv {

/// Row-wise softmax with the row max subtracted before exponentiation.
template <typename Derived>
ProbMatrixT<typename Derived::Scalar> Softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  ProbMatrixT<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    if (!logits.row(i).allFinite()) {
      throw ValidationError("core_data", "non-finite logit in row " + std::to_string(i));
    }
    const Scalar mx = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - mx).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

template <typename Scalar>
void CheckSameShape(std::span<const ProbMatrixT<Scalar>> members) {
  if (members.empty()) throw ValidationError("core_data", "no ensemble members");
  for (const auto& m : members) {
    if (m.rows() != members.front().rows() || m.cols() != members.front().cols()) {
      throw ValidationError("core_data", "member shape mismatch: " +
                                             std::to_string(m.rows()) + "x" +
                                             std::to_string(m.cols()) + " vs " +
                                             std::to_string(members.front().rows()) +
                                             "x" + std::to_string(members.front().cols()));
    }
  }
}

/// Probability-averaged ensemble prediction.
template <typename Scalar>
ProbMatrixT<Scalar> FormEnsemble(std::span<const ProbMatrixT<Scalar>> members) {
  CheckSameShape(members);
  ProbMatrixT<Scalar> acc = members.front();
  for (std::size_t k = 1; k < members.size(); ++k) acc += members[k];
  return acc / Scalar(members.size());
}

template <typename Scalar>
ProbMatrixT<Scalar> FormEnsemble(const std::vector<ProbMatrixT<Scalar>>& members) {
  return FormEnsemble(std::span<const ProbMatrixT<Scalar>>(members));
}

struct EnsembleDef {
  std::string ensemble_id;
  std::vector<std::string> member_model_ids;
};

/// All k-subsets of `model_ids` in lexicographic index order.
std::vector<EnsembleDef> EnumerateHomogeneousEnsembles(
    const std::vector<std::string>& model_ids, int size);

struct DatasetInfo {
  std::string id;
  LabelVector labels;
  int n_classes = 0;
  std::string kind = "probs";
};

/// Predictions keyed by (model, dataset) plus per-dataset labels. Immutable
/// once loaded; concurrent readers need no locking.
class PredictionStore {
 public:
  void AddDataset(DatasetInfo info);
  void AddPrediction(const std::string& model_id, const std::string& dataset_id,
                     ProbMatrix probs, const std::string& group = "");
  void AddPair(const std::string& ind_id, const std::string& ood_id);

  bool HasDataset(const std::string& id) const { return datasets_.count(id) > 0; }
  bool HasModel(const std::string& id) const { return groups_.count(id) > 0; }
  bool HasPrediction(const std::string& model_id, const std::string& dataset_id) const;

  const DatasetInfo& Dataset(const std::string& id) const;
  const ProbMatrix& Probs(const std::string& model_id, const std::string& dataset_id) const;
  const std::string& Group(const std::string& model_id) const;

  /// Models in insertion order.
  const std::vector<std::string>& ModelIds() const { return model_order_; }
  std::vector<std::string> DatasetIds() const;
  const std::vector<std::pair<std::string, std::string>>& Pairs() const { return pairs_; }

  std::vector<ProbMatrix> MemberProbs(const EnsembleDef& def,
                                      const std::string& dataset_id) const;
  ProbMatrix EnsembleProbs(const EnsembleDef& def, const std::string& dataset_id) const;

 private:
  std::map<std::string, DatasetInfo> datasets_;
  std::map<std::pair<std::string, std::string>, ProbMatrix> predictions_;
  std::map<std::string, std::string> groups_;
  std::vector<std::string> model_order_;
  std::vector<std::pair<std::string, std::string>> pairs_;
};

struct HeterogeneousEnsembles {
  std::vector<EnsembleDef> ensembles;
  /// Bin edges over InD accuracy, n_bins + 1 entries.
  std::vector<double> bin_edges;
  std::vector<std::string> warnings;
};

/// Bins models by InD accuracy into equal-width bins over [min, max] and
/// samples `members_per_ensemble` models without replacement from each bin.
HeterogeneousEnsembles FormHeterogeneousEnsembles(const PredictionStore& store,
                                                  const std::string& ind_dataset,
                                                  int n_bins, int members_per_ensemble,
                                                  std::uint64_t seed);

/// Rows within `tolerance` of summing to 1 are renormalized; others are
/// rejected with the offending row index.
ProbMatrix NormalizeProbRows(ProbMatrix probs, double tolerance, const std::string& context);

PredictionStore LoadStore(const std::filesystem::path& manifest_path);

/// Writes the store as a manifest plus binary files. `dtype` is "float32"
/// (the default interchange format) or "float64" (lossless).
void SaveStore(const PredictionStore& store, const std::filesystem::path& dir,
               const std::string& dtype = "float64");

void SaveRecord(const std::filesystem::path& path, const nlohmann::ordered_json& record);

/// Raw little-endian readers/writers used by the manifest format.
std::vector<float> ReadFloat32File(const std::filesystem::path& path);
std::vector<double> ReadFloat64File(const std::filesystem::path& path);
std::vector<std::int32_t> ReadInt32File(const std::filesystem::path& path);
void WriteFloat32File(const std::filesystem::path& path, std::span<const float> values);
void WriteFloat64File(const std::filesystem::path& path, std::span<const double> values);
void WriteInt32File(const std::filesystem::path& path, std::span<const std::int32_t> values);

}  // namespace ensdiv
