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
#include <filesystem>
#include <map>
#include <string>
#include <utility>

#include "ensdiv/core_data.hpp"

namespace ensdiv {

struct SyntheticSpec {
  int n_points = 1000;
  int n_classes = 10;
  int n_models = 20;
  double member_noise_scale = 1.0;
  /// OOD inputs are translated by this amount along the first latent axis.
  double shift_strength = 0.0;
  std::uint64_t seed = 0;
  /// Consecutive models share a group ("architecture") and a noise level.
  int group_size = 5;
};

/// Logit dumps for datasets "ind" and "ood" plus labels, stored as float32 to
/// match the on-disk format.
struct SyntheticData {
  SyntheticSpec spec;
  std::map<std::string, LabelVector> labels;
  /// (model_id, dataset_id) -> N x C logits.
  std::map<std::pair<std::string, std::string>, ProbMatrixT<float>> logits;
  std::vector<std::string> model_ids;
  std::map<std::string, std::string> groups;
};

/// A random-feature teacher maps 2-D latent inputs to class logits; labels are
/// drawn from the teacher softmax and each member adds Gaussian logit noise
/// scaled by member_noise_scale times its group's level.
SyntheticData Simulate(const SyntheticSpec& spec);

PredictionStore ToStore(const SyntheticData& data);

/// Writes the manifest (kind "logits", float32) and binary files to `dir`.
void WriteSynthetic(const SyntheticData& data, const std::filesystem::path& dir);

}  // namespace ensdiv
