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

#include "ensdiv/simulate.hpp"

#include <cmath>
#include <cstdio>

#include "ensdiv/random.hpp"

namespace ensdiv {

namespace {

constexpr int kFeatures = 16;
constexpr double kTeacherScale = 6.0;

struct Teacher {
  Eigen::Matrix<double, kFeatures, 2> proj;
  Eigen::Matrix<double, kFeatures, 1> bias;
  MatrixXd out;  // C x kFeatures

  VectorXd Logits(const Eigen::Vector2d& z) const {
    const Eigen::Matrix<double, kFeatures, 1> h = (proj * z + bias).array().tanh().matrix();
    return kTeacherScale * out * h;
  }
};

Teacher MakeTeacher(int n_classes, Rng& rng) {
  Teacher t;
  for (int j = 0; j < kFeatures; ++j) {
    t.proj(j, 0) = rng.Normal();
    t.proj(j, 1) = rng.Normal();
    t.bias(j) = 0.5 * rng.Normal();
  }
  t.out.resize(n_classes, kFeatures);
  for (int c = 0; c < n_classes; ++c) {
    for (int j = 0; j < kFeatures; ++j) t.out(c, j) = rng.Normal() / std::sqrt(double(kFeatures));
  }
  return t;
}

}  // namespace

SyntheticData Simulate(const SyntheticSpec& spec) {
  if (spec.n_points < 1 || spec.n_classes < 2 || spec.n_models < 1 || spec.group_size < 1) {
    throw ValidationError("simulate", "counts must be >= 1 (classes >= 2)");
  }
  if (spec.member_noise_scale < 0.0 || spec.shift_strength < 0.0) {
    throw ValidationError("simulate", "noise and shift must be >= 0");
  }
  SyntheticData data;
  data.spec = spec;
  Rng teacher_rng = Rng::Stream(spec.seed, 0);
  const Teacher teacher = MakeTeacher(spec.n_classes, teacher_rng);

  const int n_groups = (spec.n_models + spec.group_size - 1) / spec.group_size;
  for (int m = 0; m < spec.n_models; ++m) {
    const int g = m / spec.group_size;
    char id[32];
    std::snprintf(id, sizeof(id), "g%02d_s%02d", g, m % spec.group_size);
    data.model_ids.push_back(id);
    data.groups[id] = "g" + std::to_string(g);
  }

  const std::pair<const char*, double> datasets[] = {{"ind", 0.0}, {"ood", spec.shift_strength}};
  std::uint64_t stream = 1;
  for (const auto& [name, shift] : datasets) {
    Rng rng = Rng::Stream(spec.seed, stream++);
    MatrixXd teacher_logits(spec.n_points, spec.n_classes);
    LabelVector labels(spec.n_points);
    for (int i = 0; i < spec.n_points; ++i) {
      Eigen::Vector2d z(rng.Normal() + shift, rng.Normal());
      teacher_logits.row(i) = teacher.Logits(z).transpose();
      const VectorXd p = Softmax(teacher_logits.row(i)).transpose();
      labels(i) = rng.Categorical(p);
    }
    data.labels[name] = labels;
    for (int m = 0; m < spec.n_models; ++m) {
      const int g = m / spec.group_size;
      const double level = n_groups > 1 ? 0.5 + static_cast<double>(g) / (n_groups - 1) : 1.0;
      const double scale = spec.member_noise_scale * level;
      Rng member_rng = Rng::Stream(spec.seed, 1000 + 1000 * stream + m);
      ProbMatrixT<float> logits(spec.n_points, spec.n_classes);
      for (int i = 0; i < spec.n_points; ++i) {
        for (int c = 0; c < spec.n_classes; ++c) {
          const double noise = scale > 0.0 ? scale * member_rng.Normal() : 0.0;
          logits(i, c) = static_cast<float>(teacher_logits(i, c) + noise);
        }
      }
      data.logits[{data.model_ids[m], name}] = std::move(logits);
    }
  }
  return data;
}

PredictionStore ToStore(const SyntheticData& data) {
  PredictionStore store;
  for (const auto& [name, labels] : data.labels) {
    store.AddDataset({name, labels, data.spec.n_classes, "logits"});
  }
  for (const auto& id : data.model_ids) {
    for (const auto& [name, _] : data.labels) {
      const ProbMatrix logits = data.logits.at({id, name}).cast<double>();
      store.AddPrediction(id, name, Softmax(logits), data.groups.at(id));
    }
  }
  store.AddPair("ind", "ood");
  return store;
}

void WriteSynthetic(const SyntheticData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["datasets"] = nlohmann::ordered_json::array();
  for (const auto& [name, labels] : data.labels) {
    const std::string file = "labels_" + name + ".i32";
    std::vector<std::int32_t> raw(labels.data(), labels.data() + labels.size());
    WriteInt32File(dir / file, raw);
    manifest["datasets"].push_back({{"id", name},
                                    {"n", labels.size()},
                                    {"c", data.spec.n_classes},
                                    {"labels_file", file},
                                    {"kind", "logits"}});
  }
  manifest["models"] = nlohmann::ordered_json::array();
  for (const auto& id : data.model_ids) {
    nlohmann::ordered_json files = nlohmann::ordered_json::object();
    for (const auto& [name, _] : data.labels) {
      const auto& m = data.logits.at({id, name});
      const std::string file = id + "__" + name + ".f32";
      WriteFloat32File(dir / file, std::span<const float>(m.data(), m.size()));
      files[name] = file;
    }
    manifest["models"].push_back({{"id", id}, {"group", data.groups.at(id)}, {"files", files}});
  }
  manifest["pairs"] = nlohmann::ordered_json::array({nlohmann::ordered_json::array({"ind", "ood"})});
  SaveRecord(dir / "manifest.json", manifest);
}

}  // namespace ensdiv
