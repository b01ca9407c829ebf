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

#include "ensdiv/core_data.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <numeric>

#include "ensdiv/metrics.hpp"
#include "ensdiv/random.hpp"

namespace ensdiv {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "binary prediction files are little-endian");

std::vector<EnsembleDef> EnumerateHomogeneousEnsembles(
    const std::vector<std::string>& model_ids, int size) {
  const int n = static_cast<int>(model_ids.size());
  if (size < 1 || size > n) {
    throw ValidationError("core_data", "ensemble size " + std::to_string(size) +
                                           " invalid for " + std::to_string(n) + " models");
  }
  std::vector<EnsembleDef> out;
  std::vector<int> idx(size);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    EnsembleDef def;
    for (int i : idx) def.member_model_ids.push_back(model_ids[i]);
    def.ensemble_id = "ens";
    for (const auto& id : def.member_model_ids) def.ensemble_id += "+" + id;
    out.push_back(std::move(def));
    int pos = size - 1;
    while (pos >= 0 && idx[pos] == n - size + pos) --pos;
    if (pos < 0) break;
    ++idx[pos];
    for (int j = pos + 1; j < size; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

void PredictionStore::AddDataset(DatasetInfo info) {
  if (info.n_classes < 2) {
    throw ValidationError("core_data", "dataset '" + info.id + "' needs at least 2 classes");
  }
  for (Eigen::Index i = 0; i < info.labels.size(); ++i) {
    if (info.labels(i) < 0 || info.labels(i) >= info.n_classes) {
      throw ValidationError("core_data", "dataset '" + info.id + "' label " +
                                             std::to_string(info.labels(i)) +
                                             " out of range at index " + std::to_string(i));
    }
  }
  const std::string id = info.id;
  if (!datasets_.emplace(id, std::move(info)).second) {
    throw ValidationError("core_data", "duplicate dataset '" + id + "'");
  }
}

void PredictionStore::AddPrediction(const std::string& model_id, const std::string& dataset_id,
                                    ProbMatrix probs, const std::string& group) {
  const DatasetInfo& ds = Dataset(dataset_id);
  if (probs.rows() != ds.labels.size() || probs.cols() != ds.n_classes) {
    throw ValidationError("core_data", "prediction for model '" + model_id + "' on '" +
                                           dataset_id + "' has shape " +
                                           std::to_string(probs.rows()) + "x" +
                                           std::to_string(probs.cols()) + ", expected " +
                                           std::to_string(ds.labels.size()) + "x" +
                                           std::to_string(ds.n_classes));
  }
  auto key = std::make_pair(model_id, dataset_id);
  if (predictions_.count(key)) {
    throw ValidationError("core_data", "duplicate prediction (" + model_id + ", " +
                                           dataset_id + ")");
  }
  predictions_.emplace(std::move(key), std::move(probs));
  if (groups_.emplace(model_id, group).second) model_order_.push_back(model_id);
}

void PredictionStore::AddPair(const std::string& ind_id, const std::string& ood_id) {
  Dataset(ind_id);
  Dataset(ood_id);
  pairs_.emplace_back(ind_id, ood_id);
}

bool PredictionStore::HasPrediction(const std::string& model_id,
                                    const std::string& dataset_id) const {
  return predictions_.count({model_id, dataset_id}) > 0;
}

const DatasetInfo& PredictionStore::Dataset(const std::string& id) const {
  auto it = datasets_.find(id);
  if (it == datasets_.end()) throw ValidationError("core_data", "unknown dataset '" + id + "'");
  return it->second;
}

const ProbMatrix& PredictionStore::Probs(const std::string& model_id,
                                         const std::string& dataset_id) const {
  auto it = predictions_.find({model_id, dataset_id});
  if (it == predictions_.end()) {
    throw ValidationError("core_data", "no prediction for model '" + model_id +
                                           "' on dataset '" + dataset_id + "'");
  }
  return it->second;
}

const std::string& PredictionStore::Group(const std::string& model_id) const {
  auto it = groups_.find(model_id);
  if (it == groups_.end()) throw ValidationError("core_data", "unknown model '" + model_id + "'");
  return it->second;
}

std::vector<std::string> PredictionStore::DatasetIds() const {
  std::vector<std::string> ids;
  for (const auto& [id, _] : datasets_) ids.push_back(id);
  return ids;
}

std::vector<ProbMatrix> PredictionStore::MemberProbs(const EnsembleDef& def,
                                                     const std::string& dataset_id) const {
  std::vector<ProbMatrix> out;
  out.reserve(def.member_model_ids.size());
  for (const auto& id : def.member_model_ids) out.push_back(Probs(id, dataset_id));
  return out;
}

ProbMatrix PredictionStore::EnsembleProbs(const EnsembleDef& def,
                                          const std::string& dataset_id) const {
  if (def.member_model_ids.size() < 2) {
    throw ValidationError("core_data", "ensemble '" + def.ensemble_id + "' needs 2+ members");
  }
  return FormEnsemble(MemberProbs(def, dataset_id));
}

HeterogeneousEnsembles FormHeterogeneousEnsembles(const PredictionStore& store,
                                                  const std::string& ind_dataset,
                                                  int n_bins, int members_per_ensemble,
                                                  std::uint64_t seed) {
  if (n_bins < 1) throw ValidationError("core_data", "n_bins must be >= 1");
  if (members_per_ensemble < 2) {
    throw ValidationError("core_data", "members_per_ensemble must be >= 2");
  }
  const DatasetInfo& ds = store.Dataset(ind_dataset);
  std::vector<std::string> ids;
  std::vector<double> acc;
  for (const auto& id : store.ModelIds()) {
    if (!store.HasPrediction(id, ind_dataset)) continue;
    ids.push_back(id);
    acc.push_back(1.0 - ZeroOneError(store.Probs(id, ind_dataset), ds.labels).mean());
  }
  HeterogeneousEnsembles out;
  if (ids.empty()) return out;
  const double lo = *std::min_element(acc.begin(), acc.end());
  const double hi = *std::max_element(acc.begin(), acc.end());
  const double width = (hi - lo) / n_bins;
  for (int b = 0; b <= n_bins; ++b) out.bin_edges.push_back(lo + b * width);

  std::vector<std::vector<std::string>> bins(n_bins);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    int b = width > 0 ? static_cast<int>((acc[k] - lo) / width) : 0;
    bins[std::clamp(b, 0, n_bins - 1)].push_back(ids[k]);
  }
  Rng rng(seed);
  for (int b = 0; b < n_bins; ++b) {
    auto& members = bins[b];
    if (members.empty()) continue;
    if (static_cast<int>(members.size()) < members_per_ensemble) {
      out.warnings.push_back("bin " + std::to_string(b) + " has " +
                             std::to_string(members.size()) + " models (< " +
                             std::to_string(members_per_ensemble) + "), skipped");
      continue;
    }
    for (int k = 0; k < members_per_ensemble; ++k) {
      const std::size_t j = k + static_cast<std::size_t>(rng.Index(members.size() - k));
      std::swap(members[k], members[j]);
    }
    EnsembleDef def;
    def.member_model_ids.assign(members.begin(), members.begin() + members_per_ensemble);
    def.ensemble_id = "het_bin" + std::to_string(b);
    out.ensembles.push_back(std::move(def));
  }
  return out;
}

ProbMatrix NormalizeProbRows(ProbMatrix probs, double tolerance, const std::string& context) {
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const bool in_range = probs.row(i).allFinite() && (probs.row(i).array() >= 0.0).all() &&
                          (probs.row(i).array() <= 1.0 + tolerance).all();
    const double sum = probs.row(i).sum();
    if (!in_range || std::abs(sum - 1.0) > tolerance) {
      throw ValidationError("core_data", context + ": row " + std::to_string(i) +
                                             " is not a probability vector (sum " +
                                             std::to_string(sum) + ")");
    }
    // Rows already stochastic to double precision are left untouched so
    // float64 round trips stay bit-identical.
    if (std::abs(sum - 1.0) > 1e-12) probs.row(i) /= sum;
  }
  return probs;
}

namespace {

template <typename T>
std::vector<T> ReadRaw(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("core_data", "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (bytes % sizeof(T) != 0) {
    throw ValidationError("core_data", path.string() + ": byte count " +
                                           std::to_string(bytes) + " not a multiple of " +
                                           std::to_string(sizeof(T)));
  }
  std::vector<T> out(bytes / sizeof(T));
  in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
  return out;
}

template <typename T>
void WriteRaw(const fs::path& path, std::span<const T> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("core_data", "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size_bytes()));
}

ProbMatrix ReadMatrix(const fs::path& path, const DatasetInfo& ds, const std::string& dtype,
                      const std::string& model_id) {
  const std::size_t expected = static_cast<std::size_t>(ds.labels.size()) * ds.n_classes;
  ProbMatrix m(ds.labels.size(), ds.n_classes);
  if (dtype == "float32") {
    const auto raw = ReadFloat32File(path);
    if (raw.size() != expected) {
      throw ValidationError("core_data", "model '" + model_id + "' on '" + ds.id + "': " +
                                             std::to_string(raw.size() * 4) +
                                             " bytes, expected " + std::to_string(expected * 4));
    }
    for (std::size_t k = 0; k < expected; ++k) m.data()[k] = raw[k];
  } else if (dtype == "float64") {
    const auto raw = ReadFloat64File(path);
    if (raw.size() != expected) {
      throw ValidationError("core_data", "model '" + model_id + "' on '" + ds.id + "': " +
                                             std::to_string(raw.size() * 8) +
                                             " bytes, expected " + std::to_string(expected * 8));
    }
    std::copy(raw.begin(), raw.end(), m.data());
  } else {
    throw ValidationError("core_data", "unknown dtype '" + dtype + "'");
  }
  return m;
}

}  // namespace

std::vector<float> ReadFloat32File(const fs::path& path) { return ReadRaw<float>(path); }
std::vector<double> ReadFloat64File(const fs::path& path) { return ReadRaw<double>(path); }
std::vector<std::int32_t> ReadInt32File(const fs::path& path) {
  return ReadRaw<std::int32_t>(path);
}
void WriteFloat32File(const fs::path& path, std::span<const float> values) {
  WriteRaw(path, values);
}
void WriteFloat64File(const fs::path& path, std::span<const double> values) {
  WriteRaw(path, values);
}
void WriteInt32File(const fs::path& path, std::span<const std::int32_t> values) {
  WriteRaw(path, values);
}

PredictionStore LoadStore(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw ValidationError("core_data", "cannot open manifest " + manifest_path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw ValidationError("core_data", "malformed manifest: " + std::string(e.what()));
  }
  const fs::path base = manifest_path.parent_path();
  PredictionStore store;
  std::map<std::string, std::string> dtypes;
  try {
    for (const auto& d : manifest.at("datasets")) {
      DatasetInfo info;
      info.id = d.at("id").get<std::string>();
      const long n = d.at("n").get<long>();
      info.n_classes = d.at("c").get<int>();
      info.kind = d.value("kind", std::string("probs"));
      if (info.kind != "probs" && info.kind != "logits") {
        throw ValidationError("core_data", "dataset '" + info.id + "' has unknown kind '" +
                                               info.kind + "'");
      }
      dtypes[info.id] = d.value("dtype", std::string("float32"));
      const auto labels = ReadInt32File(base / d.at("labels_file").get<std::string>());
      if (static_cast<long>(labels.size()) != n) {
        throw ValidationError("core_data", "dataset '" + info.id + "': labels file has " +
                                               std::to_string(labels.size()) +
                                               " entries, expected " + std::to_string(n));
      }
      info.labels = Eigen::Map<const Eigen::VectorXi>(labels.data(), n);
      store.AddDataset(std::move(info));
    }
    for (const auto& m : manifest.at("models")) {
      const std::string id = m.at("id").get<std::string>();
      const std::string group = m.value("group", std::string());
      for (const auto& [dataset_id, file] : m.at("files").items()) {
        const DatasetInfo& ds = store.Dataset(dataset_id);
        ProbMatrix raw = ReadMatrix(base / file.get<std::string>(), ds, dtypes[dataset_id], id);
        ProbMatrix probs = ds.kind == "logits"
                               ? Softmax(raw)
                               : NormalizeProbRows(std::move(raw), 1e-6,
                                                   "model '" + id + "' on '" + dataset_id + "'");
        store.AddPrediction(id, dataset_id, std::move(probs), group);
      }
    }
    if (manifest.contains("pairs")) {
      for (const auto& p : manifest.at("pairs")) {
        store.AddPair(p.at(0).get<std::string>(), p.at(1).get<std::string>());
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError("core_data", "manifest schema: " + std::string(e.what()));
  }
  return store;
}

void SaveStore(const PredictionStore& store, const fs::path& dir, const std::string& dtype) {
  if (dtype != "float32" && dtype != "float64") {
    throw ValidationError("core_data", "unknown dtype '" + dtype + "'");
  }
  fs::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["datasets"] = json::array();
  for (const auto& id : store.DatasetIds()) {
    const DatasetInfo& ds = store.Dataset(id);
    const std::string labels_file = "labels_" + id + ".i32";
    std::vector<std::int32_t> labels(ds.labels.data(), ds.labels.data() + ds.labels.size());
    WriteInt32File(dir / labels_file, labels);
    manifest["datasets"].push_back({{"id", id},
                                    {"n", ds.labels.size()},
                                    {"c", ds.n_classes},
                                    {"labels_file", labels_file},
                                    {"kind", "probs"},
                                    {"dtype", dtype}});
  }
  manifest["models"] = json::array();
  for (const auto& model_id : store.ModelIds()) {
    nlohmann::ordered_json files = nlohmann::ordered_json::object();
    for (const auto& dataset_id : store.DatasetIds()) {
      if (!store.HasPrediction(model_id, dataset_id)) continue;
      const ProbMatrix& p = store.Probs(model_id, dataset_id);
      const std::string file = model_id + "__" + dataset_id +
                               (dtype == "float32" ? ".f32" : ".f64");
      if (dtype == "float32") {
        std::vector<float> v(p.data(), p.data() + p.size());
        WriteFloat32File(dir / file, v);
      } else {
        WriteFloat64File(dir / file, std::span<const double>(p.data(), p.size()));
      }
      files[dataset_id] = file;
    }
    nlohmann::ordered_json entry = {{"id", model_id}};
    if (!store.Group(model_id).empty()) entry["group"] = store.Group(model_id);
    entry["files"] = files;
    manifest["models"].push_back(entry);
  }
  manifest["pairs"] = json::array();
  for (const auto& [a, b] : store.Pairs()) manifest["pairs"].push_back({a, b});
  SaveRecord(dir / "manifest.json", manifest);
}

void SaveRecord(const fs::path& path, const nlohmann::ordered_json& record) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("core_data", "cannot write " + path.string());
  out << record.dump(2) << "\n";
}

}  // namespace ensdiv
