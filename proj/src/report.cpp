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

#include "ensdiv/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "ensdiv/core_data.hpp"
#include "ensdiv/types.hpp"

namespace ensdiv {

namespace fs = std::filesystem;

void PrepareOutputDir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) {
      throw ValidationError("report", dir.string() + " exists and is not a directory");
    }
    if (!fs::is_empty(dir) && !force) {
      throw ValidationError("report", "output directory " + dir.string() +
                                          " is not empty (use --force)");
    }
  }
  fs::create_directories(dir);
}

std::string FormatDouble(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const fs::path& path, const std::vector<std::string>& header)
    : out_(path, std::ios::trunc) {
  if (!out_) throw ValidationError("report", "cannot write " + path.string());
  for (const auto& h : header) *this << h;
  EndRow();
}

void CsvWriter::Sep() {
  if (!row_start_) out_ << ',';
  row_start_ = false;
}

CsvWriter& CsvWriter::operator<<(double v) {
  Sep();
  out_ << FormatDouble(v);
  return *this;
}

CsvWriter& CsvWriter::operator<<(long v) {
  Sep();
  out_ << v;
  return *this;
}

CsvWriter& CsvWriter::operator<<(const std::string& v) {
  Sep();
  if (v.find_first_of(",\"\n") != std::string::npos) {
    std::string q = "\"";
    for (char c : v) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    out_ << q << '"';
  } else {
    out_ << v;
  }
  return *this;
}

void CsvWriter::EndRow() {
  out_ << '\n';
  row_start_ = true;
}

nlohmann::ordered_json IndexRunDirectory(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ValidationError("report", "no run directory " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    const fs::path rel = fs::relative(entry.path(), dir);
    if (rel == "index.json" || rel.filename() == "manifest.json") continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  nlohmann::ordered_json index;
  index["command"] = "report";
  index["version"] = kVersion;
  index["run_directory"] = dir.filename().string();
  index["results"] = nlohmann::ordered_json::object();
  for (const auto& rel : files) {
    std::ifstream in(dir / rel);
    try {
      index["results"][rel.generic_string()] = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("report", "malformed result " + rel.string() + ": " + e.what());
    }
  }
  SaveRecord(dir / "index.json", index);
  return index;
}

}  // namespace ensdiv
