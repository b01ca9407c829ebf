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

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace ensdiv {

inline constexpr const char* kVersion = "0.1.0";

/// Creates `dir`; refuses a non-empty existing directory unless `force`.
void PrepareOutputDir(const std::filesystem::path& dir, bool force);

/// CSV writer with round-trip double formatting.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  CsvWriter& operator<<(double v);
  CsvWriter& operator<<(long v);
  CsvWriter& operator<<(int v) { return *this << static_cast<long>(v); }
  CsvWriter& operator<<(const std::string& v);
  CsvWriter& operator<<(const char* v) { return *this << std::string(v); }
  void EndRow();

 private:
  void Sep();
  std::ofstream out_;
  bool row_start_ = true;
};

/// Shortest representation that parses back to the same double.
std::string FormatDouble(double v);

/// Collects every JSON result file under `dir` (except the index itself) into
/// `dir/index.json`, keyed by relative path in sorted order.
nlohmann::ordered_json IndexRunDirectory(const std::filesystem::path& dir);

}  // namespace ensdiv
