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

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ensdiv {

/// Minimal static SVG chart: one panel with linear axes, scatter layers,
/// polylines and a legend.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label);

  void Scatter(const std::vector<double>& x, const std::vector<double>& y, const std::string& color,
               const std::string& label, double radius = 2.0, double opacity = 0.5);
  /// Per-point colors (e.g. from ColorMap).
  void ScatterColored(const std::vector<double>& x, const std::vector<double>& y,
                      const std::vector<std::string>& colors, double radius = 2.0);
  void Line(const std::vector<double>& x, const std::vector<double>& y, const std::string& color,
            const std::string& label, bool dashed = false);
  /// Fixes axis limits instead of fitting them to the data.
  void SetLimits(double x_lo, double x_hi, double y_lo, double y_hi);

  std::string Render(const std::optional<std::string>& timestamp) const;
  void Save(const std::filesystem::path& path, bool with_timestamp) const;

 private:
  struct Layer {
    std::vector<double> x, y;
    std::vector<std::string> colors;
    std::string color, label;
    double radius = 2.0, opacity = 0.5;
    bool line = false, dashed = false;
  };
  std::string title_, x_label_, y_label_;
  std::vector<Layer> layers_;
  std::optional<std::array<double, 4>> limits_;
};

/// Blue-to-red color ramp for t in [0, 1].
std::string ColorMap(double t);

/// Current UTC time, ISO-8601.
std::string UtcTimestamp();

/// Side-by-side composition of already rendered panels.
std::string ComposePanels(const std::vector<std::string>& panels);

}  // namespace ensdiv
