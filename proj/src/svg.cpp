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

#include "ensdiv/svg.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>

#include "ensdiv/types.hpp"

namespace ensdiv {

namespace {

constexpr double kWidth = 640, kHeight = 480;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 55;

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string Tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

SvgPlot::SvgPlot(std::string title, std::string x_label, std::string y_label)
    : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

void SvgPlot::Scatter(const std::vector<double>& x, const std::vector<double>& y,
                      const std::string& color, const std::string& label, double radius,
                      double opacity) {
  Layer l;
  l.x = x;
  l.y = y;
  l.color = color;
  l.label = label;
  l.radius = radius;
  l.opacity = opacity;
  layers_.push_back(std::move(l));
}

void SvgPlot::ScatterColored(const std::vector<double>& x, const std::vector<double>& y,
                             const std::vector<std::string>& colors, double radius) {
  Layer l;
  l.x = x;
  l.y = y;
  l.colors = colors;
  l.radius = radius;
  l.opacity = 0.7;
  layers_.push_back(std::move(l));
}

void SvgPlot::Line(const std::vector<double>& x, const std::vector<double>& y,
                   const std::string& color, const std::string& label, bool dashed) {
  Layer l;
  l.x = x;
  l.y = y;
  l.color = color;
  l.label = label;
  l.line = true;
  l.dashed = dashed;
  layers_.push_back(std::move(l));
}

void SvgPlot::SetLimits(double x_lo, double x_hi, double y_lo, double y_hi) {
  limits_ = std::array<double, 4>{x_lo, x_hi, y_lo, y_hi};
}

std::string SvgPlot::Render(const std::optional<std::string>& timestamp) const {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  if (limits_) {
    x0 = (*limits_)[0], x1 = (*limits_)[1], y0 = (*limits_)[2], y1 = (*limits_)[3];
  } else {
    for (const auto& l : layers_) {
      for (std::size_t i = 0; i < l.x.size(); ++i) {
        if (!std::isfinite(l.x[i]) || !std::isfinite(l.y[i])) continue;
        x0 = std::min(x0, l.x[i]), x1 = std::max(x1, l.x[i]);
        y0 = std::min(y0, l.y[i]), y1 = std::max(y1, l.y[i]);
      }
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    const double px = (x1 - x0) * 0.05 + 1e-12, py = (y1 - y0) * 0.05 + 1e-12;
    x0 -= px, x1 += px, y0 -= py, y1 += py;
  }
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto sx = [&](double v) { return kLeft + (v - x0) / (x1 - x0) * pw; };
  auto sy = [&](double v) { return kTop + ph - (v - y0) / (y1 - y0) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
     << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  if (timestamp) os << "<!-- generated " << *timestamp << " -->\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
     << Escape(title_) << "</text>\n";
  os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = x0 + (x1 - x0) * t / 4.0, yv = y0 + (y1 - y0) * t / 4.0;
    os << "<text x=\"" << Num(sx(xv)) << "\" y=\"" << Num(kTop + ph + 16)
       << "\" text-anchor=\"middle\">" << Tick(xv) << "</text>\n";
    os << "<text x=\"" << Num(kLeft - 6) << "\" y=\"" << Num(sy(yv) + 4)
       << "\" text-anchor=\"end\">" << Tick(yv) << "</text>\n";
  }
  os << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 12
     << "\" text-anchor=\"middle\">" << Escape(x_label_) << "</text>\n";
  os << "<text transform=\"translate(16," << kTop + ph / 2
     << ") rotate(-90)\" text-anchor=\"middle\">" << Escape(y_label_) << "</text>\n";
  os << "<clipPath id=\"plot\"><rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw
     << "\" height=\"" << ph << "\"/></clipPath>\n<g clip-path=\"url(#plot)\">\n";
  for (const auto& l : layers_) {
    if (l.line) {
      os << "<polyline fill=\"none\" stroke=\"" << l.color << "\" stroke-width=\"2\""
         << (l.dashed ? " stroke-dasharray=\"6,4\"" : "") << " points=\"";
      for (std::size_t i = 0; i < l.x.size(); ++i) {
        if (!std::isfinite(l.x[i]) || !std::isfinite(l.y[i])) continue;
        os << Num(sx(l.x[i])) << "," << Num(sy(l.y[i])) << " ";
      }
      os << "\"/>\n";
      continue;
    }
    for (std::size_t i = 0; i < l.x.size(); ++i) {
      if (!std::isfinite(l.x[i]) || !std::isfinite(l.y[i])) continue;
      const std::string& c = l.colors.empty() ? l.color : l.colors[i];
      os << "<circle cx=\"" << Num(sx(l.x[i])) << "\" cy=\"" << Num(sy(l.y[i])) << "\" r=\""
         << l.radius << "\" fill=\"" << c << "\" fill-opacity=\"" << l.opacity << "\"/>\n";
    }
  }
  os << "</g>\n";
  int row = 0;
  for (const auto& l : layers_) {
    if (l.label.empty()) continue;
    const double ly = kTop + 14 + 16 * row++;
    os << "<rect x=\"" << kLeft + 10 << "\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\""
       << l.color << "\"/>\n<text x=\"" << kLeft + 26 << "\" y=\"" << ly << "\">"
       << Escape(l.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void SvgPlot::Save(const std::filesystem::path& path, bool with_timestamp) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("report", "cannot write " + path.string());
  out << Render(with_timestamp ? std::optional<std::string>(UtcTimestamp()) : std::nullopt);
}

std::string ColorMap(double t) {
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(40 + 200 * t));
  const int g = static_cast<int>(std::lround(80 + 60 * (1 - std::abs(2 * t - 1))));
  const int b = static_cast<int>(std::lround(220 - 190 * t));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

std::string UtcTimestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string ComposePanels(const std::vector<std::string>& panels) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth * panels.size()
     << "\" height=\"" << kHeight << "\">\n";
  for (std::size_t i = 0; i < panels.size(); ++i) {
    std::string body = panels[i];
    // Panels share clip-path ids; make them unique per panel.
    const std::string from = "id=\"plot\"", to = "id=\"plot" + std::to_string(i) + "\"";
    if (auto p = body.find(from); p != std::string::npos) body.replace(p, from.size(), to);
    const std::string uf = "url(#plot)", ut = "url(#plot" + std::to_string(i) + ")";
    if (auto p = body.find(uf); p != std::string::npos) body.replace(p, uf.size(), ut);
    os << "<g transform=\"translate(" << kWidth * i << ",0)\">\n" << body << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace ensdiv
