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


// Reference implementations used as test oracles. They work on nested
// std::vector with plain loops and share no code with the library.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include <unistd.h>

#include "ensdiv/random.hpp"
#include "ensdiv/types.hpp"

namespace oracle {

using Row = std::vector<double>;
using Table = std::vector<Row>;

inline Row RowOf(const ensdiv::ProbMatrix& m, Eigen::Index i) {
  Row r(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) r[c] = m(i, c);
  return r;
}

inline Row Average(const std::vector<Row>& members) {
  Row out(members.front().size(), 0.0);
  for (const auto& m : members) {
    for (std::size_t c = 0; c < m.size(); ++c) out[c] += m[c];
  }
  for (double& v : out) v /= static_cast<double>(members.size());
  return out;
}

inline double Entropy(const Row& p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

inline double QuadUnc(const Row& p) {
  double s = 0.0;
  for (double v : p) s += v * v;
  return 1.0 - s;
}

inline double Brier(const Row& p, int y) {
  double s = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    const double t = (static_cast<int>(c) == y ? 1.0 : 0.0) - p[c];
    s += t * t;
  }
  return s;
}

inline double Variance(const std::vector<Row>& members) {
  const Row mean = Average(members);
  double total = 0.0;
  for (std::size_t c = 0; c < mean.size(); ++c) {
    double v = 0.0;
    for (const auto& m : members) v += (m[c] - mean[c]) * (m[c] - mean[c]);
    total += v / static_cast<double>(members.size());
  }
  return total;
}

inline double Kl(const Row& p, const Row& q) {
  double s = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    if (p[c] > 0.0) s += p[c] * std::log(p[c] / q[c]);
  }
  return s;
}

// Random probability rows with occasional near-one-hot rows.
inline std::vector<ensdiv::ProbMatrix> RandomMembers(ensdiv::Rng& rng, int m, int n, int c) {
  std::vector<ensdiv::ProbMatrix> out;
  for (int k = 0; k < m; ++k) {
    ensdiv::ProbMatrix p(n, c);
    for (int i = 0; i < n; ++i) {
      const double sharp = rng.Uniform() < 0.1 ? 8.0 : 1.0;
      for (int j = 0; j < c; ++j) p(i, j) = std::exp(sharp * rng.Normal());
      p.row(i) /= p.row(i).sum();
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline ensdiv::LabelVector RandomLabels(ensdiv::Rng& rng, int n, int c) {
  ensdiv::LabelVector y(n);
  for (int i = 0; i < n; ++i) y(i) = static_cast<int>(rng.Index(static_cast<std::uint64_t>(c)));
  return y;
}

// Closed-form simple regression.
struct Line {
  double slope, intercept, r2, se;
};

inline Line Ols(const Row& x, const Row& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  Line l{};
  l.slope = sxy / sxx;
  l.intercept = my - l.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - l.intercept - l.slope * x[i];
    sse += r * r;
  }
  l.r2 = 1.0 - sse / syy;
  l.se = std::sqrt(sse / (n - 2.0) / sxx);
  return l;
}

// Direct double loop of the unbiased MMD^2 estimator.
inline double Mmd2(const Table& x, const Table& y, double s) {
  auto k = [s](const Row& a, const Row& b) {
    double d = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) d += (a[j] - b[j]) * (a[j] - b[j]);
    return std::exp(-d / (2.0 * s * s));
  };
  const double m = static_cast<double>(x.size());
  const double n = static_cast<double>(y.size());
  double xx = 0.0, yy = 0.0, xy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (i != j) xx += k(x[i], x[j]);
    }
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (i != j) yy += k(y[i], y[j]);
    }
  }
  for (const auto& a : x) {
    for (const auto& b : y) xy += k(a, b);
  }
  return xx / (m * (m - 1.0)) + yy / (n * (n - 1.0)) - 2.0 * xy / (m * n);
}

inline std::filesystem::path TempDir(const std::string& tag) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("ensdiv_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter++));
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace oracle
