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

#include "ensdiv/conditional_diversity.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

#include "ensdiv/random.hpp"

namespace ensdiv {

namespace {

constexpr const char* kModule = "conditional_diversity";

double GaussianKernel(double a, double b, double inv_two_h2) {
  const double d = a - b;
  return std::exp(-d * d * inv_two_h2);
}

}  // namespace

JointSample JointSamples(std::span<const ProbMatrix> members, DecompositionFamily family,
                         SampleSource source) {
  if (family != DecompositionFamily::kQuadraticVariance &&
      family != DecompositionFamily::kEntropyJsd) {
    throw ValidationError(kModule, "joint samples need the quadratic or entropy family");
  }
  const DecompositionRecord rec = family == DecompositionFamily::kQuadraticVariance
                                      ? DecomposeQuadratic(members)
                                      : DecomposeEntropy(members);
  return {rec.avg_member, rec.diversity, source};
}

JointSample Subsample(const JointSample& sample, Eigen::Index cap) {
  if (cap <= 0 || sample.size() <= cap) return sample;
  JointSample out{VectorXd(cap), VectorXd(cap), sample.source};
  for (Eigen::Index k = 0; k < cap; ++k) {
    const Eigen::Index i = k * sample.size() / cap;
    out.avg(k) = sample.avg(i);
    out.div(k) = sample.div(i);
  }
  return out;
}

double SampleStd(const VectorXd& v) {
  if (v.size() < 2) return 0.0;
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

Bandwidth2 ScottBandwidth(const JointSample& sample) {
  const Eigen::Index n = sample.size();
  if (n < 2) throw NumericalError(kModule, "degenerate bandwidth: need at least 2 points");
  const double factor = std::pow(static_cast<double>(n), -1.0 / 6.0);
  const Bandwidth2 bw{factor * SampleStd(sample.avg), factor * SampleStd(sample.div)};
  if (!(bw.hx > 0.0) || !(bw.hy > 0.0)) {
    throw NumericalError(kModule, "degenerate bandwidth: zero standard deviation");
  }
  return bw;
}

VectorXd Linspace(double lo, double hi, Eigen::Index n) {
  if (n == 1) return VectorXd::Constant(1, lo);
  return VectorXd::LinSpaced(n, lo, hi);
}

KdeGrid KdeJoint(const JointSample& sample, const VectorXd& x_grid, const VectorXd& y_grid,
                 Bandwidth2 bandwidth) {
  if (sample.size() == 0) throw ValidationError(kModule, "empty sample");
  if (!(bandwidth.hx > 0.0) || !(bandwidth.hy > 0.0)) {
    throw ValidationError(kModule, "bandwidth must be positive");
  }
  // Per-axis kernel matrices: kx(g, i) = K_hx(x_g - x_i).
  const double nx = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * bandwidth.hx);
  const double ny = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * bandwidth.hy);
  MatrixXd kx(x_grid.size(), sample.size());
  MatrixXd ky(y_grid.size(), sample.size());
  const double ix = 1.0 / (2.0 * bandwidth.hx * bandwidth.hx);
  const double iy = 1.0 / (2.0 * bandwidth.hy * bandwidth.hy);
  for (Eigen::Index i = 0; i < sample.size(); ++i) {
    for (Eigen::Index g = 0; g < x_grid.size(); ++g) {
      kx(g, i) = nx * GaussianKernel(x_grid(g), sample.avg(i), ix);
    }
    for (Eigen::Index g = 0; g < y_grid.size(); ++g) {
      ky(g, i) = ny * GaussianKernel(y_grid(g), sample.div(i), iy);
    }
  }
  KdeGrid grid;
  grid.x_grid = x_grid;
  grid.y_grid = y_grid;
  grid.bandwidth = bandwidth;
  grid.density = (kx * ky.transpose()) / static_cast<double>(sample.size());
  grid.empty_column.assign(x_grid.size(), false);
  return grid;
}

KdeGrid ConditionalGrid(KdeGrid grid) {
  grid.empty_column.assign(grid.density.rows(), false);
  for (Eigen::Index ix = 0; ix < grid.density.rows(); ++ix) {
    const double total = grid.density.row(ix).sum();
    if (total < 1e-12) {
      grid.density.row(ix).setZero();
      grid.empty_column[ix] = true;
    } else {
      grid.density.row(ix) /= total;
    }
  }
  return grid;
}

double DefaultRidge(const VectorXd& y) {
  if (y.size() == 0) return 0.0;
  const double mean = y.mean();
  return 1e-3 * (y.array() - mean).square().mean();
}

PivotedCholesky GaussianPivotedCholesky(const VectorXd& x, double bandwidth,
                                        double tolerance) {
  const Eigen::Index n = x.size();
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  PivotedCholesky pc;
  VectorXd diag = VectorXd::Ones(n);
  std::vector<VectorXd> cols;
  while (static_cast<Eigen::Index>(cols.size()) < n) {
    Eigen::Index p;
    pc.residual = diag.maxCoeff(&p);
    if (pc.residual <= tolerance) break;
    const double pivot = std::sqrt(pc.residual);
    VectorXd col(n);
    for (Eigen::Index i = 0; i < n; ++i) col(i) = GaussianKernel(x(i), x(p), inv);
    for (const auto& prev : cols) col -= prev(p) * prev;
    col /= pivot;
    // Pivot rows already chosen are exactly reproduced.
    for (const Eigen::Index q : pc.pivots) col(q) = 0.0;
    col(p) = pivot;
    diag -= col.cwiseAbs2();
    diag(p) = 0.0;
    for (const Eigen::Index q : pc.pivots) diag(q) = 0.0;
    pc.pivots.push_back(p);
    cols.push_back(std::move(col));
  }
  if (static_cast<Eigen::Index>(cols.size()) == n) pc.residual = 0.0;
  pc.factor.resize(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) pc.factor.col(k) = cols[k];
  return pc;
}

namespace {

ConditionalCurve DenseKrr(const VectorXd& x, const VectorXd& y, double bandwidth, double ridge,
                          const VectorXd& x_eval) {
  const Eigen::Index n = x.size();
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  MatrixXd kernel(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    kernel(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      kernel(i, j) = GaussianKernel(x(i), x(j), inv);
    }
  }
  double lambda = ridge;
  for (int attempt = 0; attempt <= 3; ++attempt) {
    MatrixXd system = kernel;
    system.diagonal().array() += lambda * static_cast<double>(n);
    Eigen::LLT<MatrixXd, Eigen::Lower> llt(system);
    if (llt.info() == Eigen::Success) {
      const VectorXd alpha = llt.solve(y);
      if (alpha.allFinite()) {
        ConditionalCurve curve{x_eval, VectorXd(x_eval.size()), bandwidth, lambda};
        for (Eigen::Index g = 0; g < x_eval.size(); ++g) {
          double acc = 0.0;
          for (Eigen::Index i = 0; i < n; ++i) acc += alpha(i) * GaussianKernel(x_eval(g), x(i), inv);
          curve.y_hat(g) = acc;
        }
        return curve;
      }
    }
    lambda = lambda > 0.0 ? lambda * 10.0 : 1e-12;
  }
  throw NumericalError(kModule, "kernel ridge factorization failed after ridge escalation");
}

// With K ~ L L^T the ridge solution becomes regression on the rows of L:
// w = (L^T L + ridge n I)^-1 L^T y and y_hat(x*) = phi(x*)^T w, where
// phi(x*) = L_P^-1 k_P(x*) maps a point into the same feature space (L_P is
// the lower-triangular block of L at the pivot rows).
ConditionalCurve LowRankKrr(const VectorXd& x, const VectorXd& y, double bandwidth, double ridge,
                            const VectorXd& x_eval) {
  const Eigen::Index n = x.size();
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  const PivotedCholesky pc = GaussianPivotedCholesky(x, bandwidth);
  const Eigen::Index r = pc.factor.cols();
  MatrixXd pivot_block(r, r);
  for (Eigen::Index a = 0; a < r; ++a) pivot_block.row(a) = pc.factor.row(pc.pivots[a]);
  const MatrixXd gram = pc.factor.transpose() * pc.factor;
  const VectorXd rhs = pc.factor.transpose() * y;
  double lambda = ridge;
  for (int attempt = 0; attempt <= 3; ++attempt) {
    MatrixXd system = gram;
    system.diagonal().array() += lambda * static_cast<double>(n);
    Eigen::LLT<MatrixXd, Eigen::Lower> llt(system);
    if (llt.info() == Eigen::Success) {
      const VectorXd w = llt.solve(rhs);
      if (w.allFinite()) {
        ConditionalCurve curve{x_eval, VectorXd(x_eval.size()), bandwidth, lambda};
        VectorXd k_p(r);
        const auto lower = pivot_block.triangularView<Eigen::Lower>();
        for (Eigen::Index g = 0; g < x_eval.size(); ++g) {
          for (Eigen::Index a = 0; a < r; ++a) k_p(a) = GaussianKernel(x_eval(g), x(pc.pivots[a]), inv);
          curve.y_hat(g) = lower.solve(k_p).dot(w);
        }
        return curve;
      }
    }
    lambda = lambda > 0.0 ? lambda * 10.0 : 1e-12;
  }
  throw NumericalError(kModule, "kernel ridge factorization failed after ridge escalation");
}

}  // namespace

ConditionalCurve KrrConditionalExpectation(const VectorXd& x, const VectorXd& y,
                                           double bandwidth, double ridge,
                                           const VectorXd& x_eval, KrrSolver solver) {
  const Eigen::Index n = x.size();
  if (n < 2 || y.size() != n) {
    throw ValidationError(kModule, "kernel ridge regression needs >= 2 matched points");
  }
  if (!(bandwidth > 0.0)) throw ValidationError(kModule, "bandwidth must be positive");
  if (ridge < 0.0) throw ValidationError(kModule, "ridge must be non-negative");
  const bool low_rank = solver == KrrSolver::kLowRank ||
                        (solver == KrrSolver::kAuto && n > kKrrDenseLimit && ridge > 0.0);
  return low_rank ? LowRankKrr(x, y, bandwidth, ridge, x_eval)
                  : DenseKrr(x, y, bandwidth, ridge, x_eval);
}

double DStatistic(const ConditionalCurve& ind, const ConditionalCurve& ood, DStatMode mode) {
  if (ind.x_grid.size() != ood.x_grid.size() ||
      (ind.x_grid - ood.x_grid).cwiseAbs().maxCoeff() > 0.0) {
    throw ValidationError(kModule, "curves must share an evaluation grid");
  }
  if (ind.y_hat.size() == 0) throw ValidationError(kModule, "empty curves");
  if (mode == DStatMode::kRatioOfSums) {
    const double denom = ind.y_hat.sum();
    if (denom == 0.0) throw NumericalError(kModule, "InD curve sums to zero");
    return (ood.y_hat - ind.y_hat).sum() / denom;
  }
  if ((ind.y_hat.array() == 0.0).any()) {
    throw NumericalError(kModule, "InD curve has zeros; integral d undefined");
  }
  return ((ood.y_hat - ind.y_hat).array() / ind.y_hat.array()).mean();
}

double Percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw ValidationError(kModule, "percentile of empty set");
  std::sort(values.begin(), values.end());
  const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

VectorXd PairGrid(const VectorXd& pooled_avg, const VectorXd& ind_avg, const VectorXd& ood_avg,
                  int grid_points) {
  if (grid_points < 1) throw ValidationError(kModule, "grid_points must be >= 1");
  std::vector<double> pooled(pooled_avg.data(), pooled_avg.data() + pooled_avg.size());
  const double lo = std::max({Percentile(pooled, 1.0), ind_avg.minCoeff(), ood_avg.minCoeff()});
  const double hi = std::min({Percentile(pooled, 99.0), ind_avg.maxCoeff(), ood_avg.maxCoeff()});
  if (!(hi > lo)) {
    throw ValidationError(kModule, "InD and OOD supports do not overlap");
  }
  return Linspace(lo, hi, grid_points);
}

std::pair<ConditionalCurve, ConditionalCurve> FitPairCurves(const JointSample& ind,
                                                            const JointSample& ood,
                                                            double bandwidth, double ridge,
                                                            const VectorXd& pooled_avg,
                                                            int grid_points) {
  const VectorXd grid = PairGrid(pooled_avg, ind.avg, ood.avg, grid_points);
  return {KrrConditionalExpectation(ind.avg, ind.div, bandwidth, ridge, grid),
          KrrConditionalExpectation(ood.avg, ood.div, bandwidth, ridge, grid)};
}

DStatResult PermutationTest(const JointSample& ind, const JointSample& ood,
                            const PermutationOptions& options) {
  if (ind.size() < 2 || ood.size() < 2) {
    throw ValidationError(kModule, "permutation test needs >= 2 points per sample");
  }
  if (options.n_surrogates < 0) throw ValidationError(kModule, "n_surrogates must be >= 0");
  const Eigen::Index n_ind = ind.size();
  const Eigen::Index n_total = n_ind + ood.size();
  JointSample pooled{VectorXd(n_total), VectorXd(n_total), SampleSource::kInD};
  pooled.avg << ind.avg, ood.avg;
  pooled.div << ind.div, ood.div;

  DStatResult result;
  result.bandwidth = options.bandwidth ? *options.bandwidth : ScottBandwidth(pooled).hx;
  result.ridge = options.ridge ? *options.ridge : DefaultRidge(pooled.div);
  result.n_surrogates = options.n_surrogates;

  auto [curve_ind, curve_ood] = FitPairCurves(ind, ood, result.bandwidth, result.ridge,
                                              pooled.avg, options.grid_points);
  result.d = DStatistic(curve_ind, curve_ood, options.mode);
  result.curve_ind = std::move(curve_ind);
  result.curve_ood = std::move(curve_ood);

  result.surrogate_d.assign(options.n_surrogates, 0.0);
  auto run_surrogate = [&](int s) {
    Rng rng = Rng::Stream(options.seed, static_cast<std::uint64_t>(s));
    std::vector<Eigen::Index> perm(n_total);
    for (Eigen::Index i = 0; i < n_total; ++i) perm[i] = i;
    rng.Shuffle(perm);
    JointSample a{VectorXd(n_ind), VectorXd(n_ind), SampleSource::kInD};
    JointSample b{VectorXd(n_total - n_ind), VectorXd(n_total - n_ind), SampleSource::kOOD};
    for (Eigen::Index i = 0; i < n_total; ++i) {
      JointSample& dst = i < n_ind ? a : b;
      const Eigen::Index k = i < n_ind ? i : i - n_ind;
      dst.avg(k) = pooled.avg(perm[i]);
      dst.div(k) = pooled.div(perm[i]);
    }
    auto [ca, cb] = FitPairCurves(a, b, result.bandwidth, result.ridge, pooled.avg,
                                  options.grid_points);
    result.surrogate_d[s] = DStatistic(ca, cb, options.mode);
  };

  const int workers = std::max(1, std::min(options.workers, options.n_surrogates));
  if (workers == 1) {
    for (int s = 0; s < options.n_surrogates; ++s) run_surrogate(s);
  } else {
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int s = next++; s < options.n_surrogates && !failed; s = next++) {
          try {
            run_surrogate(s);
          } catch (...) {
            if (!failed.exchange(true)) error = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }

  const auto exceed = std::count_if(result.surrogate_d.begin(), result.surrogate_d.end(),
                                    [&](double d) { return d >= result.d; });
  result.p_value = static_cast<double>(exceed + 1) / (options.n_surrogates + 1);
  return result;
}

}  // namespace ensdiv
