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

#include "ensdiv/gp_oracle.hpp"

#include <algorithm>
#include <cmath>

#include "ensdiv/random.hpp"

namespace ensdiv {

namespace {
constexpr const char* kModule = "gp_oracle";

MatrixXd Gram(const GpModel& m, const VectorXd& x) {
  MatrixXd k(x.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) k(i, j) = k(j, i) = m.Kernel(x(i), x(j));
  }
  return k;
}

// Cholesky with the escalating jitter policy; returns the jitter used.
double FactorWithJitter(const MatrixXd& a, Eigen::LLT<MatrixXd>& llt) {
  llt.compute(a);
  if (llt.info() == Eigen::Success) return 0.0;
  double jitter = 1e-8;
  for (int attempt = 0; attempt <= 3; ++attempt, jitter *= 10.0) {
    MatrixXd b = a;
    b.diagonal().array() += jitter;
    llt.compute(b);
    if (llt.info() == Eigen::Success) return jitter;
  }
  throw NumericalError(kModule, "covariance is not positive definite after jitter");
}
}  // namespace

double HeteroskedasticNoise(double x) {
  const double s = std::sin(x);
  return s * s + 0.01;
}

double GpModel::Kernel(double a, double b) const {
  const double d = (a - b) / lengthscale;
  return signal_variance * std::exp(-0.5 * d * d);
}

GpDataset SampleAt(const VectorXd& x, std::uint64_t seed, const GpModel& prior) {
  GpDataset out{x, VectorXd(x.size())};
  if (x.size() == 0) return out;
  Rng rng(seed);
  MatrixXd k = Gram(prior, x);
  k.diagonal().array() += 1e-8;
  Eigen::LLT<MatrixXd> llt;
  FactorWithJitter(k, llt);
  VectorXd z(x.size()), e(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) z(i) = rng.Normal();
  for (Eigen::Index i = 0; i < x.size(); ++i) e(i) = rng.Normal();
  const VectorXd f = llt.matrixL() * z;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    out.y(i) = f(i) + std::sqrt(prior.noise_fn(x(i))) * e(i);
  }
  return out;
}

GpDataset GenerateDataset(int n, double lo, double hi, std::uint64_t seed, const GpModel& prior) {
  if (n < 0) throw ValidationError(kModule, "n must be >= 0");
  Rng rng(seed);
  VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = rng.Uniform(lo, hi);
  // Separate stream for the targets so x does not shift when n changes.
  return SampleAt(x, seed ^ 0x5bd1e995ULL, prior);
}

GpState::GpState(GpModel model) : model_(std::move(model)) {
  if (!(model_.lengthscale > 0.0)) throw ValidationError(kModule, "lengthscale must be positive");
  if (model_.train_x.size() != model_.train_y.size()) {
    throw ValidationError(kModule, "train_x and train_y differ in length");
  }
  const Eigen::Index n = model_.train_x.size();
  if (n == 0) return;
  MatrixXd k = Gram(model_, model_.train_x);
  for (Eigen::Index i = 0; i < n; ++i) k(i, i) += model_.noise_fn(model_.train_x(i));
  jitter_ = FactorWithJitter(k, llt_);
  alpha_ = llt_.solve(model_.train_y);
}

GpState::Prediction GpState::Predict(double x_star) const {
  Prediction p;
  p.x = x_star;
  p.likelihood_variance = model_.noise_fn(x_star);
  const double prior = model_.signal_variance;
  const Eigen::Index n = model_.train_x.size();
  if (n == 0) {
    p.posterior_variance = prior;
    return p;
  }
  VectorXd k(n);
  for (Eigen::Index i = 0; i < n; ++i) k(i) = model_.Kernel(x_star, model_.train_x(i));
  p.mean = k.dot(alpha_);
  const VectorXd v = llt_.matrixL().solve(k);
  double var = prior - v.squaredNorm();
  if (var < 0.0) {
    if (var < -1e-9) throw NumericalError(kModule, "negative posterior variance");
    var = 0.0;
  }
  p.posterior_variance = std::min(var, prior);
  return p;
}

std::vector<GpState::Prediction> GpState::Predict(const VectorXd& x_star) const {
  std::vector<Prediction> out;
  out.reserve(x_star.size());
  for (Eigen::Index i = 0; i < x_star.size(); ++i) out.push_back(Predict(x_star(i)));
  return out;
}

GpState GpFit(const GpModel& model) { return GpState(model); }

ConditionalVarianceTable ConditionalPosteriorVariance(const std::vector<GpPrediction>& predictions,
                                                      int n_bins, double lo, double hi) {
  if (n_bins < 1 || !(hi > lo)) throw ValidationError(kModule, "invalid likelihood bins");
  ConditionalVarianceTable t;
  const double width = (hi - lo) / n_bins;
  for (int b = 0; b <= n_bins; ++b) t.bin_edges.push_back(lo + b * width);
  for (int b = 0; b < n_bins; ++b) t.bin_centers.push_back(lo + (b + 0.5) * width);
  t.ind_counts.assign(n_bins, 0);
  t.ood_counts.assign(n_bins, 0);
  t.ind_mean.assign(n_bins, 0.0);
  t.ood_mean.assign(n_bins, 0.0);
  for (const auto& p : predictions) {
    const int b = std::clamp(static_cast<int>((p.likelihood_variance - lo) / width), 0, n_bins - 1);
    if (p.x < 0.0) {
      ++t.ood_counts[b];
      t.ood_mean[b] += p.posterior_variance;
    } else {
      ++t.ind_counts[b];
      t.ind_mean[b] += p.posterior_variance;
    }
  }
  for (int b = 0; b < n_bins; ++b) {
    if (t.ind_counts[b]) t.ind_mean[b] /= static_cast<double>(t.ind_counts[b]);
    if (t.ood_counts[b]) t.ood_mean[b] /= static_cast<double>(t.ood_counts[b]);
  }
  return t;
}

GpExperiment RunGpExperiment(std::uint64_t seed, int n_train, int n_eval, int n_bins) {
  GpExperiment ex;
  ex.data = GenerateDataset(n_train, 0.0, 5.0, seed);
  GpModel model;
  model.train_x = ex.data.x;
  model.train_y = ex.data.y;
  const GpState state = GpFit(model);
  ex.predictions = state.Predict(VectorXd::LinSpaced(n_eval, -5.0, 5.0));
  ex.table = ConditionalPosteriorVariance(ex.predictions, n_bins);
  return ex;
}

}  // namespace ensdiv
