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
#include <functional>
#include <vector>

#include "ensdiv/types.hpp"

namespace ensdiv {

/// sin^2(x) + 0.01.
double HeteroskedasticNoise(double x);

/// Zero-mean GP with an RBF kernel and input-dependent observation noise.
struct GpModel {
  VectorXd train_x;
  VectorXd train_y;
  double lengthscale = 1.0;
  double signal_variance = 1.0;
  std::function<double(double)> noise_fn = HeteroskedasticNoise;

  double Kernel(double a, double b) const;
};

struct GpDataset {
  VectorXd x;
  VectorXd y;
};

/// Draws prior function values jointly at `x` and adds N(0, noise(x)) noise.
GpDataset SampleAt(const VectorXd& x, std::uint64_t seed, const GpModel& prior = {});

/// `n` inputs uniform on [lo, hi], targets from SampleAt.
GpDataset GenerateDataset(int n, double lo, double hi, std::uint64_t seed,
                          const GpModel& prior = {});

/// Factorization of K + diag(noise(x_i)).
class GpState {
 public:
  explicit GpState(GpModel model);

  const GpModel& model() const { return model_; }
  /// Jitter that was added to the diagonal to make the factorization succeed.
  double jitter() const { return jitter_; }

  struct Prediction {
    double x = 0.0;
    double mean = 0.0;
    double posterior_variance = 0.0;
    double likelihood_variance = 0.0;
  };

  Prediction Predict(double x_star) const;
  std::vector<Prediction> Predict(const VectorXd& x_star) const;

 private:
  GpModel model_;
  Eigen::LLT<MatrixXd> llt_;
  VectorXd alpha_;
  double jitter_ = 0.0;
};

using GpPrediction = GpState::Prediction;

/// Factorizes the training covariance; on failure adds jitter 1e-8, growing
/// x10 at most 3 times before giving up.
GpState GpFit(const GpModel& model);

/// Mean posterior variance per likelihood-variance bin, split by x < 0 (OOD)
/// and x >= 0 (InD).
struct ConditionalVarianceTable {
  std::vector<double> bin_edges;
  std::vector<double> bin_centers;
  std::vector<long> ind_counts;
  std::vector<long> ood_counts;
  std::vector<double> ind_mean;
  std::vector<double> ood_mean;
};

ConditionalVarianceTable ConditionalPosteriorVariance(const std::vector<GpPrediction>& predictions,
                                                      int n_bins = 20, double lo = 0.01,
                                                      double hi = 1.01);

struct GpExperiment {
  GpDataset data;
  std::vector<GpPrediction> predictions;
  ConditionalVarianceTable table;
};

/// 25 training points on [0, 5], predictions at 512 points on [-5, 5].
GpExperiment RunGpExperiment(std::uint64_t seed, int n_train = 25, int n_eval = 512,
                             int n_bins = 20);

}  // namespace ensdiv
