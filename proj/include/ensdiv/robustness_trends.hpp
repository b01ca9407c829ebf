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

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ensdiv/core_data.hpp"
#include "ensdiv/types.hpp"

namespace ensdiv {

enum class ModelClass { kSingle, kEnsemble, kHeterogeneous };

/// Aggregate metrics that can be trended; all are "lower is better".
enum class TrendMetric { kZeroOne, kNll, kBrier, kEce, kResce };

std::string_view TrendMetricName(TrendMetric metric);
std::string_view ModelClassName(ModelClass cls);

struct TrendPoint {
  std::string model_id;
  ModelClass model_class = ModelClass::kSingle;
  double ind_value = 0.0;
  double ood_value = 0.0;
  TrendMetric metric = TrendMetric::kZeroOne;
};

struct TrendFit {
  double coefficient = 0.0;
  double intercept = 0.0;
  double std_error = 0.0;
  double t_statistic = 0.0;
  double p_value = 1.0;
  double r2 = 0.0;
  long n = 0;

  double Predict(double ind) const { return intercept + coefficient * ind; }
};

/// OLS of ood on ind with intercept; classical slope standard error and a
/// two-sided t-test against zero slope with n - 2 degrees of freedom.
TrendFit FitTrend(std::span<const TrendPoint> points);

/// Baseline-predicted OOD value minus observed OOD value; positive means the
/// point does better out of distribution than the trend predicts.
double EffectiveRobustness(const TrendPoint& point, const TrendFit& baseline);

/// Dataset-level value of a trend metric for one prediction matrix.
double AggregateMetric(TrendMetric metric, const ProbMatrix& probs, const LabelVector& labels,
                       int calibration_bins = 15);

struct TrendRow {
  TrendMetric metric;
  /// "All", "Single Model" or "Ensemble".
  std::string model_class;
  TrendFit fit;
};

struct TrendTable {
  std::vector<TrendPoint> points;
  std::vector<TrendRow> rows;
};

/// Trend points for every single model in the store and every ensemble,
/// fitted per metric for All / Single Model / Ensemble (homogeneous and
/// heterogeneous ensembles both count as Ensemble). Classes with fewer than
/// three points are omitted.
TrendTable BuildTrendTable(const PredictionStore& store, std::span<const EnsembleDef> ensembles,
                           std::span<const ModelClass> ensemble_classes,
                           std::span<const TrendMetric> metrics,
                           const std::pair<std::string, std::string>& pair,
                           int calibration_bins = 15);

struct DiversityRatio {
  double ratio = 0.0;
  double c0 = 0.0;
  double discrepancy = 0.0;
  double mean_var_ind = 0.0;
  double mean_var_ood = 0.0;
};

/// Ratio of dataset-mean variance diversity (OOD over InD, averaged across
/// ensembles) next to the slope of the single-model Brier trend; the two agree
/// when ensembles and single models share one linear Brier trend.
DiversityRatio DiversityRatioCheck(const PredictionStore& store,
                                   std::span<const EnsembleDef> ensembles,
                                   const std::pair<std::string, std::string>& pair);

}  // namespace ensdiv
