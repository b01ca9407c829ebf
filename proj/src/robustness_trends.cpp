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

#include "ensdiv/robustness_trends.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <boost/math/distributions/students_t.hpp>

#include "ensdiv/decomposition.hpp"
#include "ensdiv/metrics.hpp"

namespace ensdiv {

namespace {
constexpr const char* kModule = "robustness_trends";
}

std::string_view TrendMetricName(TrendMetric metric) {
  switch (metric) {
    case TrendMetric::kZeroOne: return "01";
    case TrendMetric::kNll: return "nll";
    case TrendMetric::kBrier: return "brier";
    case TrendMetric::kEce: return "ece";
    case TrendMetric::kResce: return "resce";
  }
  return "unknown";
}

std::string_view ModelClassName(ModelClass cls) {
  switch (cls) {
    case ModelClass::kSingle: return "single";
    case ModelClass::kEnsemble: return "ensemble";
    case ModelClass::kHeterogeneous: return "heterogeneous";
  }
  return "unknown";
}

TrendFit FitTrend(std::span<const TrendPoint> points) {
  const auto n = static_cast<long>(points.size());
  if (n < 3) throw ValidationError(kModule, "trend fit needs at least 3 points");
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += p.ind_value;
    my += p.ood_value;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& p : points) {
    const double dx = p.ind_value - mx, dy = p.ood_value - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx <= 0.0) throw NumericalError(kModule, "degenerate fit: InD values have zero variance");
  TrendFit fit;
  fit.n = n;
  fit.coefficient = sxy / sxx;
  fit.intercept = my - fit.coefficient * mx;
  double ss_res = 0.0;
  for (const auto& p : points) {
    const double r = p.ood_value - fit.Predict(p.ind_value);
    ss_res += r * r;
  }
  fit.r2 = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  const double dof = static_cast<double>(n - 2);
  fit.std_error = std::sqrt(ss_res / dof / sxx);
  if (fit.std_error > 0.0) {
    fit.t_statistic = fit.coefficient / fit.std_error;
    const boost::math::students_t dist(dof);
    fit.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(fit.t_statistic)));
  } else {
    // Exact fit.
    fit.t_statistic = fit.coefficient == 0.0 ? 0.0 : std::copysign(INFINITY, fit.coefficient);
    fit.p_value = fit.coefficient == 0.0 ? 1.0 : 0.0;
  }
  return fit;
}

double EffectiveRobustness(const TrendPoint& point, const TrendFit& baseline) {
  return baseline.Predict(point.ind_value) - point.ood_value;
}

double AggregateMetric(TrendMetric metric, const ProbMatrix& probs, const LabelVector& labels,
                       int calibration_bins) {
  switch (metric) {
    case TrendMetric::kZeroOne: return ZeroOneError(probs, labels).mean();
    case TrendMetric::kNll: return Nll(probs, labels).mean();
    case TrendMetric::kBrier: return Brier(probs, labels).mean();
    case TrendMetric::kEce: return Calibration(probs, labels, calibration_bins).ece;
    case TrendMetric::kResce: return Calibration(probs, labels, calibration_bins).resce;
  }
  throw ValidationError(kModule, "unknown metric");
}

TrendTable BuildTrendTable(const PredictionStore& store, std::span<const EnsembleDef> ensembles,
                           std::span<const ModelClass> ensemble_classes,
                           std::span<const TrendMetric> metrics,
                           const std::pair<std::string, std::string>& pair,
                           int calibration_bins) {
  if (ensemble_classes.size() != ensembles.size()) {
    throw ValidationError(kModule, "one model class per ensemble required");
  }
  const auto& [ind, ood] = pair;
  const LabelVector& ind_labels = store.Dataset(ind).labels;
  const LabelVector& ood_labels = store.Dataset(ood).labels;
  TrendTable table;
  for (const TrendMetric metric : metrics) {
    std::vector<TrendPoint> single, ens;
    for (const auto& id : store.ModelIds()) {
      if (!store.HasPrediction(id, ind) || !store.HasPrediction(id, ood)) continue;
      single.push_back({id, ModelClass::kSingle,
                        AggregateMetric(metric, store.Probs(id, ind), ind_labels, calibration_bins),
                        AggregateMetric(metric, store.Probs(id, ood), ood_labels, calibration_bins),
                        metric});
    }
    for (std::size_t k = 0; k < ensembles.size(); ++k) {
      const auto& def = ensembles[k];
      ens.push_back({def.ensemble_id, ensemble_classes[k],
                     AggregateMetric(metric, store.EnsembleProbs(def, ind), ind_labels,
                                     calibration_bins),
                     AggregateMetric(metric, store.EnsembleProbs(def, ood), ood_labels,
                                     calibration_bins),
                     metric});
    }
    std::vector<TrendPoint> all = single;
    all.insert(all.end(), ens.begin(), ens.end());
    if (all.size() >= 3) table.rows.push_back({metric, "All", FitTrend(all)});
    if (single.size() >= 3) table.rows.push_back({metric, "Single Model", FitTrend(single)});
    if (ens.size() >= 3) table.rows.push_back({metric, "Ensemble", FitTrend(ens)});
    table.points.insert(table.points.end(), all.begin(), all.end());
  }
  return table;
}

DiversityRatio DiversityRatioCheck(const PredictionStore& store,
                                   std::span<const EnsembleDef> ensembles,
                                   const std::pair<std::string, std::string>& pair) {
  if (ensembles.empty()) throw ValidationError(kModule, "no ensembles for diversity ratio");
  const auto& [ind, ood] = pair;
  DiversityRatio out;
  std::set<std::string> member_ids;
  for (const auto& def : ensembles) {
    const auto mi = store.MemberProbs(def, ind);
    const auto mo = store.MemberProbs(def, ood);
    out.mean_var_ind += VarianceDiversity(std::span<const ProbMatrix>(mi)).mean();
    out.mean_var_ood += VarianceDiversity(std::span<const ProbMatrix>(mo)).mean();
    member_ids.insert(def.member_model_ids.begin(), def.member_model_ids.end());
  }
  out.mean_var_ind /= static_cast<double>(ensembles.size());
  out.mean_var_ood /= static_cast<double>(ensembles.size());
  if (out.mean_var_ind <= 0.0) throw NumericalError(kModule, "InD diversity is zero");
  out.ratio = out.mean_var_ood / out.mean_var_ind;

  std::vector<TrendPoint> points;
  for (const auto& id : member_ids) {
    points.push_back({id, ModelClass::kSingle,
                      Brier(store.Probs(id, ind), store.Dataset(ind).labels).mean(),
                      Brier(store.Probs(id, ood), store.Dataset(ood).labels).mean(),
                      TrendMetric::kBrier});
  }
  out.c0 = FitTrend(points).coefficient;
  out.discrepancy = out.ratio - out.c0;
  return out;
}

}  // namespace ensdiv
