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


#include <doctest.h>

#include <cmath>

#include "ensdiv/robustness_trends.hpp"
#include "ensdiv/simulate.hpp"
#include "oracles.hpp"

using namespace ensdiv;

namespace {

std::vector<TrendPoint> Points(const std::vector<double>& x, const std::vector<double>& y,
                               ModelClass cls = ModelClass::kSingle) {
  std::vector<TrendPoint> out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.push_back({"p" + std::to_string(i), cls, x[i], y[i], TrendMetric::kZeroOne});
  }
  return out;
}

// Every model's OOD set is its InD set plus `extra` points that all models
// predict one-hot and correctly, so OOD Brier and variance are both the InD
// values times n / (n + extra).
PredictionStore PaddedStore(int extra) {
  SyntheticSpec spec;
  spec.n_points = 200;
  spec.n_classes = 4;
  spec.n_models = 6;
  spec.group_size = 3;
  spec.seed = 17;
  const PredictionStore base = ToStore(Simulate(spec));
  const LabelVector& y = base.Dataset("ind").labels;
  LabelVector yo(y.size() + extra);
  yo << y, LabelVector::Zero(extra);
  PredictionStore store;
  store.AddDataset({"ind", y, 4, "probs"});
  store.AddDataset({"ood", yo, 4, "probs"});
  for (const auto& id : base.ModelIds()) {
    const ProbMatrix& p = base.Probs(id, "ind");
    ProbMatrix po = ProbMatrix::Zero(p.rows() + extra, 4);
    po.topRows(p.rows()) = p;
    po.bottomRows(extra).col(0).setOnes();
    store.AddPrediction(id, "ind", p, base.Group(id));
    store.AddPrediction(id, "ood", po, base.Group(id));
  }
  store.AddPair("ind", "ood");
  return store;
}

}  // namespace

TEST_CASE("exact line") {
  const auto pts = Points({0, 1, 2, 5}, {1, 3, 5, 11});
  const TrendFit fit = FitTrend(pts);
  CHECK(fit.coefficient == doctest::Approx(2.0));
  CHECK(fit.intercept == doctest::Approx(1.0));
  CHECK(fit.r2 == 1.0);
  for (const auto& p : pts) CHECK(std::abs(p.ood_value - fit.Predict(p.ind_value)) < 1e-12);
}

TEST_CASE("four-point fit against closed forms") {
  const std::vector<double> x = {0, 1, 2, 3}, y = {0, 1, 2, 4};
  const TrendFit fit = FitTrend(Points(x, y));
  CHECK(fit.coefficient == doctest::Approx(1.3));
  CHECK(fit.intercept == doctest::Approx(-0.2));
  CHECK(fit.r2 == doctest::Approx(0.9657).epsilon(1e-4));
  const oracle::Line line = oracle::Ols(x, y);
  CHECK(fit.std_error == doctest::Approx(line.se));
  // Two degrees of freedom: two-sided p = 1 - |t| / sqrt(2 + t^2).
  const double t = line.slope / line.se;
  CHECK(fit.p_value == doctest::Approx(1.0 - t / std::sqrt(2.0 + t * t)));
  CHECK(fit.n == 4);
}

TEST_CASE("random fits against the oracle") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x, y;
    for (int i = 0; i < 30; ++i) {
      x.push_back(rng.Uniform());
      y.push_back(0.5 * x.back() + 0.1 * rng.Normal());
    }
    const TrendFit fit = FitTrend(Points(x, y));
    const oracle::Line line = oracle::Ols(x, y);
    CHECK(std::abs(fit.coefficient - line.slope) < 1e-12);
    CHECK(std::abs(fit.intercept - line.intercept) < 1e-12);
    CHECK(std::abs(fit.r2 - line.r2) < 1e-12);
    CHECK(std::abs(fit.std_error - line.se) < 1e-12);
  }
}

TEST_CASE("degenerate fits") {
  CHECK_THROWS_AS(FitTrend(Points({1, 1, 1}, {1, 2, 3})), Error);
  CHECK_THROWS_AS(FitTrend(Points({1, 2}, {1, 2})), Error);
}

TEST_CASE("effective robustness") {
  const TrendFit fit = FitTrend(Points({0, 1, 2}, {0.1, 0.3, 0.5}));
  CHECK(std::abs(EffectiveRobustness({"a", ModelClass::kSingle, 1.0, 0.3}, fit)) < 1e-12);
  CHECK(EffectiveRobustness({"b", ModelClass::kEnsemble, 1.0, 0.25}, fit) == doctest::Approx(0.05));

  auto ens = Points({0.5, 1.5, 2.5}, {0.2, 0.4, 0.6}, ModelClass::kEnsemble);
  for (const auto& p : ens) CHECK(std::abs(EffectiveRobustness(p, fit)) < 1e-12);
}

TEST_CASE("classes on one generating line share the fit") {
  auto single = Points({0.1, 0.2, 0.4, 0.7}, {0.31, 0.37, 0.49, 0.67});
  auto ens = Points({0.15, 0.3, 0.5}, {0.34, 0.43, 0.55}, ModelClass::kEnsemble);
  CHECK(std::abs(FitTrend(single).coefficient - FitTrend(ens).coefficient) < 1e-6);
}

TEST_CASE("trend table") {
  SyntheticSpec spec;
  spec.n_points = 300;
  spec.n_models = 8;
  spec.group_size = 4;
  spec.shift_strength = 1.0;
  const PredictionStore store = ToStore(Simulate(spec));
  const std::vector<TrendMetric> metrics = {TrendMetric::kZeroOne, TrendMetric::kBrier};

  const TrendTable singles = BuildTrendTable(store, {}, {}, metrics, {"ind", "ood"});
  auto row = [](const TrendTable& t, TrendMetric m, const std::string& cls) -> const TrendRow* {
    for (const auto& r : t.rows) {
      if (r.metric == m && r.model_class == cls) return &r;
    }
    return nullptr;
  };
  for (const auto m : metrics) {
    const TrendRow* all = row(singles, m, "All");
    const TrendRow* one = row(singles, m, "Single Model");
    REQUIRE(all != nullptr);
    REQUIRE(one != nullptr);
    CHECK(all->fit.coefficient == one->fit.coefficient);
    CHECK(all->fit.n == 8);
    CHECK(row(singles, m, "Ensemble") == nullptr);
  }

  std::vector<std::string> first(store.ModelIds().begin(), store.ModelIds().begin() + 4);
  const auto ensembles = EnumerateHomogeneousEnsembles(first, 2);
  const std::vector<ModelClass> classes(ensembles.size(), ModelClass::kEnsemble);
  const TrendTable mixed = BuildTrendTable(store, ensembles, classes, metrics, {"ind", "ood"});
  REQUIRE(row(mixed, TrendMetric::kBrier, "Ensemble") != nullptr);
  CHECK(row(mixed, TrendMetric::kBrier, "Ensemble")->fit.n == 6);
  CHECK(row(mixed, TrendMetric::kBrier, "All")->fit.n == 14);

  const TrendPoint& p = mixed.points.back();
  const ProbMatrix ens = store.EnsembleProbs(ensembles.back(), "ood");
  CHECK(p.ood_value == doctest::Approx(AggregateMetric(p.metric, ens, store.Dataset("ood").labels)));
}

TEST_CASE("diversity ratio") {
  SyntheticSpec spec;
  spec.n_points = 200;
  spec.n_models = 6;
  spec.group_size = 3;
  const PredictionStore sim = ToStore(Simulate(spec));
  PredictionStore same;
  same.AddDataset({"a", sim.Dataset("ind").labels, 10, "probs"});
  same.AddDataset({"b", sim.Dataset("ind").labels, 10, "probs"});
  for (const auto& id : sim.ModelIds()) {
    same.AddPrediction(id, "a", sim.Probs(id, "ind"));
    same.AddPrediction(id, "b", sim.Probs(id, "ind"));
  }
  const auto ens = EnumerateHomogeneousEnsembles(sim.ModelIds(), 3);
  const DiversityRatio r = DiversityRatioCheck(same, ens, {"a", "b"});
  CHECK(r.ratio == doctest::Approx(1.0));
  CHECK(r.c0 == doctest::Approx(1.0));

  const PredictionStore padded = PaddedStore(50);
  const auto ens2 = EnumerateHomogeneousEnsembles(padded.ModelIds(), 4);
  const DiversityRatio q = DiversityRatioCheck(padded, ens2, {"ind", "ood"});
  CHECK(std::abs(q.ratio - q.c0) < 1e-6);
  CHECK(q.ratio == doctest::Approx(200.0 / 250.0));
}
