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

#include "ensdiv/cli.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ensdiv/conditional_diversity.hpp"
#include "ensdiv/core_data.hpp"
#include "ensdiv/decomposition.hpp"
#include "ensdiv/gp_oracle.hpp"
#include "ensdiv/improvement_analysis.hpp"
#include "ensdiv/metrics.hpp"
#include "ensdiv/report.hpp"
#include "ensdiv/robustness_trends.hpp"
#include "ensdiv/simulate.hpp"
#include "ensdiv/svg.hpp"

namespace ensdiv {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

struct CommonOptions {
  std::string manifest;
  std::string pair;
  std::string out;
  std::uint64_t seed = 0;
  bool force = false;
  bool no_timestamp = false;
};

struct RunConfig {
  CommonOptions common;
  std::vector<std::string> metrics;
  std::string family = "quadratic";
  std::string members;
  int bins = 15;
  int surrogates = 100;
  long subsample = 0;
  double alpha = 0.05;
  int workers = 1;
  bool integral_d = false;
  bool logit_scale = false;
  bool base2 = false;
  // trends
  int ensemble_size = 4;
  int hetero_bins = 0;
  // improve
  std::string base, alt_a, alt_b, control;
  // simulate
  SyntheticSpec sim;
};

std::vector<std::string> SplitList(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

Json BaseRecord(const std::string& command, const RunConfig& cfg) {
  Json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["seed"] = cfg.common.seed;
  return j;
}

std::pair<std::string, std::string> ResolvePair(const PredictionStore& store,
                                                const std::string& pair) {
  if (pair.empty()) {
    if (store.Pairs().empty()) throw ValidationError("cli", "no --pair given and manifest has no pairs");
    return store.Pairs().front();
  }
  const auto colon = pair.find(':');
  if (colon == std::string::npos) throw ValidationError("cli", "--pair must be IND:OOD");
  std::pair<std::string, std::string> p{pair.substr(0, colon), pair.substr(colon + 1)};
  store.Dataset(p.first);
  store.Dataset(p.second);
  return p;
}

/// "m1+m2+m3" names the probability-averaged ensemble of those models.
EnsembleDef ParseModelSpec(const PredictionStore& store, const std::string& spec) {
  EnsembleDef def{spec, SplitList(spec, '+')};
  if (def.member_model_ids.empty()) throw ValidationError("cli", "empty model spec");
  for (const auto& id : def.member_model_ids) {
    if (!store.HasModel(id)) throw ValidationError("cli", "unknown model '" + id + "'");
  }
  return def;
}

ProbMatrix ProbsFor(const PredictionStore& store, const EnsembleDef& def, const std::string& ds) {
  if (def.member_model_ids.size() == 1) return store.Probs(def.member_model_ids.front(), ds);
  return store.EnsembleProbs(def, ds);
}

EnsembleDef MembersFor(const PredictionStore& store, const std::string& members) {
  EnsembleDef def;
  def.ensemble_id = "ensemble";
  def.member_model_ids = members.empty() ? store.ModelIds() : SplitList(members, ',');
  for (const auto& id : def.member_model_ids) {
    if (!store.HasModel(id)) throw ValidationError("cli", "unknown model '" + id + "'");
  }
  if (def.member_model_ids.size() < 2) throw ValidationError("cli", "need at least 2 members");
  return def;
}

DecompositionFamily ParseFamily(const std::string& f) {
  if (f == "quadratic") return DecompositionFamily::kQuadraticVariance;
  if (f == "entropy") return DecompositionFamily::kEntropyJsd;
  throw ValidationError("cli", "--family must be quadratic or entropy");
}

TrendMetric ParseTrendMetric(const std::string& m) {
  if (m == "01") return TrendMetric::kZeroOne;
  if (m == "nll") return TrendMetric::kNll;
  if (m == "brier") return TrendMetric::kBrier;
  if (m == "ece") return TrendMetric::kEce;
  if (m == "resce") return TrendMetric::kResce;
  throw ValidationError("cli", "unknown metric '" + m + "'");
}

MetricKind ParsePointMetric(const std::string& m) {
  if (m == "01") return MetricKind::kZeroOne;
  if (m == "nll") return MetricKind::kNll;
  if (m == "brier") return MetricKind::kBrier;
  throw ValidationError("cli", "per-point metric must be 01, nll or brier");
}

std::vector<double> ToStd(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

bool InNats(DecompositionFamily f) {
  return f == DecompositionFamily::kEntropyJsd || f == DecompositionFamily::kNllGap;
}

// ---------------------------------------------------------------- simulate

int CmdSimulate(const RunConfig& cfg) {
  PrepareOutputDir(cfg.common.out, cfg.common.force);
  SyntheticSpec spec = cfg.sim;
  spec.seed = cfg.common.seed;
  const SyntheticData data = Simulate(spec);
  WriteSynthetic(data, cfg.common.out);
  Json j = BaseRecord("simulate", cfg);
  j["inputs"] = {{"n_points", spec.n_points},
                 {"n_classes", spec.n_classes},
                 {"n_models", spec.n_models},
                 {"member_noise_scale", spec.member_noise_scale},
                 {"shift_strength", spec.shift_strength},
                 {"group_size", spec.group_size}};
  j["outputs"] = {{"manifest", "manifest.json"}};
  SaveRecord(fs::path(cfg.common.out) / "simulate.json", j);
  return 0;
}

// --------------------------------------------------------------- decompose

int CmdDecompose(const RunConfig& cfg) {
  const PredictionStore store = LoadStore(cfg.common.manifest);
  const EnsembleDef ens = MembersFor(store, cfg.members);
  std::vector<std::string> datasets;
  if (!cfg.common.pair.empty() || !store.Pairs().empty()) {
    const auto p = ResolvePair(store, cfg.common.pair);
    datasets = {p.first, p.second};
  } else {
    datasets = store.DatasetIds();
  }
  std::vector<DecompositionFamily> families;
  if (cfg.family == "all") {
    families = {DecompositionFamily::kQuadraticVariance, DecompositionFamily::kEntropyJsd};
  } else {
    families = {ParseFamily(cfg.family)};
  }
  families.push_back(DecompositionFamily::kBrierGap);
  families.push_back(DecompositionFamily::kNllGap);

  PrepareOutputDir(cfg.common.out, cfg.common.force);
  const fs::path out = cfg.common.out;
  const double unit = cfg.base2 ? 1.0 / std::log(2.0) : 1.0;

  Json j = BaseRecord("decompose", cfg);
  j["inputs"] = {{"manifest", fs::path(cfg.common.manifest).filename().string()},
                 {"datasets", datasets},
                 {"members", ens.member_model_ids}};
  j["decisions"] = {{"variance", "population (1/M)"},
                    {"probability_clamp", kLogClamp},
                    {"ece_bins", cfg.bins},
                    {"log_base", cfg.base2 ? "2" : "e"},
                    {"marginal_cells", 100}};
  j["results"] = Json::object();
  for (const auto& ds : datasets) {
    const DatasetInfo& info = store.Dataset(ds);
    const auto members = store.MemberProbs(ens, ds);
    const std::span<const ProbMatrix> span(members);
    const ProbMatrix ensemble = FormEnsemble(span);
    Json dj;
    dj["n"] = info.labels.size();
    dj["families"] = Json::object();
    for (const auto fam : families) {
      const DecompositionRecord rec = Decompose(fam, span, info.labels);
      const double u = InNats(fam) ? unit : 1.0;
      const VectorXd residual = rec.Residual();
      CsvWriter csv(out / ("decompose_" + ds + "_" + std::string(FamilyName(fam)) + ".csv"),
                    {"index", "total", "diversity", "avg_member", "residual"});
      for (Eigen::Index i = 0; i < rec.total.size(); ++i) {
        csv << static_cast<long>(i) << rec.total(i) * u << rec.diversity(i) * u
            << rec.avg_member(i) * u << residual(i) * u;
        csv.EndRow();
      }
      Json fj = {{"mean_total", rec.total.mean() * u},
                 {"mean_diversity", rec.diversity.mean() * u},
                 {"mean_avg_member", rec.avg_member.mean() * u},
                 {"max_abs_residual", rec.MaxAbsResidual() * u},
                 {"min_diversity", rec.diversity.minCoeff() * u}};
      if (fam == DecompositionFamily::kEntropyJsd) fj["kl_crosscheck"] = rec.kl_crosscheck * u;
      if (!rec.IsGapFamily()) {
        const Histogram h = MarginalAvgUncertainty(rec.avg_member, fam, info.n_classes);
        CsvWriter hc(out / ("marginal_" + ds + "_" + std::string(FamilyName(fam)) + ".csv"),
                     {"cell_lo", "cell_hi", "count"});
        for (std::size_t c = 0; c < h.counts.size(); ++c) {
          hc << (h.lo + c * h.CellWidth()) * u << (h.lo + (c + 1) * h.CellWidth()) * u
             << h.counts[c];
          hc.EndRow();
        }
      }
      dj["families"][std::string(FamilyName(fam))] = fj;
    }

    // Ensemble per-point metrics (long format) and aggregates.
    CsvWriter mc(out / ("metrics_" + ds + ".csv"), {"index", "metric", "value"});
    Json agg = Json::object();
    for (const auto kind : {MetricKind::kZeroOne, MetricKind::kNll, MetricKind::kBrier,
                            MetricKind::kEntropy, MetricKind::kQuadUncertainty}) {
      MetricVector mv = ComputeMetric(kind, ensemble, info.labels);
      if (cfg.base2 && (kind == MetricKind::kNll || kind == MetricKind::kEntropy)) {
        mv.values = ToBits(mv.values);
      }
      for (Eigen::Index i = 0; i < mv.values.size(); ++i) {
        mc << static_cast<long>(i) << std::string(MetricName(kind)) << mv.values(i);
        mc.EndRow();
      }
      agg[std::string(MetricName(kind))] = mv.Mean();
    }
    const CalibrationSummary cal = Calibration(ensemble, info.labels, cfg.bins);
    agg["ece"] = cal.ece;
    agg["resce"] = cal.resce;
    dj["ensemble_metrics"] = agg;
    CsvWriter cc(out / ("calibration_" + ds + ".csv"),
                 {"bin", "count", "confidence", "accuracy"});
    for (int b = 0; b < cal.n_bins; ++b) {
      cc << b << cal.bin_counts[b] << cal.bin_confidence[b] << cal.bin_accuracy[b];
      cc.EndRow();
    }
    Json per_model = Json::array();
    for (const auto& id : ens.member_model_ids) {
      const ProbMatrix& p = store.Probs(id, ds);
      for (const auto kind : {MetricKind::kZeroOne, MetricKind::kNll, MetricKind::kBrier}) {
        per_model.push_back({{"model", id},
                             {"dataset", ds},
                             {"metric", MetricName(kind)},
                             {"value", ComputeMetric(kind, p, info.labels).Mean()}});
      }
    }
    dj["member_metrics"] = per_model;
    j["results"][ds] = dj;
  }
  SaveRecord(out / "decompose.json", j);
  return 0;
}

// ------------------------------------------------------------- conditional

int CmdConditional(const RunConfig& cfg) {
  const PredictionStore store = LoadStore(cfg.common.manifest);
  const auto pair = ResolvePair(store, cfg.common.pair);
  const EnsembleDef ens = MembersFor(store, cfg.members);
  const DecompositionFamily fam = ParseFamily(cfg.family);
  const auto mi = store.MemberProbs(ens, pair.first);
  const auto mo = store.MemberProbs(ens, pair.second);
  JointSample ind = JointSamples(mi, fam, SampleSource::kInD);
  JointSample ood = JointSamples(mo, fam, SampleSource::kOOD);
  if (cfg.subsample > 0) {
    ind = Subsample(ind, cfg.subsample);
    ood = Subsample(ood, cfg.subsample);
  }
  PermutationOptions opt;
  opt.n_surrogates = cfg.surrogates;
  opt.seed = cfg.common.seed;
  opt.workers = cfg.workers;
  opt.mode = cfg.integral_d ? DStatMode::kIntegral : DStatMode::kRatioOfSums;
  const DStatResult res = PermutationTest(ind, ood, opt);

  PrepareOutputDir(cfg.common.out, cfg.common.force);
  const fs::path out = cfg.common.out;
  {
    CsvWriter csv(out / "curves.csv", {"x", "y_ind", "y_ood"});
    for (Eigen::Index g = 0; g < res.curve_ind.x_grid.size(); ++g) {
      csv << res.curve_ind.x_grid(g) << res.curve_ind.y_hat(g) << res.curve_ood.y_hat(g);
      csv.EndRow();
    }
  }
  // Conditional KDE grids on a shared 100 x 100 grid.
  const Bandwidth2 bw_ind = ScottBandwidth(ind), bw_ood = ScottBandwidth(ood);
  const double x_lo = std::min(ind.avg.minCoeff(), ood.avg.minCoeff());
  const double x_hi = std::max(ind.avg.maxCoeff(), ood.avg.maxCoeff());
  const double y_hi = std::max(ind.div.maxCoeff(), ood.div.maxCoeff());
  const VectorXd xg = Linspace(x_lo, x_hi, 100), yg = Linspace(0.0, y_hi, 100);
  const KdeGrid kde_ind = ConditionalGrid(KdeJoint(ind, xg, yg, bw_ind));
  const KdeGrid kde_ood = ConditionalGrid(KdeJoint(ood, xg, yg, bw_ood));
  {
    CsvWriter csv(out / "conditional_kde.csv", {"x", "y", "density_ind", "density_ood"});
    for (Eigen::Index a = 0; a < xg.size(); ++a) {
      for (Eigen::Index b = 0; b < yg.size(); ++b) {
        csv << xg(a) << yg(b) << kde_ind.density(a, b) << kde_ood.density(a, b);
        csv.EndRow();
      }
    }
  }
  Json j = BaseRecord("conditional", cfg);
  j["inputs"] = {{"manifest", fs::path(cfg.common.manifest).filename().string()},
                 {"pair", {pair.first, pair.second}},
                 {"family", FamilyName(fam)},
                 {"members", ens.member_model_ids},
                 {"n_ind", ind.size()},
                 {"n_ood", ood.size()},
                 {"subsample", cfg.subsample}};
  j["decisions"] = {{"krr_bandwidth", res.bandwidth},
                    {"krr_bandwidth_rule", "Scott hx of pooled sample"},
                    {"krr_ridge", res.ridge},
                    {"krr_ridge_rule", "1e-3 * population variance of pooled diversity"},
                    {"krr_solution", "raw ridge (not normalized weights)"},
                    {"krr_solver", "dense Cholesky up to " + std::to_string(kKrrDenseLimit) +
                                       " points, pivoted-Cholesky low rank above"},
                    {"grid", "100 points, pooled 1st-99th percentile, clipped to overlap"},
                    {"d_mode", cfg.integral_d ? "integral" : "ratio_of_sums"},
                    {"p_value_rule", "(#{d_s >= d} + 1) / (n + 1)"},
                    {"kde_bandwidth_ind", {bw_ind.hx, bw_ind.hy}},
                    {"kde_bandwidth_ood", {bw_ood.hx, bw_ood.hy}}};
  j["results"] = {{"d", res.d},
                  {"p_value", res.p_value},
                  {"n_surrogates", res.n_surrogates},
                  {"surrogate_d", res.surrogate_d},
                  {"mean_div_ind", ind.div.mean()},
                  {"mean_div_ood", ood.div.mean()}};
  SaveRecord(out / "dstat.json", j);

  const JointSample pi = Subsample(ind, 10000), po = Subsample(ood, 10000);
  SvgPlot plot("Diversity vs average member uncertainty (" + std::string(FamilyName(fam)) + ")",
               "average member uncertainty", "diversity");
  plot.Scatter(ToStd(pi.avg), ToStd(pi.div), "#1f77b4", "InD " + pair.first, 1.5, 0.3);
  plot.Scatter(ToStd(po.avg), ToStd(po.div), "#ff7f0e", "OOD " + pair.second, 1.5, 0.3);
  plot.Line(ToStd(res.curve_ind.x_grid), ToStd(res.curve_ind.y_hat), "#08306b", "E[div|avg] InD");
  plot.Line(ToStd(res.curve_ood.x_grid), ToStd(res.curve_ood.y_hat), "#7f2704", "E[div|avg] OOD");
  plot.Save(out / "conditional.svg", !cfg.common.no_timestamp);
  return 0;
}

// ------------------------------------------------------------------ trends

double LogitScale(double v) {
  const double p = std::clamp(v, 1e-6, 1.0 - 1e-6);
  return std::log(p / (1.0 - p));
}

int CmdTrends(const RunConfig& cfg) {
  const PredictionStore store = LoadStore(cfg.common.manifest);
  const auto pair = ResolvePair(store, cfg.common.pair);
  std::vector<TrendMetric> metrics;
  for (const auto& m : cfg.metrics.empty() ? std::vector<std::string>{"01", "nll", "brier", "ece", "resce"}
                                           : cfg.metrics) {
    metrics.push_back(ParseTrendMetric(m));
  }
  // Homogeneous ensembles: k-subsets within each model group.
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& id : store.ModelIds()) {
    if (!store.Group(id).empty()) groups[store.Group(id)].push_back(id);
  }
  std::vector<EnsembleDef> ensembles;
  std::vector<ModelClass> classes;
  for (const auto& [g, ids] : groups) {
    if (static_cast<int>(ids.size()) < cfg.ensemble_size) continue;
    for (auto& def : EnumerateHomogeneousEnsembles(ids, cfg.ensemble_size)) {
      ensembles.push_back(std::move(def));
      classes.push_back(ModelClass::kEnsemble);
    }
  }
  std::vector<std::string> warnings;
  if (cfg.hetero_bins > 0) {
    auto het = FormHeterogeneousEnsembles(store, pair.first, cfg.hetero_bins, cfg.ensemble_size,
                                          cfg.common.seed);
    for (auto& def : het.ensembles) {
      ensembles.push_back(std::move(def));
      classes.push_back(ModelClass::kHeterogeneous);
    }
    warnings = het.warnings;
  }
  TrendTable table = BuildTrendTable(store, ensembles, classes, metrics, pair, cfg.bins);
  if (cfg.logit_scale) {
    for (auto& p : table.points) {
      p.ind_value = LogitScale(p.ind_value);
      p.ood_value = LogitScale(p.ood_value);
    }
    table.rows.clear();
    for (const auto metric : metrics) {
      std::vector<TrendPoint> all, single, ens;
      for (const auto& p : table.points) {
        if (p.metric != metric) continue;
        all.push_back(p);
        (p.model_class == ModelClass::kSingle ? single : ens).push_back(p);
      }
      if (all.size() >= 3) table.rows.push_back({metric, "All", FitTrend(all)});
      if (single.size() >= 3) table.rows.push_back({metric, "Single Model", FitTrend(single)});
      if (ens.size() >= 3) table.rows.push_back({metric, "Ensemble", FitTrend(ens)});
    }
  }

  PrepareOutputDir(cfg.common.out, cfg.common.force);
  const fs::path out = cfg.common.out;
  Json j = BaseRecord("trends", cfg);
  j["inputs"] = {{"manifest", fs::path(cfg.common.manifest).filename().string()},
                 {"pair", {pair.first, pair.second}},
                 {"ensemble_size", cfg.ensemble_size},
                 {"hetero_bins", cfg.hetero_bins},
                 {"n_ensembles", ensembles.size()}};
  j["decisions"] = {{"axis_scaling", cfg.logit_scale ? "logit" : "none"},
                    {"standard_errors", "classical OLS"},
                    {"ece_bins", cfg.bins},
                    {"heterogeneous_binning", "equal-width over [min acc, max acc]"},
                    {"effective_robustness_sign", "predicted - observed (positive = robust)"},
                    {"ensemble_class", "homogeneous and heterogeneous ensembles"}};
  j["warnings"] = warnings;
  Json rows = Json::array();
  {
    CsvWriter csv(out / "trends.csv", {"metric", "class", "coefficient", "std_error",
                                       "t_statistic", "p_value", "r2", "n", "intercept"});
    for (const auto& r : table.rows) {
      csv << std::string(TrendMetricName(r.metric)) << r.model_class << r.fit.coefficient
          << r.fit.std_error << r.fit.t_statistic << r.fit.p_value << r.fit.r2 << r.fit.n
          << r.fit.intercept;
      csv.EndRow();
      rows.push_back({{"metric", TrendMetricName(r.metric)},
                      {"class", r.model_class},
                      {"coefficient", r.fit.coefficient},
                      {"std_error", r.fit.std_error},
                      {"t_statistic", r.fit.t_statistic},
                      {"p_value", r.fit.p_value},
                      {"r2", r.fit.r2},
                      {"n", r.fit.n},
                      {"intercept", r.fit.intercept}});
    }
  }
  j["results"] = {{"table", rows}};

  // Effective robustness against the single-model trend.
  CsvWriter pc(out / "points.csv",
               {"metric", "model_id", "class", "ind", "ood", "effective_robustness"});
  for (const auto metric : metrics) {
    const TrendRow* baseline = nullptr;
    for (const auto& r : table.rows) {
      if (r.metric == metric && r.model_class == "Single Model") baseline = &r;
    }
    SvgPlot plot("InD vs OOD " + std::string(TrendMetricName(metric)), "InD", "OOD");
    std::vector<double> sx, sy, ex, ey;
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& p : table.points) {
      if (p.metric != metric) continue;
      const double er = baseline ? EffectiveRobustness(p, baseline->fit) : NAN;
      pc << std::string(TrendMetricName(metric)) << p.model_id
         << std::string(ModelClassName(p.model_class)) << p.ind_value << p.ood_value << er;
      pc.EndRow();
      (p.model_class == ModelClass::kSingle ? sx : ex).push_back(p.ind_value);
      (p.model_class == ModelClass::kSingle ? sy : ey).push_back(p.ood_value);
      lo = std::min({lo, p.ind_value, p.ood_value});
      hi = std::max({hi, p.ind_value, p.ood_value});
    }
    plot.Scatter(sx, sy, "#1f77b4", "single models", 3.0, 0.8);
    plot.Scatter(ex, ey, "#d62728", "ensembles", 3.0, 0.8);
    for (const auto& r : table.rows) {
      if (r.metric != metric || r.model_class == "All") continue;
      plot.Line({lo, hi}, {r.fit.Predict(lo), r.fit.Predict(hi)},
                r.model_class == "Single Model" ? "#1f77b4" : "#d62728", r.model_class + " fit");
    }
    plot.Line({lo, hi}, {lo, hi}, "black", "y = x", true);
    plot.Save(out / ("trends_" + std::string(TrendMetricName(metric)) + ".svg"),
              !cfg.common.no_timestamp);
  }

  if (!ensembles.empty()) {
    try {
      const DiversityRatio dr = DiversityRatioCheck(store, ensembles, pair);
      j["results"]["diversity_ratio"] = {{"ratio", dr.ratio},
                                         {"c0", dr.c0},
                                         {"discrepancy", dr.discrepancy},
                                         {"mean_var_ind", dr.mean_var_ind},
                                         {"mean_var_ood", dr.mean_var_ood}};
    } catch (const Error& e) {
      j["results"]["diversity_ratio"] = {{"error", e.what()}};
    }
  }
  SaveRecord(out / "trends.json", j);
  return 0;
}

// ----------------------------------------------------------------- improve

int CmdImprove(const RunConfig& cfg) {
  const PredictionStore store = LoadStore(cfg.common.manifest);
  const auto pair = ResolvePair(store, cfg.common.pair);
  if (cfg.base.empty() || cfg.alt_a.empty() || cfg.alt_b.empty() || cfg.control.empty()) {
    throw ValidationError("cli", "improve needs --base, --alt-a, --alt-b and --control");
  }
  const EnsembleDef base = ParseModelSpec(store, cfg.base);
  const EnsembleDef alt_a = ParseModelSpec(store, cfg.alt_a);
  const EnsembleDef alt_b = ParseModelSpec(store, cfg.alt_b);
  const EnsembleDef control = ParseModelSpec(store, cfg.control);
  const MetricKind metric =
      ParsePointMetric(cfg.metrics.empty() ? std::string("brier") : cfg.metrics.front());

  PrepareOutputDir(cfg.common.out, cfg.common.force);
  const fs::path out = cfg.common.out;
  Json j = BaseRecord("improve", cfg);
  j["inputs"] = {{"manifest", fs::path(cfg.common.manifest).filename().string()},
                 {"pair", {pair.first, pair.second}},
                 {"base", cfg.base},
                 {"alt_a", cfg.alt_a},
                 {"alt_b", cfg.alt_b},
                 {"control", cfg.control},
                 {"metric", MetricName(metric)},
                 {"alpha", cfg.alpha},
                 {"subsample", cfg.subsample}};
  j["decisions"] = {{"mmd_samples", "{(delta_a, delta_b)} vs {(delta_a, delta_control)}"},
                    {"mmd_bandwidth", "median pairwise distance of pooled sample"},
                    {"mmd_threshold", "(4K/sqrt(m)) sqrt(ln(1/alpha)), K = 1"}};
  j["results"] = Json::object();
  std::vector<std::string> panels;
  for (const auto& ds : {pair.first, pair.second}) {
    const LabelVector& labels = store.Dataset(ds).labels;
    const ProbMatrix pb = ProbsFor(store, base, ds);
    ImprovementPair da = PerPointImprovement(pb, ProbsFor(store, alt_a, ds), labels, metric,
                                             cfg.base, cfg.alt_a);
    ImprovementPair db = PerPointImprovement(pb, ProbsFor(store, alt_b, ds), labels, metric,
                                             cfg.base, cfg.alt_b);
    ImprovementPair dc = PerPointImprovement(pb, ProbsFor(store, control, ds), labels, metric,
                                             cfg.base, cfg.control);
    VectorXd base_score = ComputeMetric(metric, pb, labels).values;
    if (cfg.subsample > 0 && da.delta.size() > cfg.subsample) {
      const Eigen::Index n = da.delta.size(), cap = cfg.subsample;
      auto take = [&](const VectorXd& v) {
        VectorXd s(cap);
        for (Eigen::Index k = 0; k < cap; ++k) s(k) = v(k * n / cap);
        return s;
      };
      da.delta = take(da.delta);
      db.delta = take(db.delta);
      dc.delta = take(dc.delta);
      base_score = take(base_score);
    }
    if (da.delta.size() > 20000) {
      std::cerr << "warning: MMD on " << da.delta.size()
                << " points per side is quadratic; consider --subsample\n";
    }
    const MmdTestResult mmd = ImprovementSimilarityTest(da, db, dc, cfg.alpha);
    Json dj = {{"n", da.delta.size()},
               {"pearson_r_a_b", PearsonR(da.delta, db.delta)},
               {"pearson_r_a_control", PearsonR(da.delta, dc.delta)},
               {"mean_delta_a", da.delta.mean()},
               {"mean_delta_b", db.delta.mean()},
               {"mean_delta_control", dc.delta.mean()},
               {"mmd",
                {{"statistic", mmd.statistic},
                 {"threshold", mmd.threshold},
                 {"alpha", mmd.alpha},
                 {"bandwidth", mmd.bandwidth},
                 {"m", mmd.m},
                 {"reject", mmd.reject},
                 {"formatted", mmd.Formatted()}}}};
    j["results"][ds] = dj;
    CsvWriter csv(out / ("improvement_" + ds + ".csv"),
                  {"index", "delta_a", "delta_b", "delta_control", "base_score"});
    for (Eigen::Index i = 0; i < da.delta.size(); ++i) {
      csv << static_cast<long>(i) << da.delta(i) << db.delta(i) << dc.delta(i) << base_score(i);
      csv.EndRow();
    }
    const double smax = std::max(base_score.maxCoeff(), 1e-12);
    std::vector<std::string> colors;
    for (Eigen::Index i = 0; i < base_score.size(); ++i) colors.push_back(ColorMap(base_score(i) / smax));
    SvgPlot plot(ds + ": per-point gains over " + cfg.base, "gain of " + cfg.alt_a,
                 "gain of " + cfg.alt_b);
    plot.ScatterColored(ToStd(da.delta), ToStd(db.delta), colors);
    panels.push_back(plot.Render(cfg.common.no_timestamp ? std::nullopt
                                                         : std::optional<std::string>(UtcTimestamp())));
  }
  SaveRecord(out / "improve.json", j);
  std::ofstream(out / "improve.svg") << ComposePanels(panels);
  return 0;
}

// ----------------------------------------------------------------- gp-demo

int CmdGpDemo(const RunConfig& cfg) {
  PrepareOutputDir(cfg.common.out, cfg.common.force);
  const fs::path out = cfg.common.out;
  const int bins = cfg.bins > 0 ? cfg.bins : 20;
  const GpExperiment ex = RunGpExperiment(cfg.common.seed, 25, 512, bins);
  {
    CsvWriter csv(out / "gp_predictions.csv", {"x", "mean", "post_var", "lik_var", "split"});
    for (const auto& p : ex.predictions) {
      csv << p.x << p.mean << p.posterior_variance << p.likelihood_variance
          << (p.x < 0.0 ? "OOD" : "InD");
      csv.EndRow();
    }
  }
  {
    CsvWriter csv(out / "gp_train.csv", {"x", "y"});
    for (Eigen::Index i = 0; i < ex.data.x.size(); ++i) {
      csv << ex.data.x(i) << ex.data.y(i);
      csv.EndRow();
    }
  }
  {
    CsvWriter csv(out / "gp_conditional.csv",
                  {"bin_lo", "bin_hi", "ind_count", "ind_mean_post_var", "ood_count",
                   "ood_mean_post_var"});
    for (int b = 0; b < bins; ++b) {
      csv << ex.table.bin_edges[b] << ex.table.bin_edges[b + 1] << ex.table.ind_counts[b]
          << ex.table.ind_mean[b] << ex.table.ood_counts[b] << ex.table.ood_mean[b];
      csv.EndRow();
    }
  }
  double ind_sum = 0, ood_sum = 0;
  long ind_n = 0, ood_n = 0, populated = 0, ordered = 0;
  for (const auto& p : ex.predictions) {
    (p.x < 0.0 ? ood_sum : ind_sum) += p.posterior_variance;
    ++(p.x < 0.0 ? ood_n : ind_n);
  }
  for (int b = 0; b < bins; ++b) {
    if (ex.table.ind_counts[b] && ex.table.ood_counts[b]) {
      ++populated;
      if (ex.table.ood_mean[b] > ex.table.ind_mean[b]) ++ordered;
    }
  }
  Json j = BaseRecord("gp-demo", cfg);
  j["inputs"] = {{"n_train", 25}, {"train_domain", {0.0, 5.0}}, {"eval_domain", {-5.0, 5.0}},
                 {"n_eval", 512}};
  j["decisions"] = {{"kernel", "RBF, lengthscale 1, signal variance 1, zero mean"},
                    {"noise", "sin^2(x) + 0.01"},
                    {"likelihood_bins", bins},
                    {"prior_sampling_jitter", 1e-8}};
  j["results"] = {{"mean_post_var_ind", ind_n ? ind_sum / ind_n : 0.0},
                  {"mean_post_var_ood", ood_n ? ood_sum / ood_n : 0.0},
                  {"bins_populated_both", populated},
                  {"bins_ood_greater", ordered}};
  SaveRecord(out / "gp.json", j);

  std::vector<double> xi, vi, xo, vo, lx, lv, cx_i, cy_i, cx_o, cy_o;
  for (const auto& p : ex.predictions) {
    (p.x < 0.0 ? xo : xi).push_back(p.x);
    (p.x < 0.0 ? vo : vi).push_back(p.posterior_variance);
    lx.push_back(p.x);
    lv.push_back(p.likelihood_variance);
  }
  for (int b = 0; b < bins; ++b) {
    if (ex.table.ind_counts[b]) cx_i.push_back(ex.table.bin_centers[b]), cy_i.push_back(ex.table.ind_mean[b]);
    if (ex.table.ood_counts[b]) cx_o.push_back(ex.table.bin_centers[b]), cy_o.push_back(ex.table.ood_mean[b]);
  }
  const auto stamp = cfg.common.no_timestamp ? std::nullopt : std::optional<std::string>(UtcTimestamp());
  SvgPlot left("GP predictive uncertainty", "x", "variance");
  left.Line(xi, vi, "#1f77b4", "posterior variance (InD)");
  left.Line(xo, vo, "#ff7f0e", "posterior variance (OOD)");
  left.Line(lx, lv, "gray", "likelihood variance", true);
  left.Scatter(ToStd(ex.data.x), std::vector<double>(ex.data.x.size(), 0.0), "black", "training inputs", 3.0, 0.9);
  SvgPlot right("E[posterior var | likelihood var]", "likelihood variance", "posterior variance");
  right.Line(cx_i, cy_i, "#1f77b4", "InD");
  right.Line(cx_o, cy_o, "#ff7f0e", "OOD");
  std::ofstream(out / "gp.svg") << ComposePanels({left.Render(stamp), right.Render(stamp)});
  return 0;
}

// ------------------------------------------------------------------ report

int CmdReport(const RunConfig& cfg) {
  const Json index = IndexRunDirectory(cfg.common.out);
  std::cout << "indexed " << index["results"].size() << " result files into "
            << (fs::path(cfg.common.out) / "index.json").string() << "\n";
  return 0;
}

}  // namespace

int RunCli(const std::vector<std::string>& args) {
  CLI::App app{"Ensemble diversity and uncertainty diagnostics", "ensdiv"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto add_common = [&](CLI::App* sub, bool needs_manifest) {
    if (needs_manifest) sub->add_option("--manifest", cfg.common.manifest, "manifest.json path")->required();
    sub->add_option("--out", cfg.common.out, "output directory")->required();
    sub->add_option("--seed", cfg.common.seed, "random seed");
    sub->add_flag("--force", cfg.common.force, "allow writing into a non-empty directory");
    sub->add_flag("--no-timestamp", cfg.common.no_timestamp, "omit timestamps from SVG output");
  };

  auto* decompose = app.add_subcommand("decompose", "per-point uncertainty and score decompositions");
  add_common(decompose, true);
  decompose->add_option("--pair", cfg.common.pair, "IND:OOD dataset ids");
  decompose->add_option("--members", cfg.members, "comma-separated member model ids");
  decompose->add_option("--family", cfg.family, "quadratic, entropy or all")->capture_default_str();
  decompose->add_option("--bins", cfg.bins, "calibration bins")->capture_default_str();
  decompose->add_flag("--base2", cfg.base2, "report entropy/NLL in bits");
  cfg.family = "all";

  auto* conditional = app.add_subcommand("conditional", "conditional diversity d-statistic and permutation test");
  add_common(conditional, true);
  conditional->add_option("--pair", cfg.common.pair, "IND:OOD dataset ids");
  conditional->add_option("--members", cfg.members, "comma-separated member model ids");
  conditional->add_option("--family", cfg.family, "quadratic or entropy");
  conditional->add_option("--surrogates", cfg.surrogates, "permutation surrogates")->capture_default_str();
  conditional->add_option("--subsample", cfg.subsample, "cap on points per sample (0 = off)");
  conditional->add_option("--workers", cfg.workers, "worker threads for surrogates");
  conditional->add_flag("--integral-d", cfg.integral_d, "use the pointwise-relative d definition");

  auto* trends = app.add_subcommand("trends", "InD vs OOD trend fits");
  add_common(trends, true);
  trends->add_option("--pair", cfg.common.pair, "IND:OOD dataset ids");
  trends->add_option("--metric", cfg.metrics, "01, nll, brier, ece, resce (repeatable)");
  trends->add_option("--bins", cfg.bins, "calibration bins")->capture_default_str();
  trends->add_option("--ensemble-size", cfg.ensemble_size, "members per ensemble")->capture_default_str();
  trends->add_option("--hetero-bins", cfg.hetero_bins, "accuracy bins for heterogeneous ensembles (0 = off)");
  trends->add_flag("--logit-scale", cfg.logit_scale, "fit on logit-scaled axes");

  auto* improve = app.add_subcommand("improve", "per-point improvement correlation and MMD test");
  add_common(improve, true);
  improve->add_option("--pair", cfg.common.pair, "IND:OOD dataset ids");
  improve->add_option("--metric", cfg.metrics, "01, nll or brier");
  improve->add_option("--base", cfg.base, "base model (m or m1+m2 for an ensemble)");
  improve->add_option("--alt-a", cfg.alt_a, "first alternative");
  improve->add_option("--alt-b", cfg.alt_b, "second alternative");
  improve->add_option("--control", cfg.control, "control replacing --alt-b");
  improve->add_option("--alpha", cfg.alpha, "test level")->capture_default_str();
  improve->add_option("--subsample", cfg.subsample, "cap on points (0 = off)");

  auto* gp = app.add_subcommand("gp-demo", "Gaussian-process reference experiment");
  add_common(gp, false);
  gp->add_option("--bins", cfg.bins, "likelihood-variance bins");

  auto* simulate = app.add_subcommand("simulate", "write a synthetic prediction store");
  add_common(simulate, false);
  simulate->add_option("--points", cfg.sim.n_points)->capture_default_str();
  simulate->add_option("--classes", cfg.sim.n_classes)->capture_default_str();
  simulate->add_option("--models", cfg.sim.n_models)->capture_default_str();
  simulate->add_option("--group-size", cfg.sim.group_size)->capture_default_str();
  simulate->add_option("--noise", cfg.sim.member_noise_scale)->capture_default_str();
  simulate->add_option("--shift", cfg.sim.shift_strength)->capture_default_str();

  auto* report = app.add_subcommand("report", "index all JSON results of a run directory");
  report->add_option("--out", cfg.common.out, "run directory")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  // gp-demo uses 20 likelihood bins unless --bins was given.
  if (gp->parsed() && gp->count("--bins") == 0) cfg.bins = 20;
  if (conditional->parsed() && conditional->count("--family") == 0) cfg.family = "quadratic";

  try {
    if (decompose->parsed()) return CmdDecompose(cfg);
    if (conditional->parsed()) return CmdConditional(cfg);
    if (trends->parsed()) return CmdTrends(cfg);
    if (improve->parsed()) return CmdImprove(cfg);
    if (gp->parsed()) return CmdGpDemo(cfg);
    if (simulate->parsed()) return CmdSimulate(cfg);
    if (report->parsed()) return CmdReport(cfg);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::kNumerical ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace ensdiv
