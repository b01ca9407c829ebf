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

#include <algorithm>
#include <cmath>

#include "ensdiv/decomposition.hpp"
#include "ensdiv/random.hpp"
#include "oracles.hpp"

using namespace ensdiv;

namespace {

using Members = std::vector<ProbMatrix>;

std::span<const ProbMatrix> Span(const Members& m) { return std::span<const ProbMatrix>(m); }

Members OneHotPair() { return {ProbMatrix{{1.0, 0.0}}, ProbMatrix{{0.0, 1.0}}}; }

LabelVector Label(int y) {
  LabelVector v(1);
  v << y;
  return v;
}

}  // namespace

TEST_CASE("variance diversity") {
  const Members same = {ProbMatrix{{0.3, 0.7}}, ProbMatrix{{0.3, 0.7}}};
  CHECK(VarianceDiversity(Span(same))(0) == 0.0);
  CHECK(VarianceDiversity(Span(OneHotPair()))(0) == doctest::Approx(0.5));
  const Members close = {ProbMatrix{{0.7, 0.3}}, ProbMatrix{{0.5, 0.5}}};
  CHECK(VarianceDiversity(Span(close))(0) == doctest::Approx(0.02));
  CHECK_THROWS_AS(VarianceDiversity(Span(Members{ProbMatrix{{1.0, 0.0}}})), Error);
}

TEST_CASE("jsd diversity") {
  CHECK(JsdDiversity(Span(OneHotPair()))(0) == doctest::Approx(std::log(2.0)));
  const Members m = {ProbMatrix{{0.9, 0.1}}, ProbMatrix{{0.5, 0.5}}};
  CHECK(JsdDiversity(Span(m))(0) == doctest::Approx(0.10180).epsilon(1e-4));
  const Members same = {ProbMatrix{{0.3, 0.7}}, ProbMatrix{{0.3, 0.7}}};
  CHECK(std::abs(JsdDiversity(Span(same))(0)) < 1e-15);
  CHECK(MeanKlToEnsemble(Span(same))(0) == 0.0);
}

TEST_CASE("quadratic and entropy decompositions on one-hot pairs") {
  const DecompositionRecord q = DecomposeQuadratic(Span(OneHotPair()));
  CHECK(q.total(0) == doctest::Approx(0.5));
  CHECK(q.diversity(0) == doctest::Approx(0.5));
  CHECK(q.avg_member(0) == 0.0);
  const DecompositionRecord e = DecomposeEntropy(Span(OneHotPair()));
  CHECK(e.total(0) == doctest::Approx(std::log(2.0)));
  CHECK(e.diversity(0) == doctest::Approx(std::log(2.0)));
  CHECK(e.avg_member(0) == 0.0);
}

TEST_CASE("score gaps") {
  const DecompositionRecord b = BrierJensenGap(Span(OneHotPair()), Label(0));
  CHECK(b.avg_member(0) == doctest::Approx(1.0));
  CHECK(b.total(0) == doctest::Approx(0.5));
  CHECK(b.avg_member(0) - b.total(0) == doctest::Approx(b.diversity(0)));

  const Members lik = {ProbMatrix{{0.8, 0.2}}, ProbMatrix{{0.2, 0.8}}};
  const DecompositionRecord n = NllJensenGap(Span(lik), Label(0));
  CHECK(n.total(0) == doctest::Approx(0.69315).epsilon(1e-5));
  CHECK(n.avg_member(0) == doctest::Approx(0.91629).epsilon(1e-5));
  CHECK(n.diversity(0) == doctest::Approx(0.22314).epsilon(1e-4));

  const Members equal = {ProbMatrix{{0.6, 0.4, 0.0}}, ProbMatrix{{0.6, 0.1, 0.3}}};
  CHECK(std::abs(NllJensenGap(Span(equal), Label(0)).diversity(0)) < 1e-15);
}

TEST_CASE("random ensembles against loop oracles") {
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 2 + static_cast<int>(rng.Index(7));
    const int c = 2 + static_cast<int>(rng.Index(19));
    const int n = 8;
    const Members members = oracle::RandomMembers(rng, m, n, c);
    const LabelVector y = oracle::RandomLabels(rng, n, c);
    const DecompositionRecord q = DecomposeQuadratic(Span(members));
    const DecompositionRecord e = DecomposeEntropy(Span(members));
    const DecompositionRecord b = BrierJensenGap(Span(members), y);
    const DecompositionRecord l = NllJensenGap(Span(members), y);
    for (int i = 0; i < n; ++i) {
      std::vector<oracle::Row> rows;
      for (const auto& p : members) rows.push_back(oracle::RowOf(p, i));
      const oracle::Row avg = oracle::Average(rows);
      double mean_h = 0.0, mean_kl = 0.0, mean_b = 0.0, mean_nll = 0.0, lik_sum = 0.0;
      for (const auto& r : rows) {
        mean_h += oracle::Entropy(r) / m;
        mean_kl += oracle::Kl(r, avg) / m;
        mean_b += oracle::Brier(r, y(i)) / m;
        const double lik = std::max(r[y(i)], 1e-12);
        mean_nll -= std::log(lik) / m;
        lik_sum += lik;
      }
      oracle::Row q_norm, uniform(static_cast<std::size_t>(m), 1.0 / m);
      for (const auto& r : rows) q_norm.push_back(std::max(r[y(i)], 1e-12) / lik_sum);

      CHECK(std::abs(q.diversity(i) - oracle::Variance(rows)) < 1e-12);
      CHECK(std::abs(q.total(i) - oracle::QuadUnc(avg)) < 1e-12);
      CHECK(std::abs(e.diversity(i) - mean_kl) < 1e-12);
      CHECK(std::abs(e.avg_member(i) - mean_h) < 1e-12);
      CHECK(std::abs(b.total(i) - oracle::Brier(avg, y(i))) < 1e-12);
      CHECK(std::abs(b.avg_member(i) - mean_b) < 1e-12);
      CHECK(std::abs(l.avg_member(i) - mean_nll) < 1e-10);
      CHECK(std::abs(l.diversity(i) - oracle::Kl(uniform, q_norm)) < 1e-10);
    }
    CHECK(q.MaxAbsResidual() < 1e-12);
    CHECK(e.MaxAbsResidual() < 1e-12);
    CHECK(e.kl_crosscheck < 1e-10);
    CHECK(b.MaxAbsResidual() < 1e-12);
    CHECK(l.MaxAbsResidual() < 1e-10);
  }
}

TEST_CASE("float members decompose too") {
  Rng rng(8);
  const Members d = oracle::RandomMembers(rng, 3, 10, 5);
  std::vector<ProbMatrixT<float>> f;
  for (const auto& m : d) f.push_back(m.cast<float>());
  const auto rec = DecomposeQuadratic(std::span<const ProbMatrixT<float>>(f));
  CHECK(rec.MaxAbsResidual() < 1e-5f);
  CHECK((rec.diversity.cast<double>() - VarianceDiversity(Span(d))).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("marginal average uncertainty") {
  VectorXd zeros = VectorXd::Zero(30);
  Histogram h = MarginalAvgUncertainty(zeros, DecompositionFamily::kQuadraticVariance, 10);
  CHECK(h.counts.front() == 30);

  VectorXd uniform = VectorXd::Constant(20, 0.9);
  h = MarginalAvgUncertainty(uniform, DecompositionFamily::kQuadraticVariance, 10);
  long at = -1;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    if (h.counts[i] == 20) at = static_cast<long>(i);
  }
  REQUIRE(at >= 0);
  CHECK(std::abs(h.CellCenter(static_cast<std::size_t>(at)) - 0.9) <= h.CellWidth());

  VectorXd mixed(50);
  mixed << VectorXd::Zero(30), VectorXd::Constant(20, 0.9);
  h = MarginalAvgUncertainty(mixed, DecompositionFamily::kQuadraticVariance, 10);
  CHECK(h.counts.front() == 30);
  CHECK(h.counts[static_cast<std::size_t>(at)] == 20);

  h = MarginalAvgUncertainty(VectorXd::Constant(4, std::log(10.0)), DecompositionFamily::kEntropyJsd, 10);
  CHECK(h.counts.back() == 4);
}
