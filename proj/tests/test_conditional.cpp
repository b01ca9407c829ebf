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

#include "ensdiv/conditional_diversity.hpp"
#include "ensdiv/random.hpp"
#include "oracles.hpp"

using namespace ensdiv;

namespace {

JointSample Sample(const VectorXd& x, const VectorXd& y) { return JointSample{x, y}; }

JointSample Noisy(Rng& rng, int n, double shift) {
  JointSample s{VectorXd(n), VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    s.avg(i) = rng.Uniform();
    s.div(i) = 0.2 * s.avg(i) * (1.0 - s.avg(i)) + 0.02 * rng.Normal() + shift;
  }
  return s;
}

double Trapezoid2(const KdeGrid& g) {
  double total = 0.0;
  for (Eigen::Index i = 0; i + 1 < g.x_grid.size(); ++i) {
    for (Eigen::Index j = 0; j + 1 < g.y_grid.size(); ++j) {
      const double cell = (g.x_grid(i + 1) - g.x_grid(i)) * (g.y_grid(j + 1) - g.y_grid(j));
      total += cell * 0.25 *
               (g.density(i, j) + g.density(i + 1, j) + g.density(i, j + 1) + g.density(i + 1, j + 1));
    }
  }
  return total;
}

ConditionalCurve Curve(const VectorXd& y) {
  return ConditionalCurve{Linspace(0.0, 1.0, y.size()), y, 0.1, 0.0};
}

}  // namespace

TEST_CASE("joint samples") {
  const std::vector<ProbMatrix> same = {ProbMatrix{{0.2, 0.8}}, ProbMatrix{{0.2, 0.8}}};
  CHECK(JointSamples(same, DecompositionFamily::kQuadraticVariance).div(0) == 0.0);
  const std::vector<ProbMatrix> onehot = {ProbMatrix{{1.0, 0.0}}, ProbMatrix{{0.0, 1.0}}};
  const JointSample s = JointSamples(onehot, DecompositionFamily::kQuadraticVariance);
  CHECK(s.avg(0) == 0.0);
  CHECK(s.div(0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(JointSamples(onehot, DecompositionFamily::kBrierGap), Error);

  JointSample big{Linspace(0, 1, 10), Linspace(0, 1, 10)};
  CHECK(Subsample(big, 4).size() <= 4);
  CHECK(Subsample(big, 20).size() == 10);
}

TEST_CASE("scott bandwidth") {
  const int n = 1000000;
  VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = i % 2 ? 1.0 : -1.0;
  x /= SampleStd(x);
  const Bandwidth2 h = ScottBandwidth(Sample(x, 3.0 * x));
  CHECK(h.hx == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(h.hy == doctest::Approx(0.3).epsilon(1e-9));

  Rng rng(4);
  VectorXd a(50);
  for (int i = 0; i < 50; ++i) a(i) = rng.Normal();
  CHECK(ScottBandwidth(Sample(2.0 * a, a)).hx == doctest::Approx(2.0 * ScottBandwidth(Sample(a, a)).hx));
  CHECK_THROWS_AS(ScottBandwidth(Sample(VectorXd::Constant(5, 1.0), a.head(5))), Error);
  CHECK_THROWS_AS(ScottBandwidth(Sample(a.head(1), a.head(1))), Error);
}

TEST_CASE("kde") {
  const Bandwidth2 h{0.1, 0.05};
  const VectorXd gx = Linspace(0.0, 1.0, 41);
  const VectorXd gy = Linspace(0.0, 1.0, 41);
  const KdeGrid one = KdeJoint(Sample(VectorXd::Constant(1, 0.31), VectorXd::Constant(1, 0.62)), gx, gy, h);
  Eigen::Index ix, iy;
  one.density.maxCoeff(&ix, &iy);
  CHECK(gx(ix) == doctest::Approx(0.3));
  CHECK(gy(iy) == doctest::Approx(0.625));

  Rng rng(12);
  JointSample s{VectorXd(300), VectorXd(300)};
  for (int i = 0; i < 300; ++i) {
    s.avg(i) = rng.Normal();
    s.div(i) = 0.5 * s.avg(i) + 0.3 * rng.Normal();
  }
  const Bandwidth2 bw = ScottBandwidth(s);
  const KdeGrid g = KdeJoint(s, Linspace(s.avg.minCoeff() - 5 * bw.hx, s.avg.maxCoeff() + 5 * bw.hx, 200),
                             Linspace(s.div.minCoeff() - 5 * bw.hy, s.div.maxCoeff() + 5 * bw.hy, 200), bw);
  CHECK(std::abs(Trapezoid2(g) - 1.0) < 0.02);

  JointSample moved{s.avg.array() + 2.0, s.div.array() - 1.0};
  const KdeGrid g2 = KdeJoint(moved, g.x_grid.array() + 2.0, g.y_grid.array() - 1.0, bw);
  CHECK((g2.density - g.density).cwiseAbs().maxCoeff() < 1e-9 * g.density.maxCoeff());
}

TEST_CASE("conditional grid") {
  KdeGrid g{Linspace(0, 1, 3), Linspace(0, 1, 4), MatrixXd(3, 4), {}, {}};
  g.density << 0.25, 0.25, 0.25, 0.25,  //
      2.0, 2.0, 2.0, 2.0,               //
      0.0, 0.0, 0.0, 0.0;
  const KdeGrid c = ConditionalGrid(g);
  CHECK(c.density.row(0) == g.density.row(0));
  CHECK((c.density.row(1).array() - 0.25).abs().maxCoeff() < 1e-15);
  CHECK(c.density.row(2).isZero());
  REQUIRE(c.empty_column.size() == 3);
  CHECK_FALSE(c.empty_column[0]);
  CHECK(c.empty_column[2]);
}

TEST_CASE("kernel ridge regression") {
  const VectorXd x = Linspace(0.0, 1.0, 200);
  const VectorXd eval = Linspace(0.1, 0.9, 50);
  const ConditionalCurve flat =
      KrrConditionalExpectation(x, VectorXd::Constant(200, 0.7), 0.1, 1e-12, eval);
  CHECK((flat.y_hat.array() - 0.7).abs().maxCoeff() < 1e-6);

  const VectorXd dense = Linspace(0.0, 1.0, 1000);
  const ConditionalCurve line = KrrConditionalExpectation(dense, dense, 0.05, 1e-6, eval);
  CHECK((line.y_hat - eval).cwiseAbs().maxCoeff() < 0.02);

  CHECK_THROWS_AS(KrrConditionalExpectation(x, x, 0.0, 1e-3, eval), Error);
  CHECK_THROWS_AS(KrrConditionalExpectation(x, x.head(10), 0.1, 1e-3, eval), Error);
}

TEST_CASE("kernel ridge regression is invariant to duplicating the data") {
  Rng rng(21);
  for (const int n : {150, 450}) {
    const JointSample s = Noisy(rng, n, 0.0);
    VectorXd x2(2 * n), y2(2 * n);
    x2 << s.avg, s.avg;
    y2 << s.div, s.div;
    const VectorXd eval = Linspace(0.05, 0.95, 40);
    for (const KrrSolver solver : {KrrSolver::kDense, KrrSolver::kLowRank}) {
      const ConditionalCurve a = KrrConditionalExpectation(s.avg, s.div, 0.08, 1e-4, eval, solver);
      const ConditionalCurve b = KrrConditionalExpectation(x2, y2, 0.08, 1e-4, eval, solver);
      CHECK((a.y_hat - b.y_hat).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("low-rank and dense solvers agree") {
  Rng rng(22);
  for (const int n : {100, 500, 1200}) {
    const JointSample s = Noisy(rng, n, 0.0);
    const double h = ScottBandwidth(s).hx;
    const double ridge = DefaultRidge(s.div);
    const VectorXd eval = Linspace(0.02, 0.98, 100);
    const ConditionalCurve dense = KrrConditionalExpectation(s.avg, s.div, h, ridge, eval, KrrSolver::kDense);
    const ConditionalCurve low = KrrConditionalExpectation(s.avg, s.div, h, ridge, eval, KrrSolver::kLowRank);
    CHECK((dense.y_hat - low.y_hat).cwiseAbs().maxCoeff() < 1e-8);

    const PivotedCholesky pc = GaussianPivotedCholesky(s.avg, h);
    CHECK(pc.residual <= 1e-13);
    CHECK(pc.factor.cols() < n);
    MatrixXd k(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        k(i, j) = std::exp(-(s.avg(i) - s.avg(j)) * (s.avg(i) - s.avg(j)) / (2.0 * h * h));
      }
    }
    CHECK((k - pc.factor * pc.factor.transpose()).cwiseAbs().maxCoeff() < 1e-11);
  }
}

TEST_CASE("d statistic") {
  const VectorXd base = Linspace(1.0, 2.0, 20);
  CHECK(DStatistic(Curve(base), Curve(base)) == 0.0);
  CHECK(DStatistic(Curve(base), Curve(1.1 * base)) == doctest::Approx(0.1));
  CHECK(DStatistic(Curve(base), Curve(1.1 * base), DStatMode::kIntegral) == doctest::Approx(0.1));
  VectorXd bumped = VectorXd::Ones(20);
  bumped.head(2).array() += 1.0;
  CHECK(DStatistic(Curve(VectorXd::Ones(20)), Curve(bumped)) == doctest::Approx(0.1));
  CHECK(DStatistic(Curve(VectorXd::Ones(20)), Curve(bumped), DStatMode::kIntegral) == doctest::Approx(0.1));
}

TEST_CASE("percentile and grid") {
  CHECK(Percentile({4.0, 1.0, 3.0, 2.0}, 50) == doctest::Approx(2.5));
  CHECK(Percentile({4.0, 1.0, 3.0, 2.0}, 0) == 1.0);
  CHECK(Percentile({4.0, 1.0, 3.0, 2.0}, 100) == 4.0);
  const VectorXd a = Linspace(0.0, 1.0, 101);
  const VectorXd b = Linspace(2.0, 3.0, 101);
  VectorXd pooled(202);
  pooled << a, b;
  CHECK_THROWS_AS(PairGrid(pooled, a, b, 50), Error);
}

TEST_CASE("permutation test") {
  Rng rng(31);
  const JointSample ind = Noisy(rng, 300, 0.0);
  PermutationOptions opt;
  opt.n_surrogates = 50;
  opt.seed = 3;

  const DStatResult same = PermutationTest(ind, ind, opt);
  CHECK(std::abs(same.d) < 1e-12);
  CHECK(same.p_value >= 1.0 / 51.0);
  CHECK(same.p_value > 0.3);

  JointSample shifted = ind;
  shifted.div.array() += 5.0 * SampleStd(ind.div);
  const DStatResult far = PermutationTest(ind, shifted, opt);
  CHECK(far.p_value == doctest::Approx(1.0 / 51.0));
  CHECK(far.d > 1.0);

  const JointSample ood = Noisy(rng, 250, 0.0);
  opt.workers = 1;
  const DStatResult one = PermutationTest(ind, ood, opt);
  opt.workers = 3;
  const DStatResult three = PermutationTest(ind, ood, opt);
  CHECK(one.surrogate_d == three.surrogate_d);
  CHECK(one.p_value == three.p_value);
  CHECK(one.d == three.d);
}
