// Copyright 2026 The panelforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>
#include <random>

#include "panelforge/error.hpp"
#include "panelforge/sem/fit.hpp"
#include "panelforge/sem/model.hpp"
#include "panelforge/sem/moments.hpp"
#include "panelforge/stats.hpp"
#include "support.hpp"

using namespace panelforge;
using namespace panelforge::sem;

namespace {

SampleMoments moments_of(const ImpliedMoments& im, const std::vector<std::string>& names, double n) {
  SampleMoments s;
  s.names = names;
  s.cov = im.sigma;
  s.mean = im.mu;
  s.n = n;
  return s;
}

CovarianceModel regression_model() {
  CovarianceModel m;
  m.add_observed("x");
  m.add_observed("y");
  m.path("x", "y", free("b"));
  m.variance("x", free("vx"));
  m.variance("y", free("ve"));
  m.mean("x", free("mx"));
  m.mean("y", free("a"));
  return m;
}

}  // namespace

TEST_CASE("implied moments of a zero-path model are the exogenous block") {
  CovarianceModel m;
  m.add_observed("a");
  m.add_observed("b");
  m.add_latent("l");
  m.variance("a", fixed(2.0));
  m.variance("b", fixed(3.0));
  m.covariance("a", "b", fixed(0.5));
  m.variance("l", fixed(7.0));
  m.mean("a", fixed(1.0));
  const auto im = implied_moments(m, Eigen::VectorXd());
  CHECK(im.sigma(0, 0) == 2.0);
  CHECK(im.sigma(1, 1) == 3.0);
  CHECK(im.sigma(0, 1) == 0.5);
  CHECK(im.mu(0) == 1.0);
  CHECK(im.mu(1) == 0.0);
}

TEST_CASE("single path y = 0.5 x") {
  auto m = regression_model();
  Eigen::VectorXd theta(5);
  // parameter order follows first appearance: b, vx, ve, mx, a
  theta << 0.5, 1.0, 1.0, 0.0, 0.0;
  const auto im = implied_moments(m, theta);
  CHECK(im.sigma(1, 1) == doctest::Approx(1.25).epsilon(1e-14));
  CHECK(im.sigma(0, 1) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("cyclic paths are rejected") {
  CovarianceModel m;
  m.add_observed("a");
  m.add_observed("b");
  m.path("a", "b", free("x"));
  m.path("b", "a", free("y"));
  CHECK_THROWS_AS(m.validate(), SpecError);
}

TEST_CASE("implied covariance matches simulation of a random recursive model") {
  std::mt19937_64 rng(11);
  auto rm = testing::random_model(5, rng);
  const auto im = implied_moments(rm.model, rm.theta);
  // Simulate the structural equations directly, in variable order.
  const auto mats = rm.model.matrices(rm.theta);
  const int n = 1000000;
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(5, 5);
  Eigen::VectorXd mean_sum = Eigen::VectorXd::Zero(5);
  Eigen::VectorXd v(5);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < 5; ++k) {
      v(k) = mats.means(k) + std::sqrt(mats.covariance(k, k)) * z(rng);
      for (int j = 0; j < k; ++j) v(k) += mats.paths(k, j) * v(j);
    }
    mean_sum += v;
    sum += v * v.transpose();
  }
  const Eigen::VectorXd mean = mean_sum / n;
  const Eigen::MatrixXd cov = sum / n - mean * mean.transpose();
  for (int a = 0; a < 5; ++a) {
    for (int b = 0; b < 5; ++b) {
      // sd of a sample covariance: sqrt((s_aa s_bb + s_ab^2) / n)
      const double sd = std::sqrt((im.sigma(a, a) * im.sigma(b, b) + im.sigma(a, b) * im.sigma(a, b)) / n);
      CHECK(std::fabs(cov(a, b) - im.sigma(a, b)) < 3.5 * sd);
    }
    CHECK(std::fabs(mean(a) - im.mu(a)) < 3.5 * std::sqrt(im.sigma(a, a) / n));
  }
}

TEST_CASE("discrepancy values") {
  SUBCASE("F(S, S) = 0") {
    std::mt19937_64 rng(3);
    auto rm = testing::random_model(4, rng);
    const auto im = implied_moments(rm.model, rm.theta);
    const auto s = moments_of(im, rm.model.observed_names(), 100);
    CHECK(std::fabs(ml_discrepancy(s, rm.model, rm.theta)) < 1e-12);
  }
  SUBCASE("scalar case") {
    CovarianceModel m;
    m.add_observed("x");
    m.variance("x", free("v"));
    m.mean("x", fixed(0.0));
    SampleMoments s;
    s.names = {"x"};
    s.cov = Eigen::MatrixXd::Constant(1, 1, 2.0);
    s.mean = Eigen::VectorXd::Zero(1);
    s.n = 10;
    Eigen::VectorXd theta(1);
    theta << 1.0;
    CHECK(ml_discrepancy(s, m, theta) == doctest::Approx(std::log(0.5) + 1.0).epsilon(1e-12));
    CHECK(ml_discrepancy(s, m, theta) == doctest::Approx(0.30685).epsilon(1e-5));
  }
  SUBCASE("nonpositive definite sigma signals an error") {
    auto m = regression_model();
    Eigen::VectorXd theta(5);
    theta << 0.5, -1.0, 1.0, 0.0, 0.0;
    SampleMoments s;
    s.names = {"x", "y"};
    s.cov = Eigen::MatrixXd::Identity(2, 2);
    s.mean = Eigen::VectorXd::Zero(2);
    s.n = 10;
    CHECK_THROWS_AS(ml_discrepancy(s, m, theta), NumericalError);
  }
}

TEST_CASE("analytic gradient matches central differences on 20 random models") {
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < 20; ++rep) {
    auto rm = testing::random_model(3 + rep % 4, rng, rep % 2 == 1);
    // Moments from a perturbed parameter so the gradient is not zero.
    Eigen::VectorXd other = rm.theta;
    for (Eigen::Index k = 0; k < other.size(); ++k) {
      if (!rm.model.parameters()[static_cast<std::size_t>(k)].variance) other(k) += 0.2;
    }
    const auto s = moments_of(implied_moments(rm.model, other), rm.model.observed_names(), 200);
    const AlignedMoments am(rm.model, s);
    const auto g = ml_gradient(am, rm.model, rm.theta);
    const auto gn = ml_gradient_numeric(am, rm.model, rm.theta, 1e-6);
    const double rel = (g - gn).norm() / std::max(1e-8, gn.norm());
    CHECK(rel < 1e-5);
  }
}

TEST_CASE("discrepancy rises away from the minimum and refit recovers theta") {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 5; ++rep) {
    auto rm = testing::random_model(4 + rep % 3, rng);
    const auto s = moments_of(implied_moments(rm.model, rm.theta), rm.model.observed_names(), 500);
    const auto r = fit(rm.model, s);
    CHECK(r.convergence.converged);
    CHECK((r.theta - rm.theta).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(r.chi_square < 1e-8);
    for (Eigen::Index k = 0; k < r.theta.size(); ++k) {
      for (double h : {-1e-3, 1e-3}) {
        Eigen::VectorXd t = r.theta;
        t(k) += h;
        CHECK(ml_discrepancy(s, rm.model, t) > r.f_min);
      }
    }
  }
}

TEST_CASE("fit of the saturated model") {
  std::mt19937_64 rng(5);
  Eigen::MatrixXd cov(3, 3);
  cov << 2, 0.5, 0.3, 0.5, 1, 0.2, 0.3, 0.2, 1.5;
  const auto rows = testing::draw_normal(cov, Eigen::Vector3d(1, 2, 3), 300, rng);
  const auto s = classical_moments(rows, {"a", "b", "c"});
  const auto r = fit(saturated_model(s.names), s);
  CHECK(r.df == 0);
  CHECK(r.chi_square < 1e-8);
  CHECK(*r.cfi == 1.0);
  CHECK_FALSE(r.rmsea.has_value());
  CHECK(r.aic == doctest::Approx(r.chi_square + 2.0 * static_cast<double>(r.q)));
}

TEST_CASE("regression recovery on simulated data") {
  std::mt19937_64 rng(99);
  const int n = 100000;
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd rows(n, 2);
  for (int i = 0; i < n; ++i) {
    rows(i, 0) = z(rng);
    rows(i, 1) = 1.0 + 0.5 * rows(i, 0) + z(rng);
  }
  const auto s = classical_moments(rows, {"x", "y"});
  const auto r = fit(regression_model(), s);
  const auto& b = r.parameter("b");
  CHECK(std::fabs(b.estimate - 0.5) < 3 * b.se);
  CHECK(b.se == doctest::Approx(1.0 / std::sqrt(n)).epsilon(0.05));
  // ML slope equals the OLS slope.
  CHECK(b.estimate == doctest::Approx(s.cov(0, 1) / s.cov(0, 0)).epsilon(1e-8));
  CHECK(r.r_squared.at("y") == doctest::Approx(0.2).epsilon(0.03));
  CHECK(r.df == 0);
}

TEST_CASE("fit statistics invariants") {
  std::mt19937_64 rng(8);
  Eigen::MatrixXd cov(3, 3);
  cov << 1, 0.4, 0.3, 0.4, 1, 0.4, 0.3, 0.4, 1;
  const auto rows = testing::draw_normal(cov, Eigen::Vector3d::Zero(), 400, rng);
  const auto s = classical_moments(rows, {"a", "b", "c"});
  CovarianceModel m;
  for (auto v : {"a", "b", "c"}) {
    m.add_observed(v);
    m.mean(v, free(std::string("m_") + v));
  }
  m.path("a", "b", free("ab"));
  m.path("b", "c", free("bc"));
  m.variance("a", free("va"));
  m.variance("b", free("vb"));
  m.variance("c", free("vc"));
  const auto r = fit(m, s);
  CHECK(r.df == 9 - 8 + 0);
  CHECK(r.df == static_cast<int>(r.p * (r.p + 3) / 2 - r.q));
  CHECK(r.chi_square >= 0);
  CHECK(r.aic == r.chi_square + 2.0 * static_cast<double>(r.q));
  CHECK(r.chi_square == doctest::Approx((s.n - 1) * r.f_min));

  SUBCASE("independence baseline matches a fitted independence model") {
    const auto base = fit(independence_model(s.names), s);
    CHECK(base.chi_square == doctest::Approx(r.baseline_chi_square).epsilon(1e-8));
    CHECK(base.df == r.baseline_df);
    const auto idx = fit_indices(r, base, s);
    CHECK(idx.cfi == doctest::Approx(*r.cfi));
    CHECK(idx.tli == doctest::Approx(*r.tli));
    CHECK(idx.rmsea == doctest::Approx(*r.rmsea));
  }

  SUBCASE("relabeling the observed variables leaves F unchanged") {
    CovarianceModel perm;
    for (auto v : {"c", "a", "b"}) {
      perm.add_observed(v);
    }
    for (auto v : {"a", "b", "c"}) perm.mean(v, free(std::string("m_") + v));
    perm.path("a", "b", free("ab"));
    perm.path("b", "c", free("bc"));
    perm.variance("a", free("va"));
    perm.variance("b", free("vb"));
    perm.variance("c", free("vc"));
    const auto s2 = s.reordered({"b", "c", "a"});
    const auto r2 = fit(perm, s2);
    CHECK(r2.f_min == doctest::Approx(r.f_min).epsilon(1e-10));
    CHECK(r2.parameter("bc").estimate == doctest::Approx(r.parameter("bc").estimate).epsilon(1e-7));
  }
}

TEST_CASE("non-identified model raises a rank deficiency error") {
  std::mt19937_64 rng(4);
  Eigen::MatrixXd cov(2, 2);
  cov << 1, 0.3, 0.3, 1;
  const auto s = classical_moments(testing::draw_normal(cov, Eigen::Vector2d::Zero(), 200, rng), {"x", "y"});
  auto m = regression_model();
  m.add_latent("f");
  m.variance("f", free("vf"));
  m.path("f", "y", fixed(1.0));
  CHECK_THROWS_AS(fit(m, s), SpecError);
}

TEST_CASE("fit indices") {
  CHECK(rmsea(10.0, 10, 500) == 0.0);
  CHECK(comparative_fit_index(0.0, 0, 100.0, 3) == 1.0);
  CHECK_THROWS_AS(tucker_lewis_index(1.0, 0, 100.0, 3), NumericalError);
  // Baseline constructed so that CFI = 0.958 for a reference D fit.
  const double chi_m = 13007.867;
  const int df_m = 142;
  const int df_b = 231;
  const double chi_b = df_b + (chi_m - df_m) / (1.0 - 0.958);
  CHECK(comparative_fit_index(chi_m, df_m, chi_b, df_b) == doctest::Approx(0.958).epsilon(1e-12));
  const double tli = ((chi_b / df_b) - (chi_m / df_m)) / ((chi_b / df_b) - 1.0);
  CHECK(tucker_lewis_index(chi_m, df_m, chi_b, df_b) == doctest::Approx(tli).epsilon(1e-14));
}

TEST_CASE("chi-square difference tests") {
  CHECK(chi_square_difference(9.460, 10, 1.0, 7).p_value == doctest::Approx(0.0374).epsilon(0.0005 / 0.0374));
  CHECK(std::fabs(chi_square_difference(18.909, 6, 0.0, 3).p_value - 0.0003) < 0.0002);
  CHECK(chi_square_difference(5.0, 6, 5.0, 3).p_value == 1.0);
  CHECK_THROWS_AS(chi_square_difference(1.0, 6, 5.0, 3), ArgumentError);
  CHECK_THROWS_AS(chi_square_difference(8.0, 3, 5.0, 3), ArgumentError);
}

TEST_CASE("chi-square survival function") {
  CHECK(stats::chi_square_sf(0.0, 3) == 1.0);
  double prev = 1.0;
  for (double x = 0.1; x < 40; x += 0.7) {
    const double p = stats::chi_square_sf(x, 3);
    CHECK(p < prev);
    prev = p;
  }
}

namespace {

// Two-wave regression with one coefficient shared across waves.
CovarianceModel two_wave_model() {
  CovarianceModel m;
  for (auto v : {"x1", "y1", "x2", "y2"}) {
    m.add_observed(v);
    m.mean(v, free(std::string("m_") + v));
  }
  m.path("x1", "y1", free("b"));
  m.path("x2", "y2", free("b"));
  m.variance("x1", free("vx1"));
  m.variance("x2", free("vx2"));
  m.covariance("x1", "x2", free("cx"));
  m.variance("y1", free("e1"));
  m.variance("y2", free("e2"));
  return m;
}

SampleMoments two_wave_sample(double b1, double b2, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd rows(n, 4);
  for (int i = 0; i < n; ++i) {
    const double x1 = z(rng);
    const double x2 = 0.5 * x1 + z(rng);
    rows(i, 0) = x1;
    rows(i, 1) = b1 * x1 + z(rng);
    rows(i, 2) = x2;
    rows(i, 3) = b2 * x2 + z(rng);
  }
  return classical_moments(rows, {"x1", "y1", "x2", "y2"});
}

}  // namespace

TEST_CASE("Lagrange multiplier test for equality constraints") {
  const auto m = two_wave_model();
  const auto constraints = equality_constraints(m);
  REQUIRE(constraints.size() == 2);
  CHECK(constraints[1].to_string() == "b@1");
  CHECK(ConstraintRef::parse("b@1").location == 1);
  CHECK_THROWS_AS(ConstraintRef::parse("b"), ArgumentError);

  SUBCASE("satisfied constraint gives MI near zero") {
    // Moments implied by an equal-coefficient truth.
    Eigen::VectorXd theta(static_cast<Eigen::Index>(m.num_parameters()));
    for (std::size_t k = 0; k < m.parameters().size(); ++k) {
      const auto& id = m.parameters()[k].id;
      theta(static_cast<Eigen::Index>(k)) = id == "b" ? 0.4 : id == "cx" ? 0.3 : id[0] == 'm' ? 0.0 : 1.0;
    }
    const auto s = moments_of(implied_moments(m, theta), m.observed_names(), 1000);
    const auto r = fit(m, s);
    CHECK(lm_test(m, r, s, {"b", 0}).mi < 1e-8);
  }
  SUBCASE("wave-varying truth produces a large MI close to the refit drop") {
    const auto s = two_wave_sample(0.3, 0.45, 2000, 17);
    const auto r = fit(m, s);
    const auto mi = lm_test(m, r, s, {"b", 1});
    CHECK(mi.mi > 3.84);
    const auto released = m.with_slot_released(m.parameters()[*m.parameter_index("b")].slots[1], "b_2");
    const auto r2 = fit(released, s);
    const double drop = r.chi_square - r2.chi_square;
    CHECK(std::fabs(mi.mi - drop) < 0.25 * drop);
  }
  SUBCASE("unknown constraint") {
    const auto s = two_wave_sample(0.3, 0.3, 300, 1);
    const auto r = fit(m, s);
    CHECK_THROWS_AS(lm_test(m, r, s, {"nope", 0}), ArgumentError);
    CHECK_THROWS_AS(lm_test(m, r, s, {"e1", 0}), ArgumentError);
  }
}

TEST_CASE("robust moments") {
  Eigen::MatrixXd cov(3, 3);
  cov << 1, 0.5, 0.2, 0.5, 2, 0.3, 0.2, 0.3, 1;
  SUBCASE("clean data stays close to classical") {
    std::mt19937_64 rng(1);
    const auto rows = testing::draw_normal(cov, Eigen::Vector3d(1, 0, -1), 10000, rng);
    const auto c = classical_moments(rows, {"a", "b", "c"});
    const auto r = robust_moments(rows, {"a", "b", "c"});
    CHECK((c.cov - r.cov).cwiseAbs().maxCoeff() < 0.02);
    CHECK((c.mean - r.mean).cwiseAbs().maxCoeff() < 0.02);
    CHECK(r.provenance == MomentsProvenance::robust);
  }
  SUBCASE("infinite radius reproduces classical moments exactly") {
    std::mt19937_64 rng(2);
    const auto rows = testing::draw_normal(cov, Eigen::Vector3d::Zero(), 500, rng);
    const auto c = classical_moments(rows, {"a", "b", "c"});
    RobustOptions opt;
    opt.radius = std::numeric_limits<double>::infinity();
    const auto r = robust_moments(rows, {"a", "b", "c"}, opt);
    CHECK(r.cov == c.cov);
    CHECK(r.mean == c.mean);
  }
  SUBCASE("consistency constant") {
    CHECK(huber_consistency(std::numeric_limits<double>::infinity(), 3) == 1.0);
    const double phi = huber_consistency(2.0, 2);
    CHECK(phi > 0);
    CHECK(phi < 1);
  }
}
