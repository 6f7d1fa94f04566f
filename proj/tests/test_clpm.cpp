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

#include <algorithm>
#include <cmath>

#include <doctest.h>

#include "panelforge/clpm.hpp"
#include "panelforge/error.hpp"
#include "panelforge/synth.hpp"

using namespace panelforge;
using namespace panelforge::clpm;

namespace {

ClpmSpec spec_for(Variant v, int waves = 4) {
  ClpmSpec s;
  s.variant = v;
  s.waves = waves;
  return s;
}

const panel::PanelDataset& simulated_panel() {
  static const auto sim = synth::simulate_panel(synth::default_parameters(Variant::D), 2000, 4, 17);
  return sim.panel;
}

const panel::PanelDataset& three_wave_panel() {
  static const auto sim = synth::simulate_panel(synth::default_parameters(Variant::D), 2000, 3, 23);
  return sim.panel;
}

sem::FitResult fake_fit(int df, double aic) {
  sem::FitResult f;
  f.df = df;
  f.aic = aic;
  return f;
}

NestedTest fake_test(Variant restricted, double p) {
  NestedTest t;
  t.restricted = restricted;
  t.result.p_value = p;
  return t;
}

}  // namespace

TEST_CASE("variants differ by the cross-lagged blocks") {
  for (int waves : {3, 4, 5}) {
    const auto qa = build_model(spec_for(Variant::A, waves)).num_parameters();
    const auto qb = build_model(spec_for(Variant::B, waves)).num_parameters();
    const auto qc = build_model(spec_for(Variant::C, waves)).num_parameters();
    const auto qd = build_model(spec_for(Variant::D, waves)).num_parameters();
    CHECK(qd - qa == 6);
    CHECK(qb - qa == 3);
    CHECK(qc - qa == 3);
  }
  const auto m = build_model(spec_for(Variant::D));
  CHECK(m.observed().size() == 22);
  CHECK(m.num_parameters() == 139);
  CHECK_THROWS_AS(build_model(spec_for(Variant::D, 2)), SpecError);
}

TEST_CASE("lag paths follow the variant definitions") {
  const auto a = spec_for(Variant::A);
  const auto b = spec_for(Variant::B);
  const auto c = spec_for(Variant::C);
  CHECK(has_lag_path(a, Variable::fss_scaled, Variable::fss_scaled));
  CHECK(has_lag_path(a, Variable::fss_scaled, Variable::rank));
  CHECK(has_lag_path(a, Variable::rank, Variable::ci));
  CHECK_FALSE(has_lag_path(a, Variable::fss_scaled, Variable::ci));
  CHECK_FALSE(has_lag_path(a, Variable::ci, Variable::fss_scaled));
  CHECK(has_lag_path(b, Variable::fss_scaled, Variable::cef));
  CHECK_FALSE(has_lag_path(b, Variable::ced, Variable::fss_scaled));
  CHECK(has_lag_path(c, Variable::ced, Variable::fss_scaled));
  CHECK_FALSE(has_lag_path(c, Variable::fss_scaled, Variable::ced));
  CHECK_FALSE(has_lag_path(spec_for(Variant::D), Variable::ci, Variable::ced));
  CHECK(coefficient_id(a, Variable::fss_scaled, Variable::ci, 1, 3) == "fss~ci");
  CHECK(coefficient_id(a, Variable::rank, Variable::fss_scaled, 2, 3) == "rank~fss2");
  auto free = a;
  free.time_invariant = false;
  CHECK(coefficient_id(free, Variable::fss_scaled, Variable::cohort, 0, 3) == "fss~cohort@3");
  CHECK(observed_name(Variable::fss_scaled, 3) == "fss_scaled_3");
  CHECK(observed_name(Variable::gender, 2) == "gender");
}

TEST_CASE("overall propensity adds a process") {
  auto s = spec_for(Variant::D);
  s.include_overall_propensity = true;
  const auto procs = process_variables(s);
  REQUIRE(procs.size() == 6);
  CHECK(procs[1] == Variable::c);
  CHECK(collaboration_variables(s).size() == 4);
  CHECK(build_model(s).observed().size() == 26);
}

TEST_CASE("every variant is identified at three waves") {
  const auto truth = synth::default_parameters(Variant::D);
  for (auto v : kAllVariants) {
    const auto s = spec_for(v, 3);
    const auto m = build_model(s);
    const auto theta = synth::true_theta(truth, m, s);
    const Eigen::MatrixXd info = sem::expected_information(m, theta);
    const Eigen::VectorXd d = info.diagonal().cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd scaled = d.asDiagonal() * info * d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scaled);
    CHECK(es.eigenvalues().minCoeff() > 1e-8);
  }
}

TEST_CASE("table formatting") {
  CHECK(format_coefficient(0.319, 0.009) == "0.319*** (0.009)");
  CHECK(format_coefficient(0.073, 0.025) == "0.073** (0.025)");
  CHECK(format_coefficient(0.003, 0.0014) == "0.003* (0.001)");
  CHECK(format_coefficient(-0.048, 0.025) == "-0.048° (0.025)");
  CHECK(format_coefficient(0.017, 0.013) == "0.017 (0.013)");
  CHECK(format_r_squared(0.5956) == "59.56");
  CHECK(format_r_squared(0.5801) == "58.01");
}

TEST_CASE("selection keeps the full model unless a restriction is tenable") {
  auto fit = [](Variant v, int df, double aic) {
    VariantFit f;
    f.variant = v;
    f.fit = fake_fit(df, aic);
    return f;
  };
  const std::vector<VariantFit> fits = {fit(Variant::A, 148, 16871.5), fit(Variant::B, 145, 13276.3),
                                        fit(Variant::C, 145, 13286.8), fit(Variant::D, 142, 13273.9)};
  CHECK(select_variant(fits, {fake_test(Variant::A, 1e-9), fake_test(Variant::B, 0.0374), fake_test(Variant::C, 0.0003)},
                       0.05) == Variant::D);
  CHECK(select_variant(fits, {fake_test(Variant::A, 1e-9), fake_test(Variant::B, 0.2), fake_test(Variant::C, 0.0003)},
                       0.05) == Variant::B);
  // Both B and C tenable: same df, lower AIC wins.
  CHECK(select_variant(fits, {fake_test(Variant::A, 1e-9), fake_test(Variant::B, 0.2), fake_test(Variant::C, 0.3)},
                       0.05) == Variant::B);
  // A tenable: most parsimonious wins even with a higher AIC.
  CHECK(select_variant(fits, {fake_test(Variant::A, 0.5), fake_test(Variant::B, 0.2), fake_test(Variant::C, 0.3)},
                       0.05) == Variant::A);
  const std::vector<VariantFit> no_full = {fits[0], fits[1], fits[2]};
  CHECK(select_variant(no_full, {}, 0.05) == Variant::B);
  auto failed = fits;
  failed[3].error = "did not converge";
  CHECK(select_variant(failed, {}, 0.05) == Variant::B);
  CHECK_FALSE(select_variant({}, {}, 0.05).has_value());
}

TEST_CASE("paper AIC values satisfy chi-square plus twice the parameter count") {
  const std::vector<std::pair<double, int>> chi_q = {{16617.517, 127}, {13016.327, 130}, {13026.776, 130}, {13007.867, 133}};
  const std::vector<double> aic = {16871.517, 13276.327, 13286.776, 13273.867};
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(std::abs(chi_q[k].first + 2 * chi_q[k].second - aic[k]) < 1e-9);
  }
}

TEST_CASE("fit of simulated data selects the full model and is deterministic") {
  const auto& data = simulated_panel();
  const auto moments = panel_moments(data, spec_for(Variant::D), MomentsMode::classical);
  ComparisonOptions opts;
  opts.threads = 4;
  const auto cmp = fit_variants(moments, spec_for(Variant::D), opts);
  REQUIRE(cmp.all_converged());
  CHECK(cmp.selected == Variant::D);
  INFO(cmp.selection_note);
  REQUIRE(cmp.tests.size() == 3);
  for (const auto& t : cmp.tests) {
    CHECK(t.full == Variant::D);
    CHECK(t.result.delta_df == (t.restricted == Variant::A ? 6 : 3));
  }
  const auto* d = cmp.find(Variant::D);
  CHECK(d->fit->df == 136);
  CHECK(d->fit->aic == doctest::Approx(d->fit->chi_square + 2.0 * 139));

  opts.threads = 1;
  const auto again = fit_variants(moments, spec_for(Variant::D), opts);
  const auto table = coefficient_table(cmp);
  CHECK(coefficient_table_text(table, cmp) == coefficient_table_text(coefficient_table(again), again));
  CHECK(comparison_to_json(cmp).dump() == comparison_to_json(again).dump());
  const auto text = coefficient_table_text(table, cmp);
  CHECK(text.find("Selected model: D") != std::string::npos);
  CHECK(text.find("FSS-2") != std::string::npos);
  CHECK(text.find("R-squared (%)") != std::string::npos);
  const auto csv = coefficient_table_csv(table, cmp);
  CHECK(csv.find("fss~ci") != std::string::npos);
}

TEST_CASE("variable order of the moments does not change the fit") {
  const auto spec = spec_for(Variant::B, 3);
  const auto moments = panel_moments(three_wave_panel(), spec_for(Variant::B, 3), MomentsMode::classical);
  auto order = moments.names;
  std::reverse(order.begin(), order.end());
  const auto a = sem::fit(build_model(spec), moments);
  const auto b = sem::fit(build_model(spec), moments.reordered(order));
  CHECK(a.chi_square == doctest::Approx(b.chi_square).epsilon(1e-7));
  CHECK(a.parameter("fss~ci").estimate == doctest::Approx(b.parameter("fss~ci").estimate).epsilon(1e-6));
}

TEST_CASE("relaxing constraints never increases chi-square") {
  auto spec = spec_for(Variant::D, 3);
  const auto moments = panel_moments(three_wave_panel(), spec, MomentsMode::classical);
  const auto constrained = sem::fit(build_model(spec), moments);
  auto free = spec;
  free.time_invariant = false;
  const auto relaxed = sem::fit(build_model(free), moments);
  CHECK(relaxed.df < constrained.df);
  CHECK(relaxed.chi_square <= constrained.chi_square + 1e-6);
  const auto diff = sem::chi_square_diff_test(constrained, relaxed);
  // The simulated truth is time invariant.
  CHECK(diff.p_value > 0.001);

  auto trend = spec_for(Variant::D, 4);
  trend.time_effect = TimeEffect::linear_trend;
  const auto moments4 = panel_moments(simulated_panel(), spec_for(Variant::D), MomentsMode::classical);
  const auto dummies = sem::fit(build_model(spec_for(Variant::D)), moments4);
  const auto linear = sem::fit(build_model(trend), moments4);
  CHECK(linear.df == dummies.df + 5);
  CHECK(linear.chi_square >= dummies.chi_square - 1e-6);
  CHECK(linear.find("fss~time") != nullptr);
}

TEST_CASE("single-variant runs skip the comparison") {
  const auto moments = panel_moments(three_wave_panel(), spec_for(Variant::A, 3), MomentsMode::classical);
  ComparisonOptions opts;
  opts.variants = {Variant::A};
  const auto cmp = fit_variants(moments, spec_for(Variant::A, 3), opts);
  CHECK(cmp.tests.empty());
  CHECK(cmp.selected == Variant::A);
  CHECK(cmp.selection_note.find("single-model mode") != std::string::npos);
  opts.variants.clear();
  CHECK_THROWS_AS(fit_variants(moments, spec_for(Variant::A, 3), opts), ArgumentError);
}

TEST_CASE("time-invariance constraints carry modification indices") {
  const auto spec = spec_for(Variant::D, 3);
  const auto model = build_model(spec);
  const auto moments = panel_moments(three_wave_panel(), spec, MomentsMode::classical);
  const auto fit = sem::fit(model, moments);
  const auto constraints = sem::equality_constraints(model);
  CHECK(!constraints.empty());
  const auto it = std::find_if(constraints.begin(), constraints.end(),
                               [](const sem::ConstraintRef& c) { return c.parameter == "fss~ci"; });
  REQUIRE(it != constraints.end());
  const auto mi = sem::lm_test(model, fit, moments, *it);
  CHECK(mi.mi >= 0);
  CHECK(mi.mi < 15);
}
