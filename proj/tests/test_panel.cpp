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

#include <cmath>
#include <sstream>

#include <doctest.h>

#include "panelforge/error.hpp"
#include "panelforge/panel.hpp"
#include "support.hpp"

using namespace panelforge;
using namespace panelforge::panel;

namespace {

// Two waves, six researchers; values chosen so column sums are easy to check.
PanelDataset small_panel() {
  std::vector<PanelObservation> rows;
  for (int i = 0; i < 6; ++i) {
    for (int w = 1; w <= 2; ++w) {
      PanelObservation o;
      o.researcher_id = "R" + std::to_string(i);
      o.wave = w;
      o.fss_scaled = 0.5 + 0.2 * i + 0.1 * w;
      o.c = 0.5 + 0.05 * i;
      o.ci = 0.1 * (i % 3);
      o.ced = 0.05 * w;
      o.cef = 0.02 * i;
      o.rank = 1 + (i + w) % 4;
      o.cohort = 1950 + i;
      o.gender = i % 2;
      rows.push_back(o);
    }
  }
  return PanelDataset(std::move(rows), 2);
}

}  // namespace

TEST_CASE("panel validates balance and propensity bounds") {
  auto rows = small_panel().rows();
  CHECK_THROWS_AS(PanelDataset(std::vector(rows.begin(), rows.end() - 1), 2), ValidationError);
  auto bad = rows;
  bad[3].ci = 0.9;
  CHECK_THROWS_AS(PanelDataset(bad, 2), ValidationError);
  auto shifted = rows;
  shifted[1].gender = 1 - shifted[1].gender;
  CHECK_THROWS_AS(PanelDataset(shifted, 2), ValidationError);
  std::reverse(rows.begin(), rows.end());
  const PanelDataset sorted(rows, 2);
  CHECK(sorted.rows().front().researcher_id == "R0");
  CHECK(sorted.at(2, 2).wave == 2);
  CHECK(sorted.researchers() == 6);
  CHECK(sorted.subset({"R1", "R4"}).researchers() == 2);
}

TEST_CASE("panel CSV round-trips exactly") {
  const auto p = small_panel();
  const auto text = panel_csv(p);
  CHECK(text.rfind(std::string(kPanelHeader), 0) == 0);
  std::istringstream in(text);
  const auto back = parse_panel_csv(in);
  CHECK(panel_csv(back) == text);
  std::istringstream broken(std::string(kPanelHeader) + "\nR1,1,abc,0,0,0,0,1,1950,1\n");
  CHECK_THROWS_AS(parse_panel_csv(broken), ParseError);
}

TEST_CASE("descriptive statistics use the n-1 denominator") {
  const auto stats = descriptive_stats(small_panel());
  REQUIRE(stats.size() == kAllVariables.size());
  const auto& cohort = stats[6];
  CHECK(cohort.variable == Variable::cohort);
  CHECK(cohort.mean == doctest::Approx(1952.5));
  // Pooled cohorts 1950..1955 twice each: sum of squares 2 * 17.5 over 11.
  CHECK(cohort.sd == doctest::Approx(std::sqrt(35.0 / 11)));
  CHECK(stats[7].mean == doctest::Approx(0.5));
}

TEST_CASE("correlations match a direct Pearson computation") {
  const auto p = small_panel();
  const std::vector<Variable> vars = {Variable::fss_scaled, Variable::cohort, Variable::cef, Variable::gender};
  const auto m = correlation_matrix(p, vars);
  CHECK(m.rows_used == 12);
  // fss_scaled, cohort and cef are all affine in i up to the wave shift.
  CHECK(m.r(2, 1) == doctest::Approx(1.0));
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (const auto& o : p.rows()) {
    sx += o.fss_scaled;
    sy += o.gender;
    sxx += o.fss_scaled * o.fss_scaled;
    syy += o.gender * o.gender;
    sxy += o.fss_scaled * o.gender;
  }
  const double n = 12;
  const double r = (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  CHECK(m.r(3, 0) == doctest::Approx(r));
  CHECK(m.r(0, 3) == doctest::Approx(r));
  CHECK(m.r(1, 1) == doctest::Approx(1.0));
  CHECK(m.p(2, 1) < 1e-6);
  CHECK(m.p(3, 0) > 0.05);
  const auto w1 = correlation_matrix(p, vars, CorrelationMode::first_wave);
  CHECK(w1.rows_used == 6);
  const std::vector<Variable> flat = {Variable::fss_scaled, Variable::c};
  std::vector<PanelObservation> rows = p.rows();
  for (auto& o : rows) o.c = 0.7;
  CHECK_THROWS_AS(correlation_matrix(PanelDataset(rows, 2), flat), NumericalError);
}

TEST_CASE("variance inflation factors") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0, 1);
  std::vector<PanelObservation> rows;
  for (int i = 0; i < 2000; ++i) {
    PanelObservation o;
    o.researcher_id = "R" + std::to_string(10000 + i);
    o.wave = 1;
    o.fss_scaled = 1 + z(rng);
    o.rank = 2 + z(rng);
    o.cohort = 1960 + 5 * z(rng);
    o.gender = i % 2;
    rows.push_back(o);
  }
  const PanelDataset p(rows, 1);
  const std::vector<Variable> preds = {Variable::fss_scaled, Variable::rank, Variable::cohort};
  for (const auto& f : collinearity_diagnostics(p, preds)) {
    CHECK(f.vif == doctest::Approx(1.0).epsilon(0.02));
    CHECK(f.vif == doctest::Approx(1.0 / (1.0 - f.r_squared)));
  }
  for (auto& o : rows) o.rank = 0.8 * (o.fss_scaled - 1) + 0.6 * z(rng) + 2;
  const auto vif = collinearity_diagnostics(PanelDataset(rows, 1), preds);
  // Population R^2 of rank on fss_scaled is 0.64.
  CHECK(vif[1].vif == doctest::Approx(1.0 / 0.36).epsilon(0.08));
}

TEST_CASE("build panel from a random corpus") {
  std::mt19937_64 rng(4);
  const auto c = testing::random_corpus(rng, 15, 500);
  const auto windows = corpus::make_windows(2001, 3, 4);
  const auto p = build_panel(c.roster, c.pubs, windows);
  CHECK(p.waves() == 4);
  CHECK(p.researchers() == corpus::select_active_population(c.roster, c.pubs, windows).size());
  for (const auto& o : p.rows()) {
    const auto& r = c.roster.at(o.researcher_id);
    CHECK(o.cohort == r.birth_year);
    CHECK(o.rank == (o.wave >= 3 ? 3 : 2));
  }
  CHECK_THROWS_AS(build_panel(c.roster, std::vector<corpus::PublicationRecord>{}, windows), Error);
}
