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

#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "panelforge/panel.hpp"
#include "panelforge/sem/fit.hpp"
#include "panelforge/sem/model.hpp"
#include "panelforge/sem/moments.hpp"
#include "panelforge/sem/serialize.hpp"

namespace panelforge::clpm {

using panel::Variable;

// A: autoregressive only. B adds collaboration -> FSS. C adds FSS ->
// collaboration. D has both.
enum class Variant { A, B, C, D };
inline constexpr std::array<Variant, 4> kAllVariants = {Variant::A, Variant::B, Variant::C, Variant::D};

char variant_letter(Variant v);
Variant parse_variant(std::string_view text);

enum class TimeEffect { wave_dummies, linear_trend };

struct ClpmSpec {
  int waves = 4;
  Variant variant = Variant::D;
  // Overall propensity C as a fourth collaboration process.
  bool include_overall_propensity = false;
  bool time_invariant = true;
  bool individual_effects = true;
  bool correlated_individual_effects = false;
  bool sequential_exogeneity = true;
  TimeEffect time_effect = TimeEffect::wave_dummies;
};

// Process variables in report order: FSS, [C], CI, CED, CEF, Rank.
std::vector<Variable> process_variables(const ClpmSpec& spec);
std::vector<Variable> collaboration_variables(const ClpmSpec& spec);
inline constexpr std::array<Variable, 2> kCovariates = {Variable::cohort, Variable::gender};

// Short key used in parameter ids: "fss", "c", "ci", "ced", "cef", "rank",
// "cohort", "gender".
std::string_view short_name(Variable v);
// Observed variable name: "fss_scaled_3", "cohort".
std::string observed_name(Variable v, int wave);

// Does `predictor` at t-1 enter the equation of `outcome` under `variant`?
bool has_lag_path(const ClpmSpec& spec, Variable outcome, Variable predictor);

// Parameter id of a structural coefficient. Lag is 1 or 2 for process
// predictors and 0 for covariates. `wave` is the dependent variable's wave
// and only matters when time invariance is off.
std::string coefficient_id(const ClpmSpec& spec, Variable outcome, Variable predictor, int lag, int wave);

// Throws SpecError for W < 3.
sem::CovarianceModel build_model(const ClpmSpec& spec);

// Researchers x variables matrix in build_model's observed order.
Eigen::MatrixXd wide_rows(const panel::PanelDataset& panel, const ClpmSpec& spec);
std::vector<std::string> observed_names(const ClpmSpec& spec);

enum class MomentsMode { classical, robust };

sem::SampleMoments panel_moments(const panel::PanelDataset& panel, const ClpmSpec& spec, MomentsMode mode,
                                 const sem::RobustOptions& robust = {});

struct VariantFit {
  Variant variant = Variant::D;
  std::optional<sem::FitResult> fit;
  // Set when the fit failed; `fit` then holds the best point if one exists.
  std::string error;
  bool converged() const { return fit && error.empty(); }
};

struct NestedTest {
  Variant restricted = Variant::A;
  Variant full = Variant::D;
  sem::ChiSquareDifference result;
};

struct ComparisonOptions {
  std::vector<Variant> variants{kAllVariants.begin(), kAllVariants.end()};
  sem::FitOptions fit;
  double alpha = 0.05;
  unsigned threads = 0;
};

struct VariantComparison {
  ClpmSpec spec;  // variant field ignored
  std::vector<VariantFit> fits;
  std::vector<NestedTest> tests;  // each restricted variant against D
  std::optional<Variant> selected;
  std::string selection_note;

  const VariantFit* find(Variant v) const;
  bool all_converged() const;
};

// Keep D unless a restricted variant is not significantly worse; among the
// acceptable variants prefer the most parsimonious, then the lowest AIC.
// Without D in the set, the lowest AIC wins.
std::optional<Variant> select_variant(const std::vector<VariantFit>& fits, const std::vector<NestedTest>& tests,
                                      double alpha);

VariantComparison fit_variants(const sem::SampleMoments& moments, const ClpmSpec& spec,
                               const ComparisonOptions& options = {});
VariantComparison fit_variants(const panel::PanelDataset& panel, const ClpmSpec& spec, MomentsMode mode,
                               const ComparisonOptions& options = {});

// "0.319*** (0.009)"
std::string format_coefficient(double estimate, double se, int decimals = 3);
// 0.5956 -> "59.56"
std::string format_r_squared(double r2);

struct CoefficientCell {
  double estimate = 0;
  double se = 0;
  double p_value = 1;
};

struct CoefficientRow {
  Variable equation;
  std::string label;          // "FSS", "FSS-2", "Cohort", "Intercept", ...
  std::string parameter;      // parameter id (without variant)
  std::map<Variant, CoefficientCell> cells;
};

struct CoefficientTable {
  std::vector<Variant> variants;
  std::vector<CoefficientRow> rows;
  std::map<Variable, std::map<Variant, double>> r_squared;  // mean over waves
};

CoefficientTable coefficient_table(const VariantComparison& comparison);
std::string coefficient_table_text(const CoefficientTable& table, const VariantComparison& comparison);
std::string coefficient_table_csv(const CoefficientTable& table, const VariantComparison& comparison);
sem::Json comparison_to_json(const VariantComparison& comparison);

}  // namespace panelforge::clpm
