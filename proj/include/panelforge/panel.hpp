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
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "panelforge/corpus.hpp"
#include "panelforge/indicators.hpp"

namespace panelforge::panel {

enum class Variable { fss_scaled, c, ci, ced, cef, rank, cohort, gender };

inline constexpr std::array<Variable, 8> kAllVariables = {Variable::fss_scaled, Variable::c,    Variable::ci,
                                                          Variable::ced,        Variable::cef,  Variable::rank,
                                                          Variable::cohort,     Variable::gender};

// Column name in the panel CSV ("fss_scaled", "ci", ...).
std::string_view column_name(Variable v);
// Row label in the reports ("FSS", "CI", "Gender (Male)", ...).
std::string_view display_name(Variable v);
Variable parse_variable(std::string_view name);

struct PanelObservation {
  std::string researcher_id;
  int wave = 0;
  double fss_scaled = 0;
  double c = 0;
  double ci = 0;
  double ced = 0;
  double cef = 0;
  double rank = 0;    // ordinal 1..4; continuous for simulated panels
  double cohort = 0;  // birth year
  double gender = 0;  // male = 1

  double value(Variable v) const;
};

// Balanced researcher x wave panel, rows sorted by (researcher_id, wave).
class PanelDataset {
 public:
  PanelDataset() = default;
  // Sorts and validates: exactly W rows per researcher with waves 1..W,
  // propensities within [0,1] and ci/ced/cef <= c, cohort and gender
  // constant per researcher. Throws ValidationError otherwise.
  PanelDataset(std::vector<PanelObservation> rows, int waves);

  const std::vector<PanelObservation>& rows() const { return rows_; }
  int waves() const { return waves_; }
  std::size_t researchers() const { return waves_ == 0 ? 0 : rows_.size() / static_cast<std::size_t>(waves_); }
  // Observation of researcher `i` (0-based, in sorted order) at wave w (1-based).
  const PanelObservation& at(std::size_t i, int wave) const;

  // Keeps only the given researchers; used for group-by-UDA refits.
  PanelDataset subset(const std::vector<std::string>& ids) const;

 private:
  std::vector<PanelObservation> rows_;
  int waves_ = 0;
};

struct BuildOptions {
  indicators::IndicatorOptions indicators;
};

PanelDataset build_panel(const corpus::Roster& roster, std::span<const corpus::PublicationRecord> pubs,
                         std::span<const corpus::WindowSpec> windows, const BuildOptions& options = {});

inline constexpr std::string_view kPanelHeader = "researcher_id,wave,fss_scaled,c,ci,ced,cef,rank,cohort,gender";
std::string panel_csv(const PanelDataset& panel);
PanelDataset parse_panel_csv(std::istream& in, const std::string& source = "panel");
PanelDataset load_panel_file(const std::string& path);

struct VariableSummary {
  Variable variable;
  double mean = 0;
  double sd = 0;  // n - 1 denominator
};

std::vector<VariableSummary> descriptive_stats(const PanelDataset& panel);

enum class CorrelationMode { pooled, first_wave };

struct CorrelationMatrix {
  std::vector<Variable> variables;
  Eigen::MatrixXd r;
  Eigen::MatrixXd p;
  std::size_t rows_used = 0;

  std::string stars(Eigen::Index i, Eigen::Index j) const;
};

CorrelationMatrix correlation_matrix(const PanelDataset& panel, std::span<const Variable> variables,
                                     CorrelationMode mode = CorrelationMode::pooled);

struct InflationFactor {
  Variable variable;
  double r_squared = 0;
  double vif = 0;
};

std::vector<InflationFactor> collinearity_diagnostics(const PanelDataset& panel, std::span<const Variable> predictors);

std::string descriptives_csv(std::span<const VariableSummary> stats);
std::string descriptives_text(std::span<const VariableSummary> stats, std::size_t observations);
std::string correlations_csv(const CorrelationMatrix& m);
std::string correlations_text(const CorrelationMatrix& m);

}  // namespace panelforge::panel
