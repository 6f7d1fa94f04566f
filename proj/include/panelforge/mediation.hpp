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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "panelforge/clpm.hpp"
#include "panelforge/sem/fit.hpp"
#include "panelforge/sem/serialize.hpp"

namespace panelforge::mediation {

using panel::Variable;

// Lag-1 coefficients among the process variables and covariate effects, one
// matrix per dependent wave t = 2..W (row = outcome, column = predictor).
struct PathSystem {
  std::vector<Variable> processes;
  std::vector<Variable> covariates;
  std::vector<Eigen::MatrixXd> lag;
  std::vector<Eigen::MatrixXd> covariate;

  int last_wave() const { return static_cast<int>(lag.size()) + 1; }
  const Eigen::MatrixXd& lag_at(int wave) const;
  const Eigen::MatrixXd& covariate_at(int wave) const;

  // The same matrices at every wave pair.
  static PathSystem uniform(std::vector<Variable> processes, std::vector<Variable> covariates,
                            const Eigen::MatrixXd& lag, const Eigen::MatrixXd& covariate, int waves);
};

// Missing ids (paths absent from the fitted variant) count as zero.
PathSystem path_system(const std::map<std::string, double>& estimates, const clpm::ClpmSpec& spec);
PathSystem path_system(const sem::FitResult& fit, const clpm::ClpmSpec& spec);

struct IndirectOptions {
  // Count the treatment's own persistence (T -> T -> O) as a mediated
  // channel, like every other wave t-1 variable.
  bool include_treatment_persistence = true;
  // Wave of the outcome; 0 means the last wave. Needs wave >= 3.
  int wave = 0;
};

// Sum over wave t-1 mediators M of coef(T -> M) * coef(M -> O), with T at
// t-2 (or time-invariant for covariates) and O at t.
double indirect_effect(const PathSystem& paths, Variable treatment, Variable outcome, const IndirectOptions& options = {});
// Lag-1 coefficient of the treatment in the outcome equation.
double direct_effect(const PathSystem& paths, Variable treatment, Variable outcome, const IndirectOptions& options = {});

struct IndirectCell {
  Variable treatment;
  Variable outcome;
  double indirect = 0;
  double direct = 0;
  std::optional<double> ratio_percent;  // unset when the direct effect is zero
};

struct IndirectReport {
  std::vector<Variable> treatments;
  std::vector<Variable> outcomes;
  std::vector<IndirectCell> cells;  // treatment-major

  const IndirectCell& cell(Variable treatment, Variable outcome) const;
};

IndirectReport indirect_report(const PathSystem& paths,
                               const std::vector<Variable>& treatments = {Variable::rank, Variable::cohort,
                                                                          Variable::gender},
                               const std::vector<Variable>& outcomes = {Variable::fss_scaled, Variable::ci,
                                                                        Variable::ced, Variable::cef},
                               const IndirectOptions& options = {});

std::string indirect_text(const IndirectReport& report);
std::string indirect_csv(const IndirectReport& report);
sem::Json indirect_json(const IndirectReport& report);

}  // namespace panelforge::mediation
