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
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "panelforge/clpm.hpp"
#include "panelforge/panel.hpp"
#include "panelforge/sem/fit.hpp"
#include "panelforge/sem/serialize.hpp"

namespace panelforge::synth {

using panel::Variable;

// The simulated processes, in this order. The overall propensity C is
// derived from the three collaboration forms rather than simulated.
inline constexpr std::array<Variable, 5> kProcesses = {Variable::fss_scaled, Variable::ci, Variable::ced,
                                                       Variable::cef, Variable::rank};

struct Equation {
  double intercept = 0;
  double error_variance = 0;
  double individual_variance = 0;
  std::map<Variable, double> lags;  // predictor at t-1 -> coefficient
  double cohort = 0;
  double gender = 0;
};

// How FSS at wave 0 enters rank at wave 2. `omit` drops the term, which is
// what the estimated model does; `stationary` draws a pre-sample wave.
enum class Presample { omit, stationary };

struct TrueParameters {
  std::map<Variable, Equation> equations;
  double rank_fss_lag2 = 0;
  double gender_p = 0.7;
  double cohort_mean = 1955;
  double cohort_sd = 8;
  double overall_noise_sd = 0.05;
  std::uint64_t seed = 1;
  Presample presample = Presample::omit;
  bool round_rank = false;

  // Throws SpecError for negative variances, gender_p outside (0,1) or an
  // unstable lag system.
  void validate() const;

  Eigen::MatrixXd lag_matrix() const;   // 5 x 5, row = outcome
  Eigen::MatrixXd lag2_matrix() const;  // 5 x 5
  Eigen::MatrixXd covariate_matrix() const;  // 5 x 2 (cohort, gender)
  // Largest eigenvalue modulus of the VAR(2) companion matrix.
  double spectral_radius() const;
};

// Coefficients chosen to put all cross effects well above the noise at
// n = 5000; intercepts give stationary means of about 1.0 (FSS), 0.40, 0.30,
// 0.30 (propensities) and 2.5 (rank). Variant A zeroes the cross effects.
TrueParameters default_parameters(clpm::Variant truth = clpm::Variant::D);

// Recomputes the intercepts so the stationary means hit `means`
// (process order) at the covariate means.
void set_stationary_means(TrueParameters& p, const std::array<double, 5>& means);

sem::Json to_json(const TrueParameters& p);
TrueParameters from_json(const sem::Json& j);
TrueParameters load_parameters_file(const std::string& path);

struct Simulation {
  panel::PanelDataset panel;
  std::size_t clamped = 0;
  std::size_t propensity_values = 0;
  double clamping_rate() const {
    return propensity_values == 0 ? 0.0 : static_cast<double>(clamped) / static_cast<double>(propensity_values);
  }
};

// Throws SpecError when the parameters are unstable and ArgumentError for
// n < 100 or W < 1. Warns when more than 2% of propensity values are clamped.
Simulation simulate_panel(const TrueParameters& truth, std::size_t n, int waves, std::uint64_t seed,
                          unsigned threads = 1);

// Parameters of clpm::build_model(spec) implied by the truth. Exact for the
// unclamped process with Presample::omit.
std::map<std::string, double> true_parameter_values(const TrueParameters& truth, const clpm::ClpmSpec& spec);
Eigen::VectorXd true_theta(const TrueParameters& truth, const sem::CovarianceModel& model,
                           const clpm::ClpmSpec& spec);
// Lag, lag-2 and covariate coefficients present in the spec's variant.
std::map<std::string, double> structural_coefficients(const TrueParameters& truth, const clpm::ClpmSpec& spec);

struct RecoveryEntry {
  std::string id;
  double truth = 0;
  double estimate = 0;
  double se = 0;
  double z = 0;
  bool covered = false;  // |z| <= 3
};

struct RecoveryReport {
  std::vector<RecoveryEntry> entries;
  double coverage = 0;
};

// Throws ArgumentError when a truth id is missing from the fit.
RecoveryReport recovery_report(const std::map<std::string, double>& truth, const sem::FitResult& fitted);

}  // namespace panelforge::synth
