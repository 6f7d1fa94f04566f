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

#include "panelforge/error.hpp"
#include "panelforge/sem/model.hpp"
#include "panelforge/sem/moments.hpp"

namespace panelforge::sem {

// Moments aligned to a model's observed variable order, with the terms of the
// discrepancy that do not depend on theta precomputed.
class AlignedMoments {
 public:
  AlignedMoments(const CovarianceModel& model, const SampleMoments& moments);

  const Eigen::MatrixXd& cov() const { return cov_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  double n() const { return n_; }
  double log_det() const { return log_det_; }
  Eigen::Index p() const { return cov_.rows(); }

 private:
  Eigen::MatrixXd cov_;
  Eigen::VectorXd mean_;
  double n_ = 0;
  double log_det_ = 0;
};

// Normal-theory ML discrepancy with mean structure:
//   F = ln|Sigma| + tr(S Sigma^-1) - ln|S| - p + (m - mu)' Sigma^-1 (m - mu)
// Throws NumericalError when Sigma(theta) is not positive definite.
double ml_discrepancy(const SampleMoments& moments, const CovarianceModel& model, const Eigen::VectorXd& theta);
double ml_discrepancy(const AlignedMoments& moments, const CovarianceModel& model, const Eigen::VectorXd& theta);

// Analytic gradient of F with respect to theta.
Eigen::VectorXd ml_gradient(const AlignedMoments& moments, const CovarianceModel& model, const Eigen::VectorXd& theta);
// Central finite differences, for checking and as a fallback.
Eigen::VectorXd ml_gradient_numeric(const AlignedMoments& moments, const CovarianceModel& model,
                                    const Eigen::VectorXd& theta, double step = 1e-6);

// Expected second derivative of F: tr(W dS_k W dS_l) + 2 dmu_k' W dmu_l.
Eigen::MatrixXd expected_information(const CovarianceModel& model, const Eigen::VectorXd& theta);

struct FitOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-8;
  bool log_variances = true;
  bool analytic_gradient = true;
  // Overrides for the automatic start values, by parameter id.
  std::map<std::string, double> start;
  // Skip the identification check and standard errors (used by fast refits).
  bool standard_errors = true;
};

struct ParameterEstimate {
  std::string id;
  double estimate = 0;
  double se = 0;
  std::vector<std::string> locations;
};

struct Convergence {
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0;  // max |dF/dz| in optimizer coordinates
  std::string message;
};

struct FitResult {
  std::vector<std::string> observed;  // model order
  std::vector<ParameterEstimate> parameters;
  Eigen::VectorXd theta;
  Eigen::MatrixXd sigma;
  Eigen::VectorXd mu;

  double n = 0;
  std::size_t p = 0;
  std::size_t q = 0;
  double f_min = 0;
  double chi_square = 0;
  int df = 0;
  double p_value = 1;
  double srmr = 0;
  std::optional<double> rmsea;
  std::optional<double> cfi;
  std::optional<double> tli;
  double aic = 0;
  double baseline_chi_square = 0;
  int baseline_df = 0;
  std::map<std::string, double> r_squared;  // endogenous observed variables
  Convergence convergence;
  MomentsProvenance provenance = MomentsProvenance::classical;

  const ParameterEstimate& parameter(std::string_view id) const;
  const ParameterEstimate* find(std::string_view id) const;
};

// Optimizer gave up. Carries the best point reached.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, FitResult best) : Error(what), best_(std::move(best)) {}
  const FitResult& best() const { return best_; }

 private:
  FitResult best_;
};

// Moment-matched start values: per-equation least squares on the sample
// moments for paths between observed variables, residual variances.
Eigen::VectorXd start_values(const CovarianceModel& model, const SampleMoments& moments, const FitOptions& options = {});

// Minimizes F with BFGS on (log-variance) coordinates. chi-square = (N - 1) F.
// Standard errors: sqrt(diag(2 / (N - 1) * I^-1)) with I the expected
// information of F. Throws ConvergenceError or SpecError (not identified).
FitResult fit(const CovarianceModel& model, const SampleMoments& moments, const FitOptions& options = {});

struct FitIndices {
  double srmr = 0;
  double rmsea = 0;
  double cfi = 0;
  double tli = 0;
};

double srmr(const SampleMoments& moments, const FitResult& fit);
double rmsea(double chi_square, int df, double n);
double comparative_fit_index(double chi_model, int df_model, double chi_baseline, int df_baseline);
double tucker_lewis_index(double chi_model, int df_model, double chi_baseline, int df_baseline);
// Throws NumericalError when the model has df = 0 (RMSEA and TLI undefined).
FitIndices fit_indices(const FitResult& fit, const FitResult& baseline, const SampleMoments& moments);

// Independence baseline: closed form chi-square and df.
std::pair<double, int> independence_chi_square(const SampleMoments& moments);

struct ChiSquareDifference {
  double delta_chi_square = 0;
  int delta_df = 0;
  double p_value = 1;
};

ChiSquareDifference chi_square_difference(double chi_restricted, int df_restricted, double chi_full, int df_full);
ChiSquareDifference chi_square_diff_test(const FitResult& restricted, const FitResult& full);

// One slot of a parameter shared by several slots.
struct ConstraintRef {
  std::string parameter;
  std::size_t location = 0;  // index into Parameter::slots

  std::string to_string() const { return parameter + "@" + std::to_string(location); }
  static ConstraintRef parse(std::string_view text);
};

std::vector<ConstraintRef> equality_constraints(const CovarianceModel& model);

struct ModificationIndex {
  ConstraintRef constraint;
  std::string location;
  double mi = 0;
  double gradient = 0;
  double expected_change = 0;
};

// Score (Lagrange multiplier) statistic for freeing one slot of an equality
// constraint, with all other parameters re-estimated. Approximates the
// 1-df chi-square drop from releasing the slot.
ModificationIndex lm_test(const CovarianceModel& model, const FitResult& fit, const SampleMoments& moments,
                          const ConstraintRef& constraint);

}  // namespace panelforge::sem
