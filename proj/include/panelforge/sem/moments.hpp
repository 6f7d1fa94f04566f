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

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace panelforge::sem {

enum class MomentsProvenance { classical, robust };

struct SampleMoments {
  std::vector<std::string> names;
  Eigen::MatrixXd cov;   // n - 1 denominator
  Eigen::VectorXd mean;
  double n = 0;          // number of cases
  MomentsProvenance provenance = MomentsProvenance::classical;

  // Robust first stage diagnostics.
  double radius = std::numeric_limits<double>::infinity();
  int iterations = 0;
  double downweighted_fraction = 0;

  std::size_t size() const { return names.size(); }
  // Same moments in a different variable order.
  SampleMoments reordered(const std::vector<std::string>& order) const;
  void validate() const;
};

// `rows` is cases x variables.
SampleMoments classical_moments(const Eigen::MatrixXd& rows, std::vector<std::string> names);

struct RobustOptions {
  // Mahalanobis distance beyond which a case is downweighted. Unset: square
  // root of the chi-square(p) quantile at 1 - tail_probability. Infinity
  // reproduces the classical moments exactly.
  std::optional<double> radius;
  double tail_probability = 0.05;
  int max_iterations = 1000;
  double tolerance = 1e-10;
};

// Huber-type M-estimates of the mean vector and covariance matrix. Case
// weights on the mean are min(1, r / d); covariance weights are their squares
// divided by the constant that makes the estimate consistent at the normal.
SampleMoments robust_moments(const Eigen::MatrixXd& rows, std::vector<std::string> names,
                             const RobustOptions& options = {});

// Consistency constant E[min(chi2_p, r^2)] / p for the robust covariance.
double huber_consistency(double radius, int p);

}  // namespace panelforge::sem
