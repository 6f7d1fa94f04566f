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
#include <tuple>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace panelforge::sem {

enum class VariableKind { observed, latent };

struct Variable {
  std::string name;
  VariableKind kind = VariableKind::observed;
};

// Path entries hold the effect of `col` on `row`. Covariance entries are
// stored once with row >= col. Mean entries use col = 0.
enum class MatrixKind { path, covariance, mean };

// What goes into one matrix cell: a fixed value, or `scale` times a named
// free parameter. Cells sharing a parameter id are equality-constrained.
struct EntrySpec {
  std::optional<std::string> parameter;
  double value = 0.0;
  double scale = 1.0;
};

inline EntrySpec fixed(double value) { return EntrySpec{std::nullopt, value, 1.0}; }
inline EntrySpec free(std::string id, double scale = 1.0) { return EntrySpec{std::move(id), 0.0, scale}; }

struct Slot {
  MatrixKind matrix = MatrixKind::path;
  int row = 0;
  int col = 0;
  EntrySpec spec;
};

struct Parameter {
  std::string id;
  std::vector<std::size_t> slots;  // indices into CovarianceModel::slots()
  bool variance = false;           // appears on the covariance diagonal
};

struct ModelMatrices {
  Eigen::MatrixXd paths;       // A, m x m
  Eigen::MatrixXd covariance;  // S, m x m symmetric
  Eigen::VectorXd means;       // m
};

struct ImpliedMoments {
  Eigen::MatrixXd sigma;  // p x p over observed variables, model order
  Eigen::VectorXd mu;
};

// Derivatives of the implied moments with respect to each free parameter.
struct MomentJacobian {
  std::vector<Eigen::MatrixXd> dsigma;
  std::vector<Eigen::VectorXd> dmu;
};

// Reticular-action style model over observed and latent variables:
//   Sigma = F (I - A)^-1 S (I - A)^-T F',  mu = F (I - A)^-1 m
class CovarianceModel {
 public:
  int add_observed(std::string name);
  int add_latent(std::string name);

  // Effect of `from` on `to`.
  void path(std::string_view from, std::string_view to, EntrySpec spec);
  void covariance(std::string_view a, std::string_view b, EntrySpec spec);
  void variance(std::string_view v, EntrySpec spec) { covariance(v, v, std::move(spec)); }
  void mean(std::string_view v, EntrySpec spec);

  const std::vector<Variable>& variables() const { return variables_; }
  const std::vector<int>& observed() const { return observed_; }
  std::vector<std::string> observed_names() const;
  int index_of(std::string_view name) const;
  bool has_variable(std::string_view name) const { return names_.contains(name); }

  const std::vector<Slot>& slots() const { return slots_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::size_t num_parameters() const { return params_.size(); }
  std::optional<std::size_t> parameter_index(std::string_view id) const;

  // Human-readable cell description, e.g. "FSS_3 <- CI_2" or "cov(a,b)".
  std::string describe(const Slot& slot) const;

  // Throws SpecError when the nonzero directed paths form a cycle.
  void validate() const;

  ModelMatrices matrices(const Eigen::VectorXd& theta) const;
  MomentJacobian jacobian(const Eigen::VectorXd& theta) const;

  // Replace the parameter of one slot with a fresh parameter `new_id`.
  CovarianceModel with_slot_released(std::size_t slot, const std::string& new_id) const;

 private:
  int add_variable(std::string name, VariableKind kind);
  void set_slot(MatrixKind matrix, int row, int col, EntrySpec spec);
  void rebuild_parameters();

  std::vector<Variable> variables_;
  std::vector<int> observed_;
  std::map<std::string, int, std::less<>> names_;
  std::vector<Slot> slots_;
  std::map<std::tuple<int, int, int>, std::size_t> slot_index_;
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t, std::less<>> param_index_;
};

// Throws NumericalError("cyclic or degenerate ...") when I - A is singular.
ImpliedMoments implied_moments(const CovarianceModel& model, const Eigen::VectorXd& theta);

// Free means and variances for the named variables, zero covariances.
CovarianceModel independence_model(const std::vector<std::string>& names);
// Free means and a free unrestricted covariance matrix.
CovarianceModel saturated_model(const std::vector<std::string>& names);

}  // namespace panelforge::sem
