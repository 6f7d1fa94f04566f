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

#include "panelforge/sem/model.hpp"

#include <cmath>
#include <set>

#include "panelforge/error.hpp"

namespace panelforge::sem {

int CovarianceModel::add_variable(std::string name, VariableKind kind) {
  if (names_.contains(name)) throw ArgumentError("variable '" + name + "' declared twice");
  const int idx = static_cast<int>(variables_.size());
  names_.emplace(name, idx);
  variables_.push_back({std::move(name), kind});
  if (kind == VariableKind::observed) observed_.push_back(idx);
  return idx;
}

int CovarianceModel::add_observed(std::string name) { return add_variable(std::move(name), VariableKind::observed); }
int CovarianceModel::add_latent(std::string name) { return add_variable(std::move(name), VariableKind::latent); }

std::vector<std::string> CovarianceModel::observed_names() const {
  std::vector<std::string> out;
  for (int i : observed_) out.push_back(variables_[static_cast<std::size_t>(i)].name);
  return out;
}

int CovarianceModel::index_of(std::string_view name) const {
  auto it = names_.find(name);
  if (it == names_.end()) throw ArgumentError("unknown variable '" + std::string(name) + "'");
  return it->second;
}

std::optional<std::size_t> CovarianceModel::parameter_index(std::string_view id) const {
  auto it = param_index_.find(id);
  if (it == param_index_.end()) return std::nullopt;
  return it->second;
}

void CovarianceModel::set_slot(MatrixKind matrix, int row, int col, EntrySpec spec) {
  const auto key = std::make_tuple(static_cast<int>(matrix), row, col);
  if (auto it = slot_index_.find(key); it != slot_index_.end()) {
    slots_[it->second].spec = std::move(spec);
  } else {
    slot_index_.emplace(key, slots_.size());
    slots_.push_back({matrix, row, col, std::move(spec)});
  }
  rebuild_parameters();
}

void CovarianceModel::rebuild_parameters() {
  params_.clear();
  param_index_.clear();
  for (std::size_t s = 0; s < slots_.size(); ++s) {
    const auto& slot = slots_[s];
    if (!slot.spec.parameter) continue;
    auto [it, fresh] = param_index_.emplace(*slot.spec.parameter, params_.size());
    if (fresh) params_.push_back({*slot.spec.parameter, {}, false});
    auto& p = params_[it->second];
    p.slots.push_back(s);
    if (slot.matrix == MatrixKind::covariance && slot.row == slot.col) p.variance = true;
  }
}

void CovarianceModel::path(std::string_view from, std::string_view to, EntrySpec spec) {
  const int f = index_of(from);
  const int t = index_of(to);
  if (f == t) throw ArgumentError("self-loop on '" + std::string(from) + "'");
  set_slot(MatrixKind::path, t, f, std::move(spec));
}

void CovarianceModel::covariance(std::string_view a, std::string_view b, EntrySpec spec) {
  int i = index_of(a);
  int j = index_of(b);
  if (i < j) std::swap(i, j);
  set_slot(MatrixKind::covariance, i, j, std::move(spec));
}

void CovarianceModel::mean(std::string_view v, EntrySpec spec) { set_slot(MatrixKind::mean, index_of(v), 0, std::move(spec)); }

std::string CovarianceModel::describe(const Slot& slot) const {
  const auto& r = variables_[static_cast<std::size_t>(slot.row)].name;
  const auto& c = variables_[static_cast<std::size_t>(slot.col)].name;
  switch (slot.matrix) {
    case MatrixKind::path: return r + " <- " + c;
    case MatrixKind::covariance: return slot.row == slot.col ? "var(" + r + ")" : "cov(" + r + "," + c + ")";
    case MatrixKind::mean: return "mean(" + r + ")";
  }
  return "";
}

void CovarianceModel::validate() const {
  const std::size_t m = variables_.size();
  std::vector<std::vector<int>> out(m);
  std::vector<int> indegree(m, 0);
  for (const auto& s : slots_) {
    if (s.matrix != MatrixKind::path) continue;
    if (!s.spec.parameter && s.spec.value == 0.0) continue;
    out[static_cast<std::size_t>(s.col)].push_back(s.row);
    ++indegree[static_cast<std::size_t>(s.row)];
  }
  std::vector<int> queue;
  for (std::size_t i = 0; i < m; ++i) {
    if (indegree[i] == 0) queue.push_back(static_cast<int>(i));
  }
  std::size_t visited = 0;
  while (!queue.empty()) {
    const int v = queue.back();
    queue.pop_back();
    ++visited;
    for (int w : out[static_cast<std::size_t>(v)]) {
      if (--indegree[static_cast<std::size_t>(w)] == 0) queue.push_back(w);
    }
  }
  if (visited != m) throw SpecError("directed paths form a cycle; only recursive models are supported");
}

ModelMatrices CovarianceModel::matrices(const Eigen::VectorXd& theta) const {
  if (theta.size() != static_cast<Eigen::Index>(params_.size())) {
    throw ArgumentError("parameter vector has " + std::to_string(theta.size()) + " entries, model has " +
                        std::to_string(params_.size()));
  }
  const auto m = static_cast<Eigen::Index>(variables_.size());
  ModelMatrices out{Eigen::MatrixXd::Zero(m, m), Eigen::MatrixXd::Zero(m, m), Eigen::VectorXd::Zero(m)};
  for (const auto& s : slots_) {
    double v = s.spec.value;
    if (s.spec.parameter) v = s.spec.scale * theta(static_cast<Eigen::Index>(param_index_.find(*s.spec.parameter)->second));
    switch (s.matrix) {
      case MatrixKind::path: out.paths(s.row, s.col) = v; break;
      case MatrixKind::covariance:
        out.covariance(s.row, s.col) = v;
        out.covariance(s.col, s.row) = v;
        break;
      case MatrixKind::mean: out.means(s.row) = v; break;
    }
  }
  return out;
}

namespace {

struct Reduced {
  Eigen::MatrixXd ft;     // observed rows of T = (I - A)^-1, p x m
  Eigen::MatrixXd fomega; // observed rows of Omega = T S T', p x m
  Eigen::VectorXd tnu;    // T m
  Eigen::MatrixXd omega;
};

Reduced reduce(const CovarianceModel& model, const ModelMatrices& mats) {
  const auto m = mats.paths.rows();
  const Eigen::MatrixXd i_minus_a = Eigen::MatrixXd::Identity(m, m) - mats.paths;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(i_minus_a);
  const double det = lu.determinant();
  if (!std::isfinite(det) || std::fabs(det) < 1e-12) {
    throw NumericalError("I - A is singular: cyclic or degenerate path structure");
  }
  const Eigen::MatrixXd t = lu.inverse();
  Reduced r;
  r.omega = t * mats.covariance * t.transpose();
  const auto& obs = model.observed();
  const auto p = static_cast<Eigen::Index>(obs.size());
  r.ft.resize(p, m);
  r.fomega.resize(p, m);
  for (Eigen::Index k = 0; k < p; ++k) {
    r.ft.row(k) = t.row(obs[static_cast<std::size_t>(k)]);
    r.fomega.row(k) = r.omega.row(obs[static_cast<std::size_t>(k)]);
  }
  r.tnu = t * mats.means;
  return r;
}

}  // namespace

ImpliedMoments implied_moments(const CovarianceModel& model, const Eigen::VectorXd& theta) {
  const auto mats = model.matrices(theta);
  const auto r = reduce(model, mats);
  const auto& obs = model.observed();
  const auto p = static_cast<Eigen::Index>(obs.size());
  ImpliedMoments out;
  out.sigma.resize(p, p);
  out.mu.resize(p);
  for (Eigen::Index a = 0; a < p; ++a) {
    out.mu(a) = r.tnu(obs[static_cast<std::size_t>(a)]);
    for (Eigen::Index b = 0; b < p; ++b) out.sigma(a, b) = r.fomega(a, obs[static_cast<std::size_t>(b)]);
  }
  out.sigma = 0.5 * (out.sigma + out.sigma.transpose());
  return out;
}

MomentJacobian CovarianceModel::jacobian(const Eigen::VectorXd& theta) const {
  const auto mats = matrices(theta);
  const auto r = reduce(*this, mats);
  const auto p = static_cast<Eigen::Index>(observed_.size());
  MomentJacobian jac;
  jac.dsigma.assign(params_.size(), Eigen::MatrixXd::Zero(p, p));
  jac.dmu.assign(params_.size(), Eigen::VectorXd::Zero(p));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& ds = jac.dsigma[k];
    auto& dm = jac.dmu[k];
    for (std::size_t si : params_[k].slots) {
      const auto& s = slots_[si];
      const double scale = s.spec.scale;
      switch (s.matrix) {
        case MatrixKind::path: {
          const Eigen::VectorXd u = r.ft.col(s.row);
          const Eigen::VectorXd v = r.fomega.col(s.col);
          ds.noalias() += scale * (u * v.transpose() + v * u.transpose());
          dm.noalias() += scale * r.tnu(s.col) * u;
          break;
        }
        case MatrixKind::covariance: {
          const Eigen::VectorXd a = r.ft.col(s.row);
          if (s.row == s.col) {
            ds.noalias() += scale * a * a.transpose();
          } else {
            const Eigen::VectorXd b = r.ft.col(s.col);
            ds.noalias() += scale * (a * b.transpose() + b * a.transpose());
          }
          break;
        }
        case MatrixKind::mean: dm.noalias() += scale * r.ft.col(s.row); break;
      }
    }
  }
  return jac;
}

CovarianceModel CovarianceModel::with_slot_released(std::size_t slot, const std::string& new_id) const {
  if (slot >= slots_.size() || !slots_[slot].spec.parameter) throw ArgumentError("slot is not a free parameter");
  if (param_index_.contains(new_id)) throw ArgumentError("parameter id '" + new_id + "' already exists");
  CovarianceModel out = *this;
  out.slots_[slot].spec.parameter = new_id;
  out.rebuild_parameters();
  return out;
}

CovarianceModel independence_model(const std::vector<std::string>& names) {
  CovarianceModel m;
  for (const auto& n : names) m.add_observed(n);
  for (const auto& n : names) {
    m.variance(n, free("var(" + n + ")"));
    m.mean(n, free("mean(" + n + ")"));
  }
  return m;
}

CovarianceModel saturated_model(const std::vector<std::string>& names) {
  CovarianceModel m;
  for (const auto& n : names) m.add_observed(n);
  for (std::size_t i = 0; i < names.size(); ++i) {
    m.mean(names[i], free("mean(" + names[i] + ")"));
    for (std::size_t j = 0; j <= i; ++j) {
      m.covariance(names[i], names[j],
                   free(i == j ? "var(" + names[i] + ")" : "cov(" + names[i] + "," + names[j] + ")"));
    }
  }
  return m;
}

}  // namespace panelforge::sem
