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

#include "panelforge/sem/moments.hpp"

#include <algorithm>
#include <cmath>

#include "panelforge/error.hpp"
#include "panelforge/stats.hpp"

namespace panelforge::sem {

SampleMoments SampleMoments::reordered(const std::vector<std::string>& order) const {
  std::vector<Eigen::Index> idx;
  for (const auto& name : order) {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw ArgumentError("moments lack variable '" + name + "'");
    idx.push_back(it - names.begin());
  }
  SampleMoments out = *this;
  out.names = order;
  const auto p = static_cast<Eigen::Index>(order.size());
  out.cov.resize(p, p);
  out.mean.resize(p);
  for (Eigen::Index a = 0; a < p; ++a) {
    out.mean(a) = mean(idx[static_cast<std::size_t>(a)]);
    for (Eigen::Index b = 0; b < p; ++b) out.cov(a, b) = cov(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
  }
  return out;
}

void SampleMoments::validate() const {
  const auto p = static_cast<Eigen::Index>(names.size());
  if (cov.rows() != p || cov.cols() != p || mean.size() != p) throw ArgumentError("moment dimensions disagree");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff())) {
    throw ArgumentError("sample covariance is not symmetric");
  }
}

namespace {

// Shared accumulation so unit weights give bit-identical classical moments.
void weighted_moments(const Eigen::MatrixXd& rows, const Eigen::VectorXd& w_mean, const Eigen::VectorXd& w_cov,
                      Eigen::VectorXd& mean, Eigen::MatrixXd& cov) {
  const auto n = rows.rows();
  const auto p = rows.cols();
  mean = Eigen::VectorXd::Zero(p);
  double wsum = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    mean += w_mean(i) * rows.row(i).transpose();
    wsum += w_mean(i);
  }
  mean /= wsum;
  cov = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd d = rows.row(i).transpose() - mean;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(d, w_cov(i));
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= static_cast<double>(n - 1);
}

}  // namespace

SampleMoments classical_moments(const Eigen::MatrixXd& rows, std::vector<std::string> names) {
  if (static_cast<std::size_t>(rows.cols()) != names.size()) throw ArgumentError("names do not match columns");
  if (rows.rows() < 2) throw ArgumentError("moments need at least two cases");
  SampleMoments out;
  out.names = std::move(names);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(rows.rows());
  weighted_moments(rows, ones, ones, out.mean, out.cov);
  out.n = static_cast<double>(rows.rows());
  out.provenance = MomentsProvenance::classical;
  return out;
}

double huber_consistency(double radius, int p) {
  if (std::isinf(radius)) return 1.0;
  const double r2 = radius * radius;
  const double pd = static_cast<double>(p);
  return (pd * stats::chi_square_cdf(r2, pd + 2) + r2 * stats::chi_square_sf(r2, pd)) / pd;
}

SampleMoments robust_moments(const Eigen::MatrixXd& rows, std::vector<std::string> names,
                             const RobustOptions& options) {
  const auto n = rows.rows();
  const auto p = rows.cols();
  if (static_cast<std::size_t>(p) != names.size()) throw ArgumentError("names do not match columns");
  if (n < p + 1) throw ArgumentError("robust moments need at least p + 1 cases");
  const double radius = options.radius.value_or(
      std::sqrt(stats::chi_square_quantile(1.0 - options.tail_probability, static_cast<double>(p))));
  if (!(radius > 0)) throw ArgumentError("robust radius must be positive");
  const double phi = huber_consistency(radius, static_cast<int>(p));

  SampleMoments out;
  out.names = std::move(names);
  out.n = static_cast<double>(n);
  out.provenance = MomentsProvenance::robust;
  out.radius = radius;

  Eigen::VectorXd w1 = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd w2 = Eigen::VectorXd::Ones(n);
  weighted_moments(rows, w1, w2, out.mean, out.cov);
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    Eigen::LLT<Eigen::MatrixXd> llt(out.cov);
    if (llt.info() != Eigen::Success) throw NumericalError("robust moments: working covariance is singular");
    std::size_t down = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd d = rows.row(i).transpose() - out.mean;
      const double dist = std::sqrt(d.dot(llt.solve(d)));
      const double u = dist > radius ? radius / dist : 1.0;
      down += u < 1.0;
      w1(i) = u;
      w2(i) = u * u / phi;
    }
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    weighted_moments(rows, w1, w2, mean, cov);
    const double dmean = (mean - out.mean).cwiseAbs().maxCoeff();
    const double dcov = (cov - out.cov).cwiseAbs().maxCoeff() / std::max(1.0, cov.cwiseAbs().maxCoeff());
    out.mean = std::move(mean);
    out.cov = std::move(cov);
    out.iterations = iter;
    out.downweighted_fraction = static_cast<double>(down) / static_cast<double>(n);
    if (dmean < options.tolerance && dcov < options.tolerance) return out;
  }
  throw NumericalError("robust moments did not converge in " + std::to_string(options.max_iterations) + " iterations");
}

}  // namespace panelforge::sem
