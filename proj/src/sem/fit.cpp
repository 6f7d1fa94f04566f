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

#include "panelforge/sem/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "panelforge/stats.hpp"

namespace panelforge::sem {

AlignedMoments::AlignedMoments(const CovarianceModel& model, const SampleMoments& moments) {
  moments.validate();
  const auto aligned = moments.reordered(model.observed_names());
  cov_ = aligned.cov;
  mean_ = aligned.mean;
  n_ = aligned.n;
  Eigen::LLT<Eigen::MatrixXd> llt(cov_);
  if (llt.info() != Eigen::Success) throw NumericalError("sample covariance is not positive definite");
  log_det_ = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

namespace {

struct Evaluation {
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::MatrixXd w;       // Sigma^-1
  Eigen::VectorXd resid;   // m - mu
  ImpliedMoments implied;
};

Evaluation evaluate(const AlignedMoments& mom, const CovarianceModel& model, const Eigen::VectorXd& theta) {
  Evaluation e;
  e.implied = implied_moments(model, theta);
  e.llt.compute(e.implied.sigma);
  if (e.llt.info() != Eigen::Success || !e.implied.sigma.allFinite()) {
    throw NumericalError("implied covariance is not positive definite");
  }
  const auto p = mom.p();
  e.w = e.llt.solve(Eigen::MatrixXd::Identity(p, p));
  e.resid = mom.mean() - e.implied.mu;
  return e;
}

double discrepancy_from(const AlignedMoments& mom, const Evaluation& e) {
  const auto p = static_cast<double>(mom.p());
  const Eigen::MatrixXd l = e.llt.matrixL();
  const double log_det_sigma = 2.0 * l.diagonal().array().log().sum();
  const double trace = (mom.cov().cwiseProduct(e.w)).sum();
  const double mahal = e.resid.dot(e.w * e.resid);
  return log_det_sigma + trace - mom.log_det() - p + mahal;
}

}  // namespace

double ml_discrepancy(const AlignedMoments& moments, const CovarianceModel& model, const Eigen::VectorXd& theta) {
  return discrepancy_from(moments, evaluate(moments, model, theta));
}

double ml_discrepancy(const SampleMoments& moments, const CovarianceModel& model, const Eigen::VectorXd& theta) {
  return ml_discrepancy(AlignedMoments(model, moments), model, theta);
}

Eigen::VectorXd ml_gradient(const AlignedMoments& moments, const CovarianceModel& model, const Eigen::VectorXd& theta) {
  const auto e = evaluate(moments, model, theta);
  const auto jac = model.jacobian(theta);
  const Eigen::VectorXd wr = e.w * e.resid;
  const Eigen::MatrixXd g = e.w - e.w * (moments.cov() + e.resid * e.resid.transpose()) * e.w;
  Eigen::VectorXd grad(theta.size());
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const auto ku = static_cast<std::size_t>(k);
    grad(k) = g.cwiseProduct(jac.dsigma[ku]).sum() - 2.0 * wr.dot(jac.dmu[ku]);
  }
  return grad;
}

Eigen::VectorXd ml_gradient_numeric(const AlignedMoments& moments, const CovarianceModel& model,
                                    const Eigen::VectorXd& theta, double step) {
  Eigen::VectorXd grad(theta.size());
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const double h = step * std::max(1.0, std::fabs(theta(k)));
    Eigen::VectorXd up = theta;
    Eigen::VectorXd down = theta;
    up(k) += h;
    down(k) -= h;
    grad(k) = (ml_discrepancy(moments, model, up) - ml_discrepancy(moments, model, down)) / (2 * h);
  }
  return grad;
}

Eigen::MatrixXd expected_information(const CovarianceModel& model, const Eigen::VectorXd& theta) {
  const auto implied = implied_moments(model, theta);
  Eigen::LLT<Eigen::MatrixXd> llt(implied.sigma);
  if (llt.info() != Eigen::Success) throw NumericalError("implied covariance is not positive definite");
  const auto p = implied.sigma.rows();
  const Eigen::MatrixXd w = llt.solve(Eigen::MatrixXd::Identity(p, p));
  const auto jac = model.jacobian(theta);
  const auto q = theta.size();
  std::vector<Eigen::MatrixXd> ws(static_cast<std::size_t>(q));
  std::vector<Eigen::VectorXd> wm(static_cast<std::size_t>(q));
  for (Eigen::Index k = 0; k < q; ++k) {
    ws[static_cast<std::size_t>(k)] = w * jac.dsigma[static_cast<std::size_t>(k)];
    wm[static_cast<std::size_t>(k)] = w * jac.dmu[static_cast<std::size_t>(k)];
  }
  Eigen::MatrixXd info(q, q);
  for (Eigen::Index k = 0; k < q; ++k) {
    for (Eigen::Index l = 0; l <= k; ++l) {
      const auto ku = static_cast<std::size_t>(k);
      const auto lu = static_cast<std::size_t>(l);
      const double v = ws[ku].cwiseProduct(ws[lu].transpose()).sum() + 2.0 * jac.dmu[ku].dot(wm[lu]);
      info(k, l) = info(l, k) = v;
    }
  }
  return info;
}

const ParameterEstimate* FitResult::find(std::string_view id) const {
  for (const auto& p : parameters) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

const ParameterEstimate& FitResult::parameter(std::string_view id) const {
  const auto* p = find(id);
  if (!p) throw ArgumentError("fit has no parameter '" + std::string(id) + "'");
  return *p;
}

namespace {

bool is_endogenous(const CovarianceModel& model, int v) {
  for (const auto& s : model.slots()) {
    if (s.matrix == MatrixKind::path && s.row == v && (s.spec.parameter || s.spec.value != 0.0)) return true;
  }
  return false;
}

bool implied_is_pd(const CovarianceModel& model, const Eigen::VectorXd& theta) {
  try {
    const auto im = implied_moments(model, theta);
    Eigen::LLT<Eigen::MatrixXd> llt(im.sigma);
    return llt.info() == Eigen::Success && im.sigma.allFinite();
  } catch (const NumericalError&) {
    return false;
  }
}

}  // namespace

Eigen::VectorXd start_values(const CovarianceModel& model, const SampleMoments& raw, const FitOptions& options) {
  const auto mom = raw.reordered(model.observed_names());
  const auto& vars = model.variables();
  const auto m = static_cast<int>(vars.size());
  std::vector<int> obs_pos(static_cast<std::size_t>(m), -1);
  for (std::size_t k = 0; k < model.observed().size(); ++k) obs_pos[static_cast<std::size_t>(model.observed()[k])] = static_cast<int>(k);

  // Per endogenous observed variable: OLS on observed predictors.
  struct Equation {
    std::vector<int> predictors;
    Eigen::VectorXd beta;
    double intercept = 0;
    double residual = 0;
    std::vector<int> latent_sources;
  };
  std::map<int, Equation> eqs;
  for (const auto& s : model.slots()) {
    if (s.matrix != MatrixKind::path || obs_pos[static_cast<std::size_t>(s.row)] < 0) continue;
    if (!s.spec.parameter && s.spec.value == 0.0) continue;
    auto& eq = eqs[s.row];
    if (obs_pos[static_cast<std::size_t>(s.col)] >= 0) {
      eq.predictors.push_back(s.col);
    } else {
      eq.latent_sources.push_back(s.col);
    }
  }
  for (auto& [y, eq] : eqs) {
    const auto yi = obs_pos[static_cast<std::size_t>(y)];
    const auto k = static_cast<Eigen::Index>(eq.predictors.size());
    Eigen::MatrixXd sxx(k, k);
    Eigen::VectorXd sxy(k);
    Eigen::VectorXd mx(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      const auto ia = obs_pos[static_cast<std::size_t>(eq.predictors[static_cast<std::size_t>(a)])];
      sxy(a) = mom.cov(ia, yi);
      mx(a) = mom.mean(ia);
      for (Eigen::Index b = 0; b < k; ++b) {
        sxx(a, b) = mom.cov(ia, obs_pos[static_cast<std::size_t>(eq.predictors[static_cast<std::size_t>(b)])]);
      }
    }
    eq.beta = k > 0 ? Eigen::VectorXd(sxx.ldlt().solve(sxy)) : Eigen::VectorXd();
    if (!eq.beta.allFinite()) eq.beta = Eigen::VectorXd::Constant(k, 0.1);
    eq.intercept = mom.mean(yi) - (k > 0 ? eq.beta.dot(mx) : 0.0);
    eq.residual = mom.cov(yi, yi) - (k > 0 ? eq.beta.dot(sxy) : 0.0);
    if (!(eq.residual > 1e-6 * mom.cov(yi, yi))) eq.residual = 0.1 * mom.cov(yi, yi);
  }

  // Latent variance start: a share of its indicators' residual variance.
  std::map<int, double> latent_var;
  for (const auto& [y, eq] : eqs) {
    for (int l : eq.latent_sources) latent_var[l] += 0.2 * eq.residual / static_cast<double>(eq.latent_sources.size());
  }
  std::map<int, int> latent_count;
  for (const auto& [y, eq] : eqs) {
    for (int l : eq.latent_sources) ++latent_count[l];
  }
  for (auto& [l, v] : latent_var) v /= latent_count[l];

  const auto& params = model.parameters();
  Eigen::VectorXd theta(static_cast<Eigen::Index>(params.size()));
  for (std::size_t k = 0; k < params.size(); ++k) {
    double sum = 0;
    for (std::size_t si : params[k].slots) {
      const auto& s = model.slots()[si];
      const auto ri = obs_pos[static_cast<std::size_t>(s.row)];
      const auto ci = obs_pos[static_cast<std::size_t>(s.col)];
      double v = 0;
      switch (s.matrix) {
        case MatrixKind::path: {
          v = 0.1;
          auto it = eqs.find(s.row);
          if (it != eqs.end() && ci >= 0) {
            auto pos = std::find(it->second.predictors.begin(), it->second.predictors.end(), s.col);
            v = it->second.beta(pos - it->second.predictors.begin());
          } else if (ci < 0 && ri >= 0) {
            v = 1.0;
          }
          break;
        }
        case MatrixKind::covariance:
          if (s.row == s.col) {
            if (ri >= 0) {
              auto it = eqs.find(s.row);
              if (it == eqs.end()) {
                v = mom.cov(ri, ri);
              } else {
                v = it->second.residual * (it->second.latent_sources.empty() ? 1.0 : 0.8);
              }
            } else {
              auto it = latent_var.find(s.row);
              v = it == latent_var.end() ? 1.0 : it->second;
            }
          } else if (ri >= 0 && ci >= 0 && !eqs.contains(s.row) && !eqs.contains(s.col)) {
            v = mom.cov(ri, ci);
          }
          break;
        case MatrixKind::mean:
          if (ri >= 0) {
            auto it = eqs.find(s.row);
            v = it == eqs.end() ? mom.mean(ri) : it->second.intercept;
          }
          break;
      }
      sum += v / s.spec.scale;
    }
    theta(static_cast<Eigen::Index>(k)) = sum / static_cast<double>(params[k].slots.size());
    if (params[k].variance && !(theta(static_cast<Eigen::Index>(k)) > 0)) theta(static_cast<Eigen::Index>(k)) = 0.1;
  }
  for (const auto& [id, value] : options.start) {
    if (auto idx = model.parameter_index(id)) theta(static_cast<Eigen::Index>(*idx)) = value;
  }

  // Shared paths start at an average over their equations, which breaks the
  // per-equation intercepts. Refit free intercepts so the implied means of
  // endogenous observed variables match the sample, in causal order.
  for (int pass = 0; pass < m; ++pass) {
    const auto mats = model.matrices(theta);
    const Eigen::MatrixXd ia = Eigen::MatrixXd::Identity(m, m) - mats.paths;
    const Eigen::VectorXd mu = ia.lu().solve(mats.means);
    std::vector<double> sum(params.size(), 0.0);
    std::vector<int> count(params.size(), 0);
    for (const auto& s : model.slots()) {
      if (s.matrix != MatrixKind::mean || !s.spec.parameter || options.start.contains(*s.spec.parameter)) continue;
      const auto ri = obs_pos[static_cast<std::size_t>(s.row)];
      if (ri < 0 || !eqs.contains(s.row)) continue;
      const double inflow = mats.paths.row(s.row).dot(mu);
      const auto k = *model.parameter_index(*s.spec.parameter);
      sum[k] += (mom.mean(ri) - inflow) / s.spec.scale;
      ++count[k];
    }
    double change = 0;
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (count[k] == 0) continue;
      const double v = sum[k] / count[k];
      change = std::max(change, std::fabs(v - theta(static_cast<Eigen::Index>(k))));
      theta(static_cast<Eigen::Index>(k)) = v;
    }
    if (change < 1e-12) break;
  }

  if (!implied_is_pd(model, theta)) {
    // Drop covariances first, then paths.
    for (std::size_t k = 0; k < params.size(); ++k) {
      const auto& s = model.slots()[params[k].slots.front()];
      if (s.matrix == MatrixKind::covariance && !params[k].variance) theta(static_cast<Eigen::Index>(k)) = 0;
    }
    if (!implied_is_pd(model, theta)) {
      for (std::size_t k = 0; k < params.size(); ++k) {
        const auto& s = model.slots()[params[k].slots.front()];
        if (s.matrix == MatrixKind::path) theta(static_cast<Eigen::Index>(k)) = 0;
      }
    }
  }
  return theta;
}

namespace {

// Maps optimizer coordinates z to parameters theta: variances are exp(z).
struct Transform {
  std::vector<bool> log;

  Eigen::VectorXd to_theta(const Eigen::VectorXd& z) const {
    Eigen::VectorXd t = z;
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      if (log[static_cast<std::size_t>(k)]) t(k) = std::exp(z(k));
    }
    return t;
  }
  Eigen::VectorXd to_z(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd z = theta;
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      if (log[static_cast<std::size_t>(k)]) z(k) = std::log(theta(k));
    }
    return z;
  }
  // d theta / d z
  Eigen::VectorXd derivative(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd d = Eigen::VectorXd::Ones(theta.size());
    for (Eigen::Index k = 0; k < d.size(); ++k) {
      if (log[static_cast<std::size_t>(k)]) d(k) = theta(k);
    }
    return d;
  }
};

Eigen::MatrixXd inverse_information_z(const CovarianceModel& model, const Eigen::VectorXd& theta,
                                      const Transform& tr) {
  const Eigen::VectorXd d = tr.derivative(theta);
  Eigen::MatrixXd h = d.asDiagonal() * expected_information(model, theta) * d.asDiagonal();
  const auto q = h.rows();
  const double ridge = 1e-10 * std::max(1e-12, h.diagonal().cwiseAbs().maxCoeff());
  h += ridge * Eigen::MatrixXd::Identity(q, q);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
  Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(q, q));
  if (!inv.allFinite() || ldlt.info() != Eigen::Success) inv = Eigen::MatrixXd::Identity(q, q);
  return inv;
}

void finish(FitResult& r, const CovarianceModel& model, const AlignedMoments& mom, const SampleMoments& raw,
            const FitOptions& options) {
  const auto& params = model.parameters();
  r.observed = model.observed_names();
  r.n = mom.n();
  r.p = static_cast<std::size_t>(mom.p());
  r.q = params.size();
  r.provenance = raw.provenance;
  r.chi_square = std::max(0.0, (r.n - 1.0) * r.f_min);
  const int moments_count = static_cast<int>(r.p * (r.p + 3) / 2);
  r.df = moments_count - static_cast<int>(r.q);
  r.p_value = r.df > 0 ? stats::chi_square_sf(r.chi_square, r.df) : 1.0;
  r.aic = r.chi_square + 2.0 * static_cast<double>(r.q);

  const auto implied = implied_moments(model, r.theta);
  r.sigma = implied.sigma;
  r.mu = implied.mu;

  Eigen::VectorXd se = Eigen::VectorXd::Constant(r.theta.size(), std::numeric_limits<double>::quiet_NaN());
  if (options.standard_errors && r.q > 0) {
    const Eigen::MatrixXd info = expected_information(model, r.theta);
    const Eigen::VectorXd scale = info.diagonal().cwiseAbs().cwiseSqrt().cwiseMax(1e-300).cwiseInverse();
    const Eigen::MatrixXd normalized = scale.asDiagonal() * info * scale.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normalized);
    const double min_eig = eig.eigenvalues().minCoeff();
    if (!(min_eig > 1e-10 * eig.eigenvalues().maxCoeff())) {
      // Name the parameter loading most on the null direction.
      Eigen::Index worst = 0;
      eig.eigenvectors().col(0).cwiseAbs().maxCoeff(&worst);
      throw SpecError("model is not identified: information matrix is rank deficient (weakest direction involves '" +
                      params[static_cast<std::size_t>(worst)].id + "')");
    }
    const Eigen::MatrixXd inv =
        scale.asDiagonal() * eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
        eig.eigenvectors().transpose() * scale.asDiagonal();
    se = (2.0 / (r.n - 1.0) * inv.diagonal()).cwiseMax(0.0).cwiseSqrt();
  }
  r.parameters.clear();
  for (std::size_t k = 0; k < params.size(); ++k) {
    ParameterEstimate pe;
    pe.id = params[k].id;
    pe.estimate = r.theta(static_cast<Eigen::Index>(k));
    pe.se = se(static_cast<Eigen::Index>(k));
    for (std::size_t s : params[k].slots) pe.locations.push_back(model.describe(model.slots()[s]));
    r.parameters.push_back(std::move(pe));
  }

  const auto mats = model.matrices(r.theta);
  for (std::size_t k = 0; k < model.observed().size(); ++k) {
    const int v = model.observed()[k];
    if (!is_endogenous(model, v)) continue;
    const auto kk = static_cast<Eigen::Index>(k);
    r.r_squared[model.variables()[static_cast<std::size_t>(v)].name] = 1.0 - mats.covariance(v, v) / r.sigma(kk, kk);
  }

  SampleMoments aligned = raw.reordered(r.observed);
  r.srmr = srmr(aligned, r);
  auto [chi_b, df_b] = independence_chi_square(aligned);
  r.baseline_chi_square = chi_b;
  r.baseline_df = df_b;
  r.cfi = comparative_fit_index(r.chi_square, r.df, chi_b, df_b);
  if (r.df > 0) {
    r.rmsea = rmsea(r.chi_square, r.df, r.n);
    if (df_b > 0) r.tli = tucker_lewis_index(r.chi_square, r.df, chi_b, df_b);
  }
}

}  // namespace

FitResult fit(const CovarianceModel& model, const SampleMoments& moments, const FitOptions& options) {
  model.validate();
  const AlignedMoments mom(model, moments);
  const auto q = static_cast<Eigen::Index>(model.num_parameters());
  if (model.observed().empty()) throw SpecError("model has no observed variables");
  const auto p = mom.p();
  if (q > p * (p + 3) / 2) {
    throw SpecError("model is not identified: " + std::to_string(q) + " parameters for " +
                    std::to_string(p * (p + 3) / 2) + " moments");
  }
  if (mom.n() < static_cast<double>(p + 1)) throw ArgumentError("fitting needs N >= p + 1 cases");

  Transform tr;
  for (const auto& prm : model.parameters()) tr.log.push_back(options.log_variances && prm.variance);

  Eigen::VectorXd theta = start_values(model, moments, options);
  Eigen::VectorXd z = tr.to_z(theta);

  auto objective = [&](const Eigen::VectorXd& zz, double& f) {
    try {
      f = ml_discrepancy(mom, model, tr.to_theta(zz));
      return std::isfinite(f);
    } catch (const NumericalError&) {
      return false;
    }
  };
  auto gradient = [&](const Eigen::VectorXd& zz) -> Eigen::VectorXd {
    const Eigen::VectorXd t = tr.to_theta(zz);
    Eigen::VectorXd g = options.analytic_gradient ? ml_gradient(mom, model, t) : ml_gradient_numeric(mom, model, t);
    if (!g.allFinite()) g = ml_gradient_numeric(mom, model, t);
    return g.cwiseProduct(tr.derivative(t));
  };

  struct Run {
    Eigen::VectorXd z;
    double f = 0;
    Convergence conv;
  };
  auto minimize = [&](Eigen::VectorXd z) {
    double f = 0;
    if (!objective(z, f)) throw NumericalError("implied covariance is not positive definite at the start values");
    Eigen::VectorXd g = q > 0 ? gradient(z) : Eigen::VectorXd();
    Eigen::MatrixXd hinv = q > 0 ? inverse_information_z(model, tr.to_theta(z), tr) : Eigen::MatrixXd();
    Convergence conv;
    int iter = 0;
    bool fresh_hessian = true;
    while (true) {
      conv.gradient_norm = q > 0 ? g.cwiseAbs().maxCoeff() : 0.0;
      if (conv.gradient_norm < options.gradient_tolerance) {
        conv.converged = true;
        conv.message = "gradient below tolerance";
        break;
      }
      if (iter >= options.max_iterations) {
        conv.message = "iteration limit reached";
        break;
      }
      Eigen::VectorXd dir = -hinv * g;
      double slope = g.dot(dir);
      if (!(slope < 0)) {
        hinv = inverse_information_z(model, tr.to_theta(z), tr);
        fresh_hessian = true;
        dir = -hinv * g;
        slope = g.dot(dir);
        if (!(slope < 0)) {
          dir = -g;
          slope = -g.squaredNorm();
        }
      }

      double step = 1.0;
      Eigen::VectorXd z_new;
      Eigen::VectorXd g_new;
      double f_new = 0;
      bool accepted = false;
      const double g_norm = g.norm();
      for (int ls = 0; ls < 60; ++ls) {
        z_new = z + step * dir;
        if (objective(z_new, f_new)) {
          if (f_new <= f + 1e-4 * step * slope) {
            g_new = gradient(z_new);
            accepted = true;
            break;
          }
          // At the optimum F stops resolving decreases; accept steps that
          // keep F flat to rounding while shrinking the gradient.
          if (std::fabs(f_new - f) <= 1e-13 * std::max(1.0, std::fabs(f))) {
            g_new = gradient(z_new);
            if (g_new.norm() < g_norm) {
              accepted = true;
              break;
            }
          }
        }
        step *= 0.5;
      }
      ++iter;
      if (!accepted) {
        if (fresh_hessian) {
          conv.message = "line search failed";
          break;
        }
        hinv = inverse_information_z(model, tr.to_theta(z), tr);
        fresh_hessian = true;
        continue;
      }
      const Eigen::VectorXd s = z_new - z;
      const Eigen::VectorXd y = g_new - g;
      const double sy = s.dot(y);
      if (sy > 1e-12 * s.norm() * y.norm()) {
        const double rho = 1.0 / sy;
        const Eigen::VectorXd hy = hinv * y;
        hinv += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
      }
      fresh_hessian = false;
      z = z_new;
      f = f_new;
      g = g_new;
    }
    conv.iterations = iter;
    return Run{z, f, conv};
  };

  Run run = minimize(z);
  z = run.z;
  const double f = run.f;
  const Convergence conv = run.conv;
  const int iter = conv.iterations;

  FitResult result;

  result.theta = tr.to_theta(z);
  result.f_min = f;
  result.convergence = conv;
  if (!conv.converged) {
    // Best point still gets its fit statistics for diagnostics.
    FitOptions quiet = options;
    quiet.standard_errors = false;
    finish(result, model, mom, moments, quiet);
    throw ConvergenceError("optimizer did not converge after " + std::to_string(iter) + " iterations (" +
                               conv.message + ", max gradient " + std::to_string(conv.gradient_norm) + ")",
                           std::move(result));
  }
  finish(result, model, mom, moments, options);
  return result;
}

double srmr(const SampleMoments& moments, const FitResult& fit) {
  const auto aligned = moments.reordered(fit.observed);
  const auto p = static_cast<Eigen::Index>(fit.p);
  double ss = 0;
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double r = (aligned.cov(i, j) - fit.sigma(i, j)) / std::sqrt(aligned.cov(i, i) * aligned.cov(j, j));
      ss += r * r;
      ++count;
    }
    const double rm = (aligned.mean(i) - fit.mu(i)) / std::sqrt(aligned.cov(i, i));
    ss += rm * rm;
    ++count;
  }
  return std::sqrt(ss / static_cast<double>(count));
}

double rmsea(double chi_square, int df, double n) {
  if (df <= 0) throw NumericalError("RMSEA is undefined for df = 0");
  return std::sqrt(std::max(chi_square - df, 0.0) / (static_cast<double>(df) * (n - 1.0)));
}

double comparative_fit_index(double chi_model, int df_model, double chi_baseline, int df_baseline) {
  const double num = std::max(chi_model - df_model, 0.0);
  const double den = std::max({chi_baseline - df_baseline, chi_model - df_model, 0.0});
  return den > 0 ? 1.0 - num / den : 1.0;
}

double tucker_lewis_index(double chi_model, int df_model, double chi_baseline, int df_baseline) {
  if (df_model <= 0 || df_baseline <= 0) throw NumericalError("TLI is undefined for df = 0");
  const double rb = chi_baseline / df_baseline;
  const double rm = chi_model / df_model;
  return (rb - rm) / (rb - 1.0);
}

FitIndices fit_indices(const FitResult& fit, const FitResult& baseline, const SampleMoments& moments) {
  if (fit.df <= 0) throw NumericalError("RMSEA and TLI are undefined for df = 0");
  FitIndices out;
  out.srmr = srmr(moments, fit);
  out.rmsea = rmsea(fit.chi_square, fit.df, fit.n);
  out.cfi = comparative_fit_index(fit.chi_square, fit.df, baseline.chi_square, baseline.df);
  out.tli = tucker_lewis_index(fit.chi_square, fit.df, baseline.chi_square, baseline.df);
  return out;
}

std::pair<double, int> independence_chi_square(const SampleMoments& moments) {
  const auto p = moments.cov.rows();
  Eigen::LLT<Eigen::MatrixXd> llt(moments.cov);
  if (llt.info() != Eigen::Success) throw NumericalError("sample covariance is not positive definite");
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double f = moments.cov.diagonal().array().log().sum() - log_det;
  return {std::max(0.0, (moments.n - 1.0) * f), static_cast<int>(p * (p - 1) / 2)};
}

ChiSquareDifference chi_square_difference(double chi_restricted, int df_restricted, double chi_full, int df_full) {
  if (df_restricted <= df_full) throw ArgumentError("restricted model must have more degrees of freedom");
  double delta = chi_restricted - chi_full;
  if (delta < 0) {
    if (delta < -1e-6 * std::max(1.0, chi_full)) {
      throw ArgumentError("nesting violation: restricted model fits better than the full model");
    }
    delta = 0;
  }
  ChiSquareDifference out;
  out.delta_chi_square = delta;
  out.delta_df = df_restricted - df_full;
  out.p_value = stats::chi_square_sf(delta, out.delta_df);
  return out;
}

ChiSquareDifference chi_square_diff_test(const FitResult& restricted, const FitResult& full) {
  return chi_square_difference(restricted.chi_square, restricted.df, full.chi_square, full.df);
}

ConstraintRef ConstraintRef::parse(std::string_view text) {
  auto at = text.rfind('@');
  if (at == std::string_view::npos) throw ArgumentError("constraint id must look like '<parameter>@<slot>'");
  ConstraintRef c;
  c.parameter = std::string(text.substr(0, at));
  const auto rest = text.substr(at + 1);
  if (rest.empty() || rest.find_first_not_of("0123456789") != std::string_view::npos) {
    throw ArgumentError("constraint id must look like '<parameter>@<slot>'");
  }
  c.location = std::stoul(std::string(rest));
  return c;
}

std::vector<ConstraintRef> equality_constraints(const CovarianceModel& model) {
  std::vector<ConstraintRef> out;
  for (const auto& p : model.parameters()) {
    if (p.slots.size() < 2) continue;
    for (std::size_t k = 0; k < p.slots.size(); ++k) out.push_back({p.id, k});
  }
  return out;
}

ModificationIndex lm_test(const CovarianceModel& model, const FitResult& fit, const SampleMoments& moments,
                          const ConstraintRef& constraint) {
  const auto idx = model.parameter_index(constraint.parameter);
  if (!idx) throw ArgumentError("unknown constraint parameter '" + constraint.parameter + "'");
  const auto& prm = model.parameters()[*idx];
  if (prm.slots.size() < 2) throw ArgumentError("parameter '" + constraint.parameter + "' is not equality-constrained");
  if (constraint.location >= prm.slots.size()) throw ArgumentError("constraint slot out of range: " + constraint.to_string());
  if (fit.theta.size() != static_cast<Eigen::Index>(model.num_parameters())) {
    throw ArgumentError("fit does not belong to this model");
  }

  const std::string new_id = constraint.to_string() + "#released";
  const auto slot = prm.slots[constraint.location];
  const auto released = model.with_slot_released(slot, new_id);
  Eigen::VectorXd theta(static_cast<Eigen::Index>(released.num_parameters()));
  for (std::size_t k = 0; k < released.parameters().size(); ++k) {
    const auto& id = released.parameters()[k].id;
    const auto src = id == new_id ? *idx : *model.parameter_index(id);
    theta(static_cast<Eigen::Index>(k)) = fit.theta(static_cast<Eigen::Index>(src));
  }
  const AlignedMoments mom(released, moments);
  const Eigen::VectorXd g = ml_gradient(mom, released, theta);
  const Eigen::MatrixXd info = expected_information(released, theta);
  const auto n_idx = static_cast<Eigen::Index>(*released.parameter_index(new_id));

  // At the restricted optimum the shared parameter's score splits between the
  // kept and the released slot, so the full quadratic form is needed.
  ModificationIndex out;
  out.constraint = constraint;
  out.location = model.describe(model.slots()[slot]);
  out.gradient = g(n_idx);
  const auto q = info.rows();
  const double ridge = 1e-12 * std::max(1e-12, info.diagonal().cwiseAbs().maxCoeff());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info + ridge * Eigen::MatrixXd::Identity(q, q));
  const Eigen::VectorXd lambda = eig.eigenvalues();
  const double cutoff = 1e-10 * lambda.maxCoeff();
  Eigen::VectorXd proj = eig.eigenvectors().transpose() * g;
  for (Eigen::Index k = 0; k < q; ++k) proj(k) = lambda(k) > cutoff ? proj(k) / lambda(k) : 0.0;
  const Eigen::VectorXd step = eig.eigenvectors() * proj;
  out.mi = std::max(0.0, 0.5 * (fit.n - 1.0) * g.dot(step));
  out.expected_change = -step(n_idx);
  return out;
}

}  // namespace panelforge::sem
