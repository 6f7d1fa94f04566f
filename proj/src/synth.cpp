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

#include "panelforge/synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "panelforge/error.hpp"
#include "panelforge/log.hpp"
#include "panelforge/parallel.hpp"
#include "panelforge/textio.hpp"

namespace panelforge::synth {

namespace {

constexpr int kP = static_cast<int>(kProcesses.size());

int process_index(Variable v) {
  for (int k = 0; k < kP; ++k) {
    if (kProcesses[static_cast<std::size_t>(k)] == v) return k;
  }
  throw ArgumentError("'" + std::string(panel::column_name(v)) + "' is not a simulated process");
}

const Equation& equation(const TrueParameters& p, Variable v) {
  auto it = p.equations.find(v);
  if (it == p.equations.end()) throw SpecError("true parameters lack the " + std::string(panel::column_name(v)) + " equation");
  return it->second;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Eigen::VectorXd intercepts(const TrueParameters& p) {
  Eigen::VectorXd c(kP);
  for (int k = 0; k < kP; ++k) c(k) = equation(p, kProcesses[static_cast<std::size_t>(k)]).intercept;
  return c;
}

Eigen::MatrixXd companion(const TrueParameters& p) {
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(2 * kP, 2 * kP);
  f.topLeftCorner(kP, kP) = p.lag_matrix();
  f.topRightCorner(kP, kP) = p.lag2_matrix();
  f.bottomLeftCorner(kP, kP) = Eigen::MatrixXd::Identity(kP, kP);
  return f;
}

// Stationary covariance of [x_t; x_{t-1}] around the conditional mean.
Eigen::MatrixXd stationary_state_covariance(const TrueParameters& p) {
  const Eigen::MatrixXd f = companion(p);
  const int s = 2 * kP;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(s, s);
  for (int k = 0; k < kP; ++k) q(k, k) = equation(p, kProcesses[static_cast<std::size_t>(k)]).error_variance;
  Eigen::MatrixXd kron(s * s, s * s);
  for (int a = 0; a < s; ++a) {
    for (int b = 0; b < s; ++b) kron.block(a * s, b * s, s, s) = f(a, b) * f;
  }
  const Eigen::VectorXd vec_q = Eigen::Map<const Eigen::VectorXd>(q.data(), s * s);
  const Eigen::VectorXd vec_g = (Eigen::MatrixXd::Identity(s * s, s * s) - kron).partialPivLu().solve(vec_q);
  Eigen::MatrixXd g = Eigen::Map<const Eigen::MatrixXd>(vec_g.data(), s, s);
  return 0.5 * (g + g.transpose());
}

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

Eigen::MatrixXd mean_multiplier(const TrueParameters& p) {
  return (Eigen::MatrixXd::Identity(kP, kP) - p.lag_matrix() - p.lag2_matrix()).inverse();
}

Eigen::Vector2d covariate_means(const TrueParameters& p) { return {p.cohort_mean, p.gender_p}; }

}  // namespace

Eigen::MatrixXd TrueParameters::lag_matrix() const {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(kP, kP);
  for (int k = 0; k < kP; ++k) {
    for (const auto& [x, v] : equation(*this, kProcesses[static_cast<std::size_t>(k)]).lags) b(k, process_index(x)) = v;
  }
  return b;
}

Eigen::MatrixXd TrueParameters::lag2_matrix() const {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(kP, kP);
  b(process_index(Variable::rank), process_index(Variable::fss_scaled)) = rank_fss_lag2;
  return b;
}

Eigen::MatrixXd TrueParameters::covariate_matrix() const {
  Eigen::MatrixXd g(kP, 2);
  for (int k = 0; k < kP; ++k) {
    const auto& e = equation(*this, kProcesses[static_cast<std::size_t>(k)]);
    g(k, 0) = e.cohort;
    g(k, 1) = e.gender;
  }
  return g;
}

double TrueParameters::spectral_radius() const {
  Eigen::EigenSolver<Eigen::MatrixXd> eig(companion(*this), false);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

void TrueParameters::validate() const {
  for (auto v : kProcesses) {
    const auto& e = equation(*this, v);
    if (!(e.error_variance >= 0) || !(e.individual_variance >= 0)) {
      throw SpecError("negative variance in the " + std::string(panel::column_name(v)) + " equation");
    }
  }
  if (!(gender_p > 0 && gender_p < 1)) throw SpecError("gender share must lie in (0, 1)");
  if (!(cohort_sd >= 0) || !(overall_noise_sd >= 0)) throw SpecError("standard deviations must be nonnegative");
  const double rho = spectral_radius();
  if (!(rho < 1.0)) {
    throw SpecError("unstable lag system: companion spectral radius " + format_fixed(rho, 4) + " >= 1");
  }
}

void set_stationary_means(TrueParameters& p, const std::array<double, 5>& means) {
  const Eigen::Map<const Eigen::VectorXd> m(means.data(), kP);
  const Eigen::VectorXd c = (Eigen::MatrixXd::Identity(kP, kP) - p.lag_matrix() - p.lag2_matrix()) * m -
                            p.covariate_matrix() * covariate_means(p);
  for (int k = 0; k < kP; ++k) p.equations[kProcesses[static_cast<std::size_t>(k)]].intercept = c(k);
}

TrueParameters default_parameters(clpm::Variant truth) {
  const bool to_fss = truth == clpm::Variant::B || truth == clpm::Variant::D;
  const bool from_fss = truth == clpm::Variant::C || truth == clpm::Variant::D;
  TrueParameters p;
  auto& fss = p.equations[Variable::fss_scaled];
  fss.lags = {{Variable::fss_scaled, 0.32}, {Variable::rank, 0.05}};
  if (to_fss) {
    fss.lags[Variable::ci] = 0.8;
    fss.lags[Variable::ced] = 0.6;
    fss.lags[Variable::cef] = -0.3;
  }
  fss.cohort = 0.01;
  fss.gender = 0.2;
  fss.error_variance = 0.36;
  fss.individual_variance = 0.09;

  struct Collab {
    Variable v;
    double own, from_fss, rank, cohort, gender;
  };
  for (const auto& c : {Collab{Variable::ci, 0.31, 0.02, 0.01, -0.002, 0.02},
                        Collab{Variable::ced, 0.25, 0.015, 0.005, -0.0015, 0.015},
                        Collab{Variable::cef, 0.20, 0.02, 0.005, -0.001, -0.02}}) {
    auto& e = p.equations[c.v];
    e.lags = {{c.v, c.own}, {Variable::rank, c.rank}};
    if (from_fss) e.lags[Variable::fss_scaled] = c.from_fss;
    e.cohort = c.cohort;
    e.gender = c.gender;
    e.error_variance = 0.0064;
    e.individual_variance = 0.0025;
  }

  auto& rank = p.equations[Variable::rank];
  rank.lags = {{Variable::rank, 0.6}, {Variable::fss_scaled, 0.05}, {Variable::ci, 0.1}, {Variable::ced, 0.05},
               {Variable::cef, 0.1}};
  p.rank_fss_lag2 = 0.03;
  rank.cohort = -0.02;
  rank.gender = 0.1;
  rank.error_variance = 0.04;
  rank.individual_variance = 0.04;

  set_stationary_means(p, {1.0, 0.40, 0.30, 0.30, 2.5});
  return p;
}

sem::Json to_json(const TrueParameters& p) {
  sem::Json eqs = sem::Json::object();
  for (auto v : kProcesses) {
    const auto& e = equation(p, v);
    sem::Json lags = sem::Json::object();
    for (auto x : kProcesses) {
      if (auto it = e.lags.find(x); it != e.lags.end()) lags[std::string(panel::column_name(x))] = it->second;
    }
    eqs[std::string(panel::column_name(v))] = {
        {"intercept", e.intercept},     {"lags", std::move(lags)},
        {"cohort", e.cohort},           {"gender", e.gender},
        {"error_variance", e.error_variance}, {"individual_variance", e.individual_variance},
    };
  }
  return {
      {"equations", std::move(eqs)},
      {"rank_fss_lag2", p.rank_fss_lag2},
      {"covariates", {{"gender_p", p.gender_p}, {"cohort_mean", p.cohort_mean}, {"cohort_sd", p.cohort_sd}}},
      {"overall_noise_sd", p.overall_noise_sd},
      {"seed", p.seed},
      {"presample", p.presample == Presample::omit ? "omit" : "stationary"},
      {"round_rank", p.round_rank},
  };
}

TrueParameters from_json(const sem::Json& j) {
  try {
    TrueParameters p;
    for (const auto& [name, e] : j.at("equations").items()) {
      const auto v = panel::parse_variable(name);
      process_index(v);
      Equation eq;
      eq.intercept = e.at("intercept").get<double>();
      eq.cohort = e.value("cohort", 0.0);
      eq.gender = e.value("gender", 0.0);
      eq.error_variance = e.at("error_variance").get<double>();
      eq.individual_variance = e.value("individual_variance", 0.0);
      if (e.contains("lags")) {
        for (const auto& [x, coef] : e.at("lags").items()) {
          const auto xv = panel::parse_variable(x);
          process_index(xv);
          eq.lags[xv] = coef.get<double>();
        }
      }
      p.equations[v] = std::move(eq);
    }
    for (auto v : kProcesses) {
      if (!p.equations.contains(v)) {
        throw ValidationError("true parameters lack the " + std::string(panel::column_name(v)) + " equation");
      }
    }
    p.rank_fss_lag2 = j.value("rank_fss_lag2", 0.0);
    if (j.contains("covariates")) {
      const auto& c = j.at("covariates");
      p.gender_p = c.value("gender_p", p.gender_p);
      p.cohort_mean = c.value("cohort_mean", p.cohort_mean);
      p.cohort_sd = c.value("cohort_sd", p.cohort_sd);
    }
    p.overall_noise_sd = j.value("overall_noise_sd", p.overall_noise_sd);
    p.seed = j.value("seed", p.seed);
    const auto presample = j.value("presample", std::string("omit"));
    if (presample == "omit") {
      p.presample = Presample::omit;
    } else if (presample == "stationary") {
      p.presample = Presample::stationary;
    } else {
      throw ValidationError("presample must be 'omit' or 'stationary'");
    }
    p.round_rank = j.value("round_rank", false);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed true-parameter document: ") + e.what());
  } catch (const ArgumentError& e) {
    throw ValidationError(std::string("malformed true-parameter document: ") + e.what());
  }
}

TrueParameters load_parameters_file(const std::string& path) {
  const auto text = read_file(path);
  sem::Json j;
  try {
    j = sem::Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path, 1, e.what());
  }
  return from_json(j);
}

Simulation simulate_panel(const TrueParameters& truth, std::size_t n, int waves, std::uint64_t seed, unsigned threads) {
  if (n < 100) throw ArgumentError("simulation needs n >= 100 researchers");
  if (waves < 1) throw ArgumentError("simulation needs at least one wave");
  truth.validate();

  const Eigen::MatrixXd b = truth.lag_matrix();
  const Eigen::MatrixXd b2 = truth.lag2_matrix();
  const Eigen::MatrixXd g = truth.covariate_matrix();
  const Eigen::VectorXd c = intercepts(truth);
  const Eigen::MatrixXd mult = mean_multiplier(truth);
  const Eigen::MatrixXd state_root = symmetric_sqrt(stationary_state_covariance(truth));
  Eigen::VectorXd error_sd(kP);
  Eigen::VectorXd individual_sd(kP);
  for (int k = 0; k < kP; ++k) {
    const auto& e = equation(truth, kProcesses[static_cast<std::size_t>(k)]);
    error_sd(k) = std::sqrt(e.error_variance);
    individual_sd(k) = std::sqrt(e.individual_variance);
  }
  const int ci = process_index(Variable::ci);
  const int ced = process_index(Variable::ced);
  const int cef = process_index(Variable::cef);
  const int rank = process_index(Variable::rank);
  const int fss = process_index(Variable::fss_scaled);

  std::vector<panel::PanelObservation> rows(n * static_cast<std::size_t>(waves));
  std::vector<std::size_t> clamped(n, 0);
  const int width = std::max<int>(6, static_cast<int>(std::to_string(n).size()));

  parallel_for(n, resolve_threads(threads), [&](std::size_t i) {
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(i)));
    std::normal_distribution<double> z(0.0, 1.0);
    std::bernoulli_distribution male(truth.gender_p);
    const double gender = male(rng) ? 1.0 : 0.0;
    const double cohort = truth.cohort_mean + truth.cohort_sd * z(rng);
    Eigen::VectorXd a(kP);
    for (int k = 0; k < kP; ++k) a(k) = individual_sd(k) * z(rng);
    Eigen::VectorXd dev(2 * kP);
    for (int k = 0; k < 2 * kP; ++k) dev(k) = z(rng);
    dev = state_root * dev;

    const Eigen::VectorXd drift = c + g * Eigen::Vector2d(cohort, gender) + a;
    const Eigen::VectorXd center = mult * drift;
    Eigen::VectorXd prev2 = center + dev.tail(kP);
    Eigen::VectorXd prev = center + dev.head(kP);
    Eigen::VectorXd x = prev;

    std::ostringstream id;
    id << "S" << std::setw(width) << std::setfill('0') << (i + 1);
    for (int t = 1; t <= waves; ++t) {
      if (t >= 2) {
        x = drift + b * prev;
        if (t >= 3 || truth.presample == Presample::stationary) x += b2 * prev2;
        for (int k = 0; k < kP; ++k) x(k) += error_sd(k) * z(rng);
      }
      for (int k : {ci, ced, cef}) {
        if (x(k) < 0.0 || x(k) > 1.0) {
          x(k) = std::clamp(x(k), 0.0, 1.0);
          ++clamped[i];
        }
      }
      const double overall = std::min(1.0, std::max({x(ci), x(ced), x(cef)}) + std::fabs(truth.overall_noise_sd * z(rng)));
      auto& obs = rows[i * static_cast<std::size_t>(waves) + static_cast<std::size_t>(t - 1)];
      obs.researcher_id = id.str();
      obs.wave = t;
      obs.fss_scaled = x(fss);
      obs.c = overall;
      obs.ci = x(ci);
      obs.ced = x(ced);
      obs.cef = x(cef);
      obs.rank = truth.round_rank ? std::clamp(std::round(x(rank)), 1.0, 4.0) : x(rank);
      obs.cohort = cohort;
      obs.gender = gender;
      prev2 = prev;
      prev = x;
    }
  });

  Simulation out;
  out.panel = panel::PanelDataset(std::move(rows), waves);
  for (auto k : clamped) out.clamped += k;
  out.propensity_values = n * static_cast<std::size_t>(waves) * 3;
  if (out.clamping_rate() > 0.02) {
    warn("simulation clamped " + format_fixed(100.0 * out.clamping_rate(), 2) +
         "% of propensity values to [0,1]; the linear model is a poor approximation");
  }
  return out;
}

std::map<std::string, double> true_parameter_values(const TrueParameters& truth, const clpm::ClpmSpec& spec) {
  if (spec.include_overall_propensity) throw ArgumentError("the simulator has no structural equation for C");
  truth.validate();
  const Eigen::MatrixXd b = truth.lag_matrix();
  const Eigen::MatrixXd g = truth.covariate_matrix();
  const Eigen::MatrixXd mult = mean_multiplier(truth);
  const Eigen::VectorXd c = intercepts(truth);
  const Eigen::MatrixXd gamma = stationary_state_covariance(truth).topLeftCorner(kP, kP);
  Eigen::Matrix2d cov_v = Eigen::Matrix2d::Zero();
  cov_v(0, 0) = truth.cohort_sd * truth.cohort_sd;
  cov_v(1, 1) = truth.gender_p * (1.0 - truth.gender_p);
  Eigen::VectorXd ind(kP);
  for (int k = 0; k < kP; ++k) ind(k) = equation(truth, kProcesses[static_cast<std::size_t>(k)]).individual_variance;

  // Joint moments of wave 1 and the covariates.
  Eigen::MatrixXd block(kP + 2, kP + 2);
  const Eigen::MatrixXd mg = mult * g;
  block.topLeftCorner(kP, kP) = mg * cov_v * mg.transpose() + mult * ind.asDiagonal() * mult.transpose() + gamma;
  block.topRightCorner(kP, 2) = mg * cov_v;
  block.bottomLeftCorner(2, kP) = (mg * cov_v).transpose();
  block.bottomRightCorner(2, 2) = cov_v;
  Eigen::VectorXd means(kP + 2);
  means.head(kP) = mult * (c + g * covariate_means(truth));
  means.tail(2) = covariate_means(truth);

  std::vector<std::string> exo;
  for (auto v : kProcesses) exo.push_back(clpm::observed_name(v, 1));
  for (auto v : clpm::kCovariates) exo.push_back(clpm::observed_name(v, 0));
  // Model order of the wave-1 block differs from kProcesses only if the spec
  // adds C, which is rejected above.
  std::map<std::string, double> out;
  for (std::size_t a = 0; a < exo.size(); ++a) {
    const auto ai = static_cast<Eigen::Index>(a);
    out["mean(" + exo[a] + ")"] = means(ai);
    out["var(" + exo[a] + ")"] = block(ai, ai);
    for (std::size_t bb = 0; bb < a; ++bb) out["cov(" + exo[bb] + "," + exo[a] + ")"] = block(static_cast<Eigen::Index>(bb), ai);
  }

  for (int t = 2; t <= spec.waves; ++t) {
    for (int y = 0; y < kP; ++y) {
      const auto yv = kProcesses[static_cast<std::size_t>(y)];
      const auto key = std::string(clpm::short_name(yv));
      const auto& eq = equation(truth, yv);
      for (int x = 0; x < kP; ++x) {
        const auto xv = kProcesses[static_cast<std::size_t>(x)];
        if (clpm::has_lag_path(spec, yv, xv)) out[clpm::coefficient_id(spec, yv, xv, 1, t)] = b(y, x);
      }
      if (yv == Variable::rank && t >= 3) {
        out[clpm::coefficient_id(spec, yv, Variable::fss_scaled, 2, t)] = truth.rank_fss_lag2;
      }
      out[clpm::coefficient_id(spec, yv, Variable::cohort, 0, t)] = g(y, 0);
      out[clpm::coefficient_id(spec, yv, Variable::gender, 0, t)] = g(y, 1);
      if (spec.time_effect == clpm::TimeEffect::wave_dummies) {
        out[key + "~1@" + std::to_string(t)] = c(y);
      } else {
        out[key + "~1"] = c(y);
        out[key + "~time"] = 0.0;
      }
      out["var(" + clpm::observed_name(yv, t) + ")"] = eq.error_variance;
    }
  }
  if (spec.individual_effects) {
    for (int y = 0; y < kP; ++y) {
      const auto l = "ind." + std::string(clpm::short_name(kProcesses[static_cast<std::size_t>(y)]));
      out["var(" + l + ")"] = ind(y);
      for (int x = 0; x < kP; ++x) {
        out["cov(" + l + "," + exo[static_cast<std::size_t>(x)] + ")"] = mult(x, y) * ind(y);
      }
    }
  }
  return out;
}

Eigen::VectorXd true_theta(const TrueParameters& truth, const sem::CovarianceModel& model, const clpm::ClpmSpec& spec) {
  const auto values = true_parameter_values(truth, spec);
  Eigen::VectorXd theta(static_cast<Eigen::Index>(model.num_parameters()));
  for (std::size_t k = 0; k < model.parameters().size(); ++k) {
    const auto& id = model.parameters()[k].id;
    auto it = values.find(id);
    double v = 0.0;
    if (it != values.end()) {
      v = it->second;
    } else if (!(id.starts_with("cov(e.") || (id.starts_with("cov(ind.") && id.find(",ind.") != std::string::npos))) {
      throw ArgumentError("no true value for parameter '" + id + "'");
    }
    theta(static_cast<Eigen::Index>(k)) = v;
  }
  return theta;
}

std::map<std::string, double> structural_coefficients(const TrueParameters& truth, const clpm::ClpmSpec& spec) {
  const auto all = true_parameter_values(truth, spec);
  std::map<std::string, double> out;
  for (const auto& [id, v] : all) {
    if (id.find('~') == std::string::npos || id.find("~1") != std::string::npos || id.find("~time") != std::string::npos) {
      continue;
    }
    out[id] = v;
  }
  return out;
}

RecoveryReport recovery_report(const std::map<std::string, double>& truth, const sem::FitResult& fitted) {
  RecoveryReport out;
  std::size_t covered = 0;
  for (const auto& [id, value] : truth) {
    const auto* e = fitted.find(id);
    if (!e) throw ArgumentError("fitted model has no parameter '" + id + "'");
    RecoveryEntry r;
    r.id = id;
    r.truth = value;
    r.estimate = e->estimate;
    r.se = e->se;
    r.z = e->se > 0 ? (e->estimate - value) / e->se : (e->estimate == value ? 0.0 : std::copysign(INFINITY, e->estimate - value));
    r.covered = std::fabs(r.z) <= 3.0;
    covered += r.covered;
    out.entries.push_back(std::move(r));
  }
  out.coverage = out.entries.empty() ? 1.0 : static_cast<double>(covered) / static_cast<double>(out.entries.size());
  return out;
}

}  // namespace panelforge::synth
