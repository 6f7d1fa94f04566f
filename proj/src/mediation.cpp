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

#include "panelforge/mediation.hpp"

#include <algorithm>
#include <sstream>

#include "panelforge/error.hpp"
#include "panelforge/textio.hpp"

namespace panelforge::mediation {

namespace {

std::optional<std::size_t> position(const std::vector<Variable>& list, Variable v) {
  auto it = std::find(list.begin(), list.end(), v);
  if (it == list.end()) return std::nullopt;
  return static_cast<std::size_t>(it - list.begin());
}

std::size_t require(const std::vector<Variable>& list, Variable v) {
  auto p = position(list, v);
  if (!p) throw ArgumentError("'" + std::string(panel::column_name(v)) + "' is not in the path system");
  return *p;
}

int resolve_wave(const PathSystem& paths, const IndirectOptions& options) {
  const int wave = options.wave == 0 ? paths.last_wave() : options.wave;
  if (wave < 3 || wave > paths.last_wave()) {
    throw ArgumentError("indirect effects need an outcome wave in [3, " + std::to_string(paths.last_wave()) + "]");
  }
  return wave;
}

// Effect of the treatment on the wave's process variables (column vector).
Eigen::VectorXd treatment_column(const PathSystem& paths, Variable treatment, int wave) {
  if (auto p = position(paths.processes, treatment)) return paths.lag_at(wave).col(static_cast<Eigen::Index>(*p));
  return paths.covariate_at(wave).col(static_cast<Eigen::Index>(require(paths.covariates, treatment)));
}

std::string pad(std::string s, std::size_t width) {
  std::size_t shown = 0;
  for (unsigned char c : s) shown += (c & 0xC0) != 0x80;
  if (shown < width) s.append(width - shown, ' ');
  return s;
}

}  // namespace

const Eigen::MatrixXd& PathSystem::lag_at(int wave) const {
  if (wave < 2 || wave > last_wave()) throw ArgumentError("no lag matrix for wave " + std::to_string(wave));
  return lag[static_cast<std::size_t>(wave - 2)];
}

const Eigen::MatrixXd& PathSystem::covariate_at(int wave) const {
  if (wave < 2 || wave > last_wave()) throw ArgumentError("no covariate matrix for wave " + std::to_string(wave));
  return covariate[static_cast<std::size_t>(wave - 2)];
}

PathSystem PathSystem::uniform(std::vector<Variable> processes, std::vector<Variable> covariates,
                               const Eigen::MatrixXd& lag, const Eigen::MatrixXd& covariate, int waves) {
  const auto p = static_cast<Eigen::Index>(processes.size());
  if (lag.rows() != p || lag.cols() != p || covariate.rows() != p ||
      covariate.cols() != static_cast<Eigen::Index>(covariates.size())) {
    throw ArgumentError("path matrices do not match the variable lists");
  }
  PathSystem out;
  out.processes = std::move(processes);
  out.covariates = std::move(covariates);
  for (int t = 2; t <= waves; ++t) {
    out.lag.push_back(lag);
    out.covariate.push_back(covariate);
  }
  return out;
}

PathSystem path_system(const std::map<std::string, double>& estimates, const clpm::ClpmSpec& spec) {
  PathSystem out;
  out.processes = clpm::process_variables(spec);
  out.covariates = {clpm::kCovariates.begin(), clpm::kCovariates.end()};
  const auto p = static_cast<Eigen::Index>(out.processes.size());
  auto value = [&](const std::string& id) {
    auto it = estimates.find(id);
    return it == estimates.end() ? 0.0 : it->second;
  };
  for (int t = 2; t <= spec.waves; ++t) {
    Eigen::MatrixXd lag = Eigen::MatrixXd::Zero(p, p);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p, 2);
    for (Eigen::Index y = 0; y < p; ++y) {
      const auto yv = out.processes[static_cast<std::size_t>(y)];
      for (Eigen::Index x = 0; x < p; ++x) {
        lag(y, x) = value(clpm::coefficient_id(spec, yv, out.processes[static_cast<std::size_t>(x)], 1, t));
      }
      for (Eigen::Index c = 0; c < 2; ++c) {
        cov(y, c) = value(clpm::coefficient_id(spec, yv, out.covariates[static_cast<std::size_t>(c)], 0, t));
      }
    }
    out.lag.push_back(std::move(lag));
    out.covariate.push_back(std::move(cov));
  }
  return out;
}

PathSystem path_system(const sem::FitResult& fit, const clpm::ClpmSpec& spec) {
  std::map<std::string, double> estimates;
  for (const auto& e : fit.parameters) estimates[e.id] = e.estimate;
  return path_system(estimates, spec);
}

double indirect_effect(const PathSystem& paths, Variable treatment, Variable outcome, const IndirectOptions& options) {
  const int wave = resolve_wave(paths, options);
  const auto o = static_cast<Eigen::Index>(require(paths.processes, outcome));
  Eigen::VectorXd first = treatment_column(paths, treatment, wave - 1);
  if (!options.include_treatment_persistence) {
    if (auto tp = position(paths.processes, treatment)) first(static_cast<Eigen::Index>(*tp)) = 0.0;
  }
  return paths.lag_at(wave).row(o).dot(first);
}

double direct_effect(const PathSystem& paths, Variable treatment, Variable outcome, const IndirectOptions& options) {
  const int wave = resolve_wave(paths, options);
  const auto o = static_cast<Eigen::Index>(require(paths.processes, outcome));
  return treatment_column(paths, treatment, wave)(o);
}

const IndirectCell& IndirectReport::cell(Variable treatment, Variable outcome) const {
  for (const auto& c : cells) {
    if (c.treatment == treatment && c.outcome == outcome) return c;
  }
  throw ArgumentError("no indirect-effect cell for that treatment and outcome");
}

IndirectReport indirect_report(const PathSystem& paths, const std::vector<Variable>& treatments,
                               const std::vector<Variable>& outcomes, const IndirectOptions& options) {
  IndirectReport out;
  out.treatments = treatments;
  out.outcomes = outcomes;
  for (auto t : treatments) {
    for (auto o : outcomes) {
      IndirectCell c{t, o, indirect_effect(paths, t, o, options), direct_effect(paths, t, o, options), std::nullopt};
      if (c.direct != 0.0) c.ratio_percent = 100.0 * c.indirect / c.direct;
      out.cells.push_back(c);
    }
  }
  return out;
}

std::string indirect_text(const IndirectReport& report) {
  constexpr std::size_t first_w = 16;
  constexpr std::size_t second_w = 30;
  constexpr std::size_t cell_w = 10;
  std::ostringstream out;
  out << pad("", first_w) << pad("", second_w);
  for (auto o : report.outcomes) out << pad(std::string(panel::display_name(o)), cell_w);
  out << "\n";
  for (auto t : report.treatments) {
    out << pad(std::string(panel::display_name(t)), first_w) << pad("Indirect effect", second_w);
    for (auto o : report.outcomes) out << pad(format_fixed(report.cell(t, o).indirect, 3), cell_w);
    out << "\n" << pad("", first_w) << pad("Indirect/Direct effect (%)", second_w);
    for (auto o : report.outcomes) {
      const auto& r = report.cell(t, o).ratio_percent;
      out << pad(r ? format_fixed(*r, 1) : "—", cell_w);
    }
    out << "\n";
  }
  return out.str();
}

std::string indirect_csv(const IndirectReport& report) {
  std::ostringstream out;
  out << "treatment,outcome,indirect,direct,ratio_percent\n";
  for (const auto& c : report.cells) {
    out << panel::column_name(c.treatment) << "," << panel::column_name(c.outcome) << ","
        << format_roundtrip(c.indirect) << "," << format_roundtrip(c.direct) << ","
        << (c.ratio_percent ? format_roundtrip(*c.ratio_percent) : std::string()) << "\n";
  }
  return out.str();
}

sem::Json indirect_json(const IndirectReport& report) {
  sem::Json cells = sem::Json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"treatment", panel::column_name(c.treatment)},
                     {"outcome", panel::column_name(c.outcome)},
                     {"indirect", c.indirect},
                     {"direct", c.direct},
                     {"ratio_percent", c.ratio_percent ? sem::Json(*c.ratio_percent) : sem::Json()}});
  }
  return {{"direct_effect", "lag-1 coefficient of the treatment in the outcome equation"},
          {"standard_errors", "not computed"},
          {"cells", std::move(cells)}};
}

}  // namespace panelforge::mediation
