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

#include "panelforge/panel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>

#include "panelforge/error.hpp"
#include "panelforge/log.hpp"
#include "panelforge/stats.hpp"
#include "panelforge/textio.hpp"

namespace panelforge::panel {

std::string_view column_name(Variable v) {
  switch (v) {
    case Variable::fss_scaled: return "fss_scaled";
    case Variable::c: return "c";
    case Variable::ci: return "ci";
    case Variable::ced: return "ced";
    case Variable::cef: return "cef";
    case Variable::rank: return "rank";
    case Variable::cohort: return "cohort";
    case Variable::gender: return "gender";
  }
  return "";
}

std::string_view display_name(Variable v) {
  switch (v) {
    case Variable::fss_scaled: return "FSS";
    case Variable::c: return "C";
    case Variable::ci: return "CI";
    case Variable::ced: return "CED";
    case Variable::cef: return "CEF";
    case Variable::rank: return "Rank";
    case Variable::cohort: return "Cohort";
    case Variable::gender: return "Gender (Male)";
  }
  return "";
}

Variable parse_variable(std::string_view name) {
  for (auto v : kAllVariables) {
    if (column_name(v) == name) return v;
  }
  if (name == "fss") return Variable::fss_scaled;
  throw ArgumentError("unknown panel variable '" + std::string(name) + "'");
}

double PanelObservation::value(Variable v) const {
  switch (v) {
    case Variable::fss_scaled: return fss_scaled;
    case Variable::c: return c;
    case Variable::ci: return ci;
    case Variable::ced: return ced;
    case Variable::cef: return cef;
    case Variable::rank: return rank;
    case Variable::cohort: return cohort;
    case Variable::gender: return gender;
  }
  return 0;
}

PanelDataset::PanelDataset(std::vector<PanelObservation> rows, int waves) : rows_(std::move(rows)), waves_(waves) {
  if (waves_ < 1) throw ValidationError("panel needs at least one wave");
  std::sort(rows_.begin(), rows_.end(), [](const auto& a, const auto& b) {
    return a.researcher_id != b.researcher_id ? a.researcher_id < b.researcher_id : a.wave < b.wave;
  });
  const auto w = static_cast<std::size_t>(waves_);
  if (rows_.size() % w != 0) throw ValidationError("unbalanced panel: row count is not a multiple of the wave count");
  for (std::size_t i = 0; i < rows_.size(); i += w) {
    const auto& first = rows_[i];
    for (std::size_t k = 0; k < w; ++k) {
      const auto& o = rows_[i + k];
      if (o.researcher_id != first.researcher_id || o.wave != static_cast<int>(k) + 1) {
        throw ValidationError("unbalanced panel: researcher '" + first.researcher_id + "' lacks wave " +
                              std::to_string(k + 1));
      }
      for (double x : {o.c, o.ci, o.ced, o.cef}) {
        if (!(x >= 0 && x <= 1)) throw ValidationError("researcher '" + o.researcher_id + "': propensity outside [0,1]");
      }
      if (o.ci > o.c || o.ced > o.c || o.cef > o.c) {
        throw ValidationError("researcher '" + o.researcher_id + "': specific propensity exceeds C");
      }
      if (o.cohort != first.cohort || o.gender != first.gender) {
        throw ValidationError("researcher '" + o.researcher_id + "': cohort and gender must be constant across waves");
      }
      for (double x : {o.fss_scaled, o.rank, o.cohort, o.gender}) {
        if (!std::isfinite(x)) throw ValidationError("researcher '" + o.researcher_id + "': non-finite value");
      }
    }
  }
}

const PanelObservation& PanelDataset::at(std::size_t i, int wave) const {
  return rows_.at(i * static_cast<std::size_t>(waves_) + static_cast<std::size_t>(wave - 1));
}

PanelDataset PanelDataset::subset(const std::vector<std::string>& ids) const {
  std::set<std::string> keep(ids.begin(), ids.end());
  std::vector<PanelObservation> rows;
  for (const auto& o : rows_) {
    if (keep.contains(o.researcher_id)) rows.push_back(o);
  }
  return PanelDataset(std::move(rows), waves_);
}

PanelDataset build_panel(const corpus::Roster& roster, std::span<const corpus::PublicationRecord> pubs,
                         std::span<const corpus::WindowSpec> windows, const BuildOptions& options) {
  const auto active = corpus::select_active_population(roster, pubs, windows);
  if (active.empty()) throw ValidationError("active population is empty: nobody publishes in every window");
  const auto ind = indicators::compute_indicators(roster, pubs, windows, active, options.indicators);

  std::vector<PanelObservation> rows;
  rows.reserve(ind.size());
  for (const auto& w : ind) {
    const auto& r = roster.at(w.researcher_id);
    const auto& spec = windows[static_cast<std::size_t>(w.window - 1)];
    PanelObservation o;
    o.researcher_id = w.researcher_id;
    o.wave = w.window;
    o.fss_scaled = w.fss_scaled;
    o.c = w.c;
    o.ci = w.ci;
    o.ced = w.ced;
    o.cef = w.cef;
    o.rank = corpus::rank_at(r, spec.rank_snapshot_date);
    o.cohort = r.birth_year;
    o.gender = r.gender == corpus::Gender::male ? 1.0 : 0.0;
    if (!rows.empty() && rows.back().researcher_id == o.researcher_id && o.rank < rows.back().rank) {
      warn("researcher " + o.researcher_id + ": rank decreases between waves " + std::to_string(o.wave - 1) +
           " and " + std::to_string(o.wave));
    }
    rows.push_back(std::move(o));
  }
  return PanelDataset(std::move(rows), static_cast<int>(windows.size()));
}

std::string panel_csv(const PanelDataset& panel) {
  std::string out(kPanelHeader);
  out.push_back('\n');
  for (const auto& o : panel.rows()) {
    out += csv_field(o.researcher_id) + "," + std::to_string(o.wave);
    for (double x : {o.fss_scaled, o.c, o.ci, o.ced, o.cef, o.rank, o.cohort, o.gender}) {
      out += "," + format_roundtrip(x);
    }
    out.push_back('\n');
  }
  return out;
}

PanelDataset parse_panel_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t row = 1;
  if (!std::getline(in, line)) throw ParseError(source, 1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kPanelHeader) throw ParseError(source, 1, "unexpected header '" + line + "'");
  std::vector<PanelObservation> rows;
  int waves = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      auto f = split_csv_line(line);
      if (f.size() != 10) throw ArgumentError("expected 10 fields, got " + std::to_string(f.size()));
      PanelObservation o;
      o.researcher_id = f[0];
      o.wave = static_cast<int>(parse_int(f[1]));
      o.fss_scaled = parse_double(f[2]);
      o.c = parse_double(f[3]);
      o.ci = parse_double(f[4]);
      o.ced = parse_double(f[5]);
      o.cef = parse_double(f[6]);
      o.rank = parse_double(f[7]);
      o.cohort = parse_double(f[8]);
      o.gender = parse_double(f[9]);
      waves = std::max(waves, o.wave);
      rows.push_back(std::move(o));
    } catch (const ArgumentError& e) {
      throw ParseError(source, row, e.what());
    }
  }
  if (rows.empty()) throw ParseError(source, row, "panel has no rows");
  return PanelDataset(std::move(rows), waves);
}

PanelDataset load_panel_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open panel '" + path + "'");
  return parse_panel_csv(in, path);
}

std::vector<VariableSummary> descriptive_stats(const PanelDataset& panel) {
  const auto& rows = panel.rows();
  if (rows.empty()) throw ArgumentError("descriptive statistics need a nonempty panel");
  const double n = static_cast<double>(rows.size());
  std::vector<VariableSummary> out;
  for (auto v : kAllVariables) {
    double sum = 0;
    for (const auto& o : rows) sum += o.value(v);
    const double mean = sum / n;
    double ss = 0;
    for (const auto& o : rows) {
      const double d = o.value(v) - mean;
      ss += d * d;
    }
    out.push_back({v, mean, rows.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0});
  }
  return out;
}

std::string CorrelationMatrix::stars(Eigen::Index i, Eigen::Index j) const {
  return stats::significance_stars(p(i, j));
}

CorrelationMatrix correlation_matrix(const PanelDataset& panel, std::span<const Variable> variables,
                                     CorrelationMode mode) {
  std::vector<const PanelObservation*> used;
  for (const auto& o : panel.rows()) {
    if (mode == CorrelationMode::pooled || o.wave == 1) used.push_back(&o);
  }
  const auto k = static_cast<Eigen::Index>(variables.size());
  const auto m = static_cast<Eigen::Index>(used.size());
  if (m < 3) throw ArgumentError("correlations need at least 3 rows");
  Eigen::MatrixXd x(m, k);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) x(i, j) = used[i]->value(variables[j]);
  }
  for (Eigen::Index j = 0; j < k; ++j) {
    if (x.col(j).maxCoeff() == x.col(j).minCoeff()) {
      throw NumericalError("variable '" + std::string(column_name(variables[j])) + "' has zero variance");
    }
  }
  Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  Eigen::VectorXd ss = x.colwise().squaredNorm();
  CorrelationMatrix out;
  out.variables.assign(variables.begin(), variables.end());
  out.rows_used = used.size();
  out.r = Eigen::MatrixXd::Identity(k, k);
  out.p = Eigen::MatrixXd::Zero(k, k);
  const double df = static_cast<double>(m - 2);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < a; ++b) {
      double r = x.col(a).dot(x.col(b)) / std::sqrt(ss(a) * ss(b));
      r = std::clamp(r, -1.0, 1.0);
      const double p = std::fabs(r) >= 1.0 ? 0.0 : stats::t_two_sided_p(r * std::sqrt(df / (1 - r * r)), df);
      out.r(a, b) = out.r(b, a) = r;
      out.p(a, b) = out.p(b, a) = p;
    }
  }
  return out;
}

std::vector<InflationFactor> collinearity_diagnostics(const PanelDataset& panel, std::span<const Variable> predictors) {
  if (predictors.size() < 2) throw ArgumentError("collinearity diagnostics need at least two predictors");
  const auto& rows = panel.rows();
  const auto k = static_cast<Eigen::Index>(predictors.size());
  const auto m = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x(m, k);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) x(i, j) = rows[static_cast<std::size_t>(i)].value(predictors[j]);
  }
  x.rowwise() -= x.colwise().mean();
  std::vector<InflationFactor> out;
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::VectorXd y = x.col(j);
    const double sst = y.squaredNorm();
    if (y.maxCoeff() - y.minCoeff() <= 1e-12 * (1.0 + y.cwiseAbs().maxCoeff())) {
      throw NumericalError("predictor '" + std::string(column_name(predictors[j])) + "' has zero variance");
    }
    Eigen::MatrixXd others(m, k - 1);
    for (Eigen::Index c = 0, o = 0; c < k; ++c) {
      if (c != j) others.col(o++) = x.col(c);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(others);
    const Eigen::VectorXd beta = qr.solve(y);
    const double ssr = (y - others * beta).squaredNorm();
    const double r2 = 1.0 - ssr / sst;
    if (ssr <= 1e-12 * sst) {
      throw NumericalError("predictor '" + std::string(column_name(predictors[j])) +
                           "' is exactly collinear with the others (infinite VIF)");
    }
    out.push_back({predictors[j], r2, 1.0 / (1.0 - r2)});
  }
  return out;
}

std::string descriptives_csv(std::span<const VariableSummary> stats) {
  std::string out = "variable,mean,sd\n";
  for (const auto& s : stats) {
    out += std::string(column_name(s.variable)) + "," + format_fixed(s.mean, 6) + "," + format_fixed(s.sd, 6) + "\n";
  }
  return out;
}

namespace {

std::string pad(std::string s, std::size_t width, bool left = true) {
  // Width counts code points so the degree sign lines up.
  std::size_t len = 0;
  for (unsigned char c : s) len += (c & 0xC0) != 0x80;
  if (len >= width) return s;
  return left ? s + std::string(width - len, ' ') : std::string(width - len, ' ') + s;
}

}  // namespace

std::string descriptives_text(std::span<const VariableSummary> stats, std::size_t observations) {
  std::ostringstream o;
  o << "Descriptive statistics (" << observations << " observations)\n";
  o << pad("Variable", 16) << pad("Mean", 12, false) << pad("Std dev.", 12, false) << "\n";
  for (const auto& s : stats) {
    o << pad(std::string(display_name(s.variable)), 16) << pad(format_fixed(s.mean, 2), 12, false)
      << pad(format_fixed(s.sd, 2), 12, false) << "\n";
  }
  return o.str();
}

std::string correlations_csv(const CorrelationMatrix& m) {
  std::string out = "row,col,r,p,stars\n";
  for (Eigen::Index a = 0; a < m.r.rows(); ++a) {
    for (Eigen::Index b = 0; b < a; ++b) {
      out += std::string(column_name(m.variables[a])) + "," + std::string(column_name(m.variables[b])) + "," +
             format_fixed(m.r(a, b), 6) + "," + format_fixed(m.p(a, b), 6) + "," + m.stars(a, b) + "\n";
    }
  }
  return out;
}

std::string correlations_text(const CorrelationMatrix& m) {
  std::ostringstream o;
  const auto k = m.r.rows();
  o << "Correlation matrix (" << m.rows_used << " observations)\n";
  o << pad("", 18);
  for (Eigen::Index b = 0; b + 1 < k; ++b) o << pad(std::to_string(b + 1), 11, false);
  o << "\n";
  for (Eigen::Index a = 0; a < k; ++a) {
    o << pad(std::to_string(a + 1) + ". " + std::string(display_name(m.variables[a])), 18);
    for (Eigen::Index b = 0; b < a; ++b) o << pad(format_fixed(m.r(a, b), 3) + m.stars(a, b), 11, false);
    o << "\n";
  }
  o << "Significance level: ***= p < 0.001; **= p < 0.01; *= p < 0.05\n";
  return o.str();
}

}  // namespace panelforge::panel
