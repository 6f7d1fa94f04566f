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

#include "panelforge/clpm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "panelforge/error.hpp"
#include "panelforge/log.hpp"
#include "panelforge/parallel.hpp"
#include "panelforge/stats.hpp"
#include "panelforge/textio.hpp"

namespace panelforge::clpm {

char variant_letter(Variant v) { return static_cast<char>('A' + static_cast<int>(v)); }

Variant parse_variant(std::string_view text) {
  if (text.size() == 1) {
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
    if (c >= 'A' && c <= 'D') return static_cast<Variant>(c - 'A');
  }
  throw ArgumentError("unknown model variant '" + std::string(text) + "' (expected A, B, C or D)");
}

std::vector<Variable> collaboration_variables(const ClpmSpec& spec) {
  if (spec.include_overall_propensity) return {Variable::c, Variable::ci, Variable::ced, Variable::cef};
  return {Variable::ci, Variable::ced, Variable::cef};
}

std::vector<Variable> process_variables(const ClpmSpec& spec) {
  std::vector<Variable> out{Variable::fss_scaled};
  for (auto v : collaboration_variables(spec)) out.push_back(v);
  out.push_back(Variable::rank);
  return out;
}

std::string_view short_name(Variable v) {
  switch (v) {
    case Variable::fss_scaled: return "fss";
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

std::string observed_name(Variable v, int wave) {
  if (v == Variable::cohort || v == Variable::gender) return std::string(panel::column_name(v));
  return std::string(panel::column_name(v)) + "_" + std::to_string(wave);
}

namespace {

bool is_collaboration(Variable v) {
  return v == Variable::c || v == Variable::ci || v == Variable::ced || v == Variable::cef;
}

bool frees_collaboration_to_fss(Variant v) { return v == Variant::B || v == Variant::D; }
bool frees_fss_to_collaboration(Variant v) { return v == Variant::C || v == Variant::D; }

std::string wave_suffix(const ClpmSpec& spec, int wave) {
  return spec.time_invariant ? std::string() : "@" + std::to_string(wave);
}

std::string latent_name(Variable v) { return "ind." + std::string(short_name(v)); }

}  // namespace

bool has_lag_path(const ClpmSpec& spec, Variable outcome, Variable predictor) {
  if (outcome == predictor || predictor == Variable::rank) return true;
  if (outcome == Variable::rank) return predictor == Variable::fss_scaled || is_collaboration(predictor);
  if (outcome == Variable::fss_scaled) return is_collaboration(predictor) && frees_collaboration_to_fss(spec.variant);
  if (is_collaboration(outcome)) return predictor == Variable::fss_scaled && frees_fss_to_collaboration(spec.variant);
  return false;
}

std::string coefficient_id(const ClpmSpec& spec, Variable outcome, Variable predictor, int lag, int wave) {
  std::string id = std::string(short_name(outcome)) + "~" + std::string(short_name(predictor));
  if (lag == 2) id += "2";
  return id + wave_suffix(spec, wave);
}

std::vector<std::string> observed_names(const ClpmSpec& spec) {
  std::vector<std::string> out;
  const auto procs = process_variables(spec);
  for (int t = 1; t <= spec.waves; ++t) {
    for (auto v : procs) out.push_back(observed_name(v, t));
  }
  for (auto v : kCovariates) out.push_back(observed_name(v, 0));
  return out;
}

sem::CovarianceModel build_model(const ClpmSpec& spec) {
  using sem::fixed;
  using sem::free;
  if (spec.waves < 3) throw SpecError("cross-lagged model needs at least 3 waves (rank uses two lags)");
  const auto procs = process_variables(spec);
  const int w = spec.waves;

  sem::CovarianceModel m;
  for (const auto& name : observed_names(spec)) m.add_observed(name);

  // Wave 1 and the covariates form an unrestricted exogenous block.
  std::vector<std::string> exo;
  for (auto v : procs) exo.push_back(observed_name(v, 1));
  for (auto v : kCovariates) exo.push_back(observed_name(v, 0));
  for (std::size_t a = 0; a < exo.size(); ++a) {
    m.mean(exo[a], free("mean(" + exo[a] + ")"));
    m.variance(exo[a], free("var(" + exo[a] + ")"));
    for (std::size_t b = 0; b < a; ++b) m.covariance(exo[a], exo[b], free("cov(" + exo[b] + "," + exo[a] + ")"));
  }

  if (spec.time_effect == TimeEffect::linear_trend) {
    m.add_latent("time");
    m.mean("time", fixed(1.0));
  }

  for (int t = 2; t <= w; ++t) {
    for (auto y : procs) {
      const auto yt = observed_name(y, t);
      const auto key = std::string(short_name(y));
      for (auto x : procs) {
        if (has_lag_path(spec, y, x)) m.path(observed_name(x, t - 1), yt, free(coefficient_id(spec, y, x, 1, t)));
      }
      if (y == Variable::rank && t >= 3) {
        m.path(observed_name(Variable::fss_scaled, t - 2), yt,
               free(coefficient_id(spec, y, Variable::fss_scaled, 2, t)));
      }
      for (auto c : kCovariates) m.path(observed_name(c, 0), yt, free(coefficient_id(spec, y, c, 0, t)));
      if (spec.time_effect == TimeEffect::wave_dummies) {
        m.mean(yt, free(key + "~1@" + std::to_string(t)));
      } else {
        m.mean(yt, free(key + "~1"));
        m.path("time", yt, free(key + "~time", static_cast<double>(t)));
      }
      m.variance(yt, free("var(" + yt + ")"));
    }
  }

  if (spec.individual_effects) {
    for (auto y : procs) {
      const auto l = latent_name(y);
      m.add_latent(l);
      m.variance(l, free("var(" + l + ")"));
      for (int t = 2; t <= w; ++t) m.path(l, observed_name(y, t), fixed(1.0));
      for (auto x : procs) {
        const auto x1 = observed_name(x, 1);
        m.covariance(l, x1, free("cov(" + l + "," + x1 + ")"));
      }
    }
    if (spec.correlated_individual_effects) {
      for (std::size_t a = 0; a < procs.size(); ++a) {
        for (std::size_t b = 0; b < a; ++b) {
          const auto la = latent_name(procs[a]);
          const auto lb = latent_name(procs[b]);
          m.covariance(la, lb, free("cov(" + lb + "," + la + ")"));
        }
      }
    }
  }

  if (spec.sequential_exogeneity) {
    // Error of Y at t with the later predictors of Y. The pair set is the
    // full model's, so every variant carries the same covariances.
    ClpmSpec full = spec;
    full.variant = Variant::D;
    for (auto y : procs) {
      for (auto x : procs) {
        if (x == y || !has_lag_path(full, y, x)) continue;
        for (int t = 2; t <= w; ++t) {
          for (int s = t + 1; s <= w - 1; ++s) {
            const auto yt = observed_name(y, t);
            const auto xs = observed_name(x, s);
            m.covariance(yt, xs, free("cov(e." + yt + ",e." + xs + ")"));
          }
        }
      }
    }
  }
  m.validate();
  return m;
}

Eigen::MatrixXd wide_rows(const panel::PanelDataset& panel, const ClpmSpec& spec) {
  if (panel.waves() != spec.waves) {
    throw ArgumentError("panel has " + std::to_string(panel.waves()) + " waves but the model expects " +
                        std::to_string(spec.waves));
  }
  const auto procs = process_variables(spec);
  const auto n = static_cast<Eigen::Index>(panel.researchers());
  const auto p = static_cast<Eigen::Index>(procs.size()) * spec.waves + 2;
  Eigen::MatrixXd rows(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index col = 0;
    for (int t = 1; t <= spec.waves; ++t) {
      const auto& obs = panel.at(static_cast<std::size_t>(i), t);
      for (auto v : procs) rows(i, col++) = obs.value(v);
    }
    const auto& first = panel.at(static_cast<std::size_t>(i), 1);
    for (auto v : kCovariates) rows(i, col++) = first.value(v);
  }
  return rows;
}

sem::SampleMoments panel_moments(const panel::PanelDataset& panel, const ClpmSpec& spec, MomentsMode mode,
                                 const sem::RobustOptions& robust) {
  const auto rows = wide_rows(panel, spec);
  auto names = observed_names(spec);
  if (mode == MomentsMode::robust) return sem::robust_moments(rows, std::move(names), robust);
  return sem::classical_moments(rows, std::move(names));
}

const VariantFit* VariantComparison::find(Variant v) const {
  for (const auto& f : fits) {
    if (f.variant == v) return &f;
  }
  return nullptr;
}

bool VariantComparison::all_converged() const {
  return std::all_of(fits.begin(), fits.end(), [](const VariantFit& f) { return f.converged(); });
}

std::optional<Variant> select_variant(const std::vector<VariantFit>& fits, const std::vector<NestedTest>& tests,
                                      double alpha) {
  std::vector<const VariantFit*> ok;
  for (const auto& f : fits) {
    if (f.converged()) ok.push_back(&f);
  }
  if (ok.empty()) return std::nullopt;
  const bool has_full = std::any_of(ok.begin(), ok.end(), [](const VariantFit* f) { return f->variant == Variant::D; });
  std::vector<const VariantFit*> acceptable;
  if (has_full) {
    for (const auto* f : ok) {
      if (f->variant == Variant::D) {
        acceptable.push_back(f);
        continue;
      }
      for (const auto& t : tests) {
        if (t.restricted == f->variant && t.result.p_value >= alpha) acceptable.push_back(f);
      }
    }
  } else {
    acceptable = ok;
  }
  const auto best = std::min_element(acceptable.begin(), acceptable.end(), [&](const VariantFit* a, const VariantFit* b) {
    if (has_full && a->fit->df != b->fit->df) return a->fit->df > b->fit->df;
    return a->fit->aic < b->fit->aic;
  });
  return (*best)->variant;
}

namespace {

// Ranks attempts: converged before failed, then lower discrepancy.
bool improves(const VariantFit& candidate, const VariantFit& current) {
  if (!candidate.fit) return false;
  if (!current.fit) return true;
  if (candidate.converged() != current.converged()) return candidate.converged();
  return candidate.fit->f_min < current.fit->f_min - 1e-12 * std::max(1.0, current.fit->f_min);
}

VariantFit attempt(Variant v, const sem::CovarianceModel& model, const sem::SampleMoments& moments,
                   const sem::FitOptions& options) {
  VariantFit out;
  out.variant = v;
  try {
    out.fit = sem::fit(model, moments, options);
  } catch (const sem::ConvergenceError& e) {
    out.fit = e.best();
    out.error = e.what();
  } catch (const Error& e) {
    out.error = e.what();
  }
  return out;
}

// Least-squares starts attribute the stable individual differences to the
// autoregressive paths. This start moves that share back to the individual
// effects, which avoids the boundary solution with a vanishing effect variance.
sem::FitOptions heterogeneity_start(const ClpmSpec& spec, const sem::CovarianceModel& model,
                                    const sem::SampleMoments& moments, const sem::FitOptions& base) {
  sem::FitOptions out = base;
  const Eigen::VectorXd theta = sem::start_values(model, moments, base);
  for (std::size_t k = 0; k < model.parameters().size(); ++k) {
    out.start[model.parameters()[k].id] = theta(static_cast<Eigen::Index>(k));
  }
  for (auto v : process_variables(spec)) {
    const auto key = std::string(short_name(v));
    if (auto it = out.start.find("var(ind." + key + ")"); it != out.start.end()) it->second *= 10.0;
    for (int t = 2; t <= spec.waves; ++t) {
      if (auto it = out.start.find(coefficient_id(spec, v, v, 1, t)); it != out.start.end()) it->second *= 0.5;
    }
  }
  return out;
}

// Starts at another variant's solution; paths it lacks start at zero, so the
// start reproduces that solution's discrepancy.
sem::FitOptions warm_start(const sem::CovarianceModel& model, const sem::FitResult& from, const sem::FitOptions& base) {
  sem::FitOptions out = base;
  for (const auto& prm : model.parameters()) {
    if (const auto* e = from.find(prm.id)) {
      out.start[prm.id] = e->estimate;
    } else if (!prm.variance) {
      out.start[prm.id] = 0.0;
    }
  }
  return out;
}

}  // namespace

VariantComparison fit_variants(const sem::SampleMoments& moments, const ClpmSpec& spec,
                               const ComparisonOptions& options) {
  if (options.variants.empty()) throw ArgumentError("no model variants requested");
  if (spec.include_overall_propensity) {
    warn("overall propensity C included: its low variance can make the optimization unstable");
  }
  VariantComparison out;
  out.spec = spec;
  out.fits.resize(options.variants.size());
  std::vector<sem::CovarianceModel> models(options.variants.size());
  const unsigned threads = resolve_threads(options.threads);
  parallel_for(options.variants.size(), threads, [&](std::size_t k) {
    ClpmSpec s = spec;
    s.variant = options.variants[k];
    auto& slot = out.fits[k];
    slot.variant = s.variant;
    try {
      models[k] = build_model(s);
    } catch (const Error& e) {
      slot.error = e.what();
      return;
    }
    slot = attempt(s.variant, models[k], moments, options.fit);
    if (!spec.individual_effects) return;
    try {
      auto alt = attempt(s.variant, models[k], moments, heterogeneity_start(s, models[k], moments, options.fit));
      if (improves(alt, slot)) slot = std::move(alt);
    } catch (const Error&) {
    }
  });

  // Variants differ only in cross paths. The full model also starts from every
  // restricted solution, so it never ends above a model nested in it, and each
  // restricted model starts once more from the full solution.
  const auto snapshot = out.fits;
  parallel_for(options.variants.size(), threads, [&](std::size_t k) {
    if (models[k].num_parameters() == 0) return;
    const bool is_full = options.variants[k] == Variant::D;
    for (std::size_t j = 0; j < snapshot.size(); ++j) {
      if (j == k || !snapshot[j].converged()) continue;
      if (is_full == (options.variants[j] == Variant::D)) continue;
      auto alt = attempt(options.variants[k], models[k], moments, warm_start(models[k], *snapshot[j].fit, options.fit));
      if (improves(alt, out.fits[k])) out.fits[k] = std::move(alt);
    }
  });

  const auto* full = out.find(Variant::D);
  std::ostringstream note;
  if (out.fits.size() == 1) note << "single-model mode: no nested comparison. ";
  for (const auto& f : out.fits) {
    if (!f.converged()) note << "Model " << variant_letter(f.variant) << " failed: " << f.error << ". ";
  }
  if (full && full->converged()) {
    for (auto v : {Variant::A, Variant::B, Variant::C}) {
      const auto* r = out.find(v);
      if (!r || !r->converged()) continue;
      try {
        out.tests.push_back({v, Variant::D, sem::chi_square_diff_test(*r->fit, *full->fit)});
      } catch (const ArgumentError& e) {
        note << "Model " << variant_letter(v) << " vs D: " << e.what() << ". ";
      }
    }
  }
  out.selected = select_variant(out.fits, out.tests, options.alpha);
  out.selection_note = note.str();
  if (!out.selection_note.empty() && out.selection_note.back() == ' ') out.selection_note.pop_back();
  return out;
}

VariantComparison fit_variants(const panel::PanelDataset& panel, const ClpmSpec& spec, MomentsMode mode,
                               const ComparisonOptions& options) {
  return fit_variants(panel_moments(panel, spec, mode), spec, options);
}

std::string format_coefficient(double estimate, double se, int decimals) {
  const double p = se > 0 ? stats::normal_two_sided_p(estimate / se) : 1.0;
  return format_fixed(estimate, decimals) + stats::significance_stars(p, true) + " (" + format_fixed(se, decimals) + ")";
}

std::string format_r_squared(double r2) { return format_fixed(100.0 * r2, 2); }

namespace {

struct RowTemplate {
  std::string label;
  std::string id;
};

std::vector<RowTemplate> equation_rows(const ClpmSpec& spec, Variable y) {
  ClpmSpec full = spec;
  full.variant = Variant::D;
  std::vector<RowTemplate> rows;
  const auto key = std::string(short_name(y));
  for (int t = 2; t <= spec.waves; ++t) {
    if (spec.time_effect == TimeEffect::linear_trend) {
      if (t == 2) {
        rows.push_back({"Intercept", key + "~1"});
        rows.push_back({"Trend", key + "~time"});
      }
    } else {
      rows.push_back({t == 2 ? std::string("Intercept") : "Intercept (wave " + std::to_string(t) + ")",
                      key + "~1@" + std::to_string(t)});
    }
  }
  const int first = spec.time_invariant ? spec.waves : 2;
  for (int t = first; t <= spec.waves; ++t) {
    const std::string suffix = spec.time_invariant ? "" : " (wave " + std::to_string(t) + ")";
    for (auto x : process_variables(spec)) {
      if (!has_lag_path(full, y, x)) continue;
      rows.push_back({std::string(panel::display_name(x)) + suffix, coefficient_id(spec, y, x, 1, t)});
      if (y == Variable::rank && x == Variable::fss_scaled && t >= 3) {
        rows.push_back({std::string(panel::display_name(x)) + "-2" + suffix, coefficient_id(spec, y, x, 2, t)});
      }
    }
    for (auto c : kCovariates) {
      rows.push_back({std::string(panel::display_name(c)) + suffix, coefficient_id(spec, y, c, 0, t)});
    }
  }
  return rows;
}

std::string pad(std::string s, std::size_t width) {
  // Display width: count UTF-8 lead bytes only.
  std::size_t shown = 0;
  for (unsigned char c : s) shown += (c & 0xC0) != 0x80;
  if (shown < width) s.append(width - shown, ' ');
  return s;
}

std::string fixed_or_blank(const std::optional<double>& v, int decimals) {
  return v ? format_fixed(*v, decimals) : std::string();
}

}  // namespace

CoefficientTable coefficient_table(const VariantComparison& comparison) {
  CoefficientTable table;
  for (const auto& f : comparison.fits) table.variants.push_back(f.variant);
  const auto& spec = comparison.spec;
  for (auto y : process_variables(spec)) {
    for (const auto& tmpl : equation_rows(spec, y)) {
      CoefficientRow row{y, tmpl.label, tmpl.id, {}};
      for (const auto& f : comparison.fits) {
        if (!f.fit) continue;
        if (const auto* e = f.fit->find(tmpl.id)) {
          const double p = e->se > 0 ? stats::normal_two_sided_p(e->estimate / e->se) : 1.0;
          row.cells[f.variant] = {e->estimate, e->se, p};
        }
      }
      table.rows.push_back(std::move(row));
    }
    for (const auto& f : comparison.fits) {
      if (!f.fit) continue;
      double sum = 0;
      int count = 0;
      for (int t = 2; t <= spec.waves; ++t) {
        auto it = f.fit->r_squared.find(observed_name(y, t));
        if (it != f.fit->r_squared.end()) {
          sum += it->second;
          ++count;
        }
      }
      if (count > 0) table.r_squared[y][f.variant] = sum / count;
    }
  }
  return table;
}

std::string coefficient_table_text(const CoefficientTable& table, const VariantComparison& comparison) {
  constexpr std::size_t label_w = 26;
  constexpr std::size_t cell_w = 22;
  std::ostringstream out;
  auto header = [&](std::string_view title) {
    out << pad(std::string(title), label_w);
    for (auto v : table.variants) out << pad(std::string("Model ") + variant_letter(v), cell_w);
    out << "\n";
  };
  std::optional<Variable> current;
  auto flush_r2 = [&](Variable y) {
    out << pad("R-squared (%)", label_w);
    for (auto v : table.variants) {
      auto it = table.r_squared.find(y);
      std::string cell;
      if (it != table.r_squared.end() && it->second.contains(v)) cell = format_r_squared(it->second.at(v));
      out << pad(cell, cell_w);
    }
    out << "\n";
  };
  for (const auto& row : table.rows) {
    if (current != row.equation) {
      if (current) flush_r2(*current);
      current = row.equation;
      header(panel::display_name(row.equation));
    }
    out << pad(row.label, label_w);
    for (auto v : table.variants) {
      auto it = row.cells.find(v);
      out << pad(it == row.cells.end() ? std::string() : format_coefficient(it->second.estimate, it->second.se), cell_w);
    }
    out << "\n";
  }
  if (current) flush_r2(*current);

  auto fit_row = [&](std::string_view label, auto getter) {
    out << pad(std::string(label), label_w);
    for (auto v : table.variants) {
      const auto* f = comparison.find(v);
      out << pad(f && f->fit ? getter(*f->fit) : std::string(), cell_w);
    }
    out << "\n";
  };
  fit_row("χ²", [](const sem::FitResult& f) { return format_fixed(f.chi_square, 3); });
  fit_row("d.f.", [](const sem::FitResult& f) { return std::to_string(f.df); });
  fit_row("Prob. > χ²", [](const sem::FitResult& f) { return format_fixed(f.p_value, 4); });
  fit_row("SRMR", [](const sem::FitResult& f) { return format_fixed(f.srmr, 3); });
  fit_row("RMSEA", [](const sem::FitResult& f) { return fixed_or_blank(f.rmsea, 3); });
  fit_row("CFI", [](const sem::FitResult& f) { return fixed_or_blank(f.cfi, 3); });
  fit_row("TLI", [](const sem::FitResult& f) { return fixed_or_blank(f.tli, 3); });
  fit_row("AIC", [](const sem::FitResult& f) { return format_fixed(f.aic, 3); });
  out << "\nStandard errors in brackets. Significance level: ***= p < 0.001; **= p < 0.01; *= p < 0.05; °= p < 0.1\n";

  if (!comparison.tests.empty()) {
    out << "\n";
    for (const auto& t : comparison.tests) {
      out << "diff(χ²) " << variant_letter(t.restricted) << "-" << variant_letter(t.full) << " = "
          << format_fixed(t.result.delta_chi_square, 3) << " (d.f. " << t.result.delta_df
          << ", p = " << format_fixed(t.result.p_value, 4) << ")\n";
    }
  }
  if (comparison.selected) out << "Selected model: " << variant_letter(*comparison.selected) << "\n";
  if (!comparison.selection_note.empty()) out << comparison.selection_note << "\n";
  return out.str();
}

std::string coefficient_table_csv(const CoefficientTable& table, const VariantComparison& comparison) {
  std::ostringstream out;
  out << "equation,predictor,parameter,model,estimate,se,p_value\n";
  for (const auto& row : table.rows) {
    for (auto v : table.variants) {
      auto it = row.cells.find(v);
      if (it == row.cells.end()) continue;
      out << panel::column_name(row.equation) << "," << csv_field(row.label) << "," << csv_field(row.parameter)
          << "," << variant_letter(v) << "," << format_roundtrip(it->second.estimate) << ","
          << format_roundtrip(it->second.se) << "," << format_roundtrip(it->second.p_value) << "\n";
    }
  }
  for (const auto& [y, per] : table.r_squared) {
    for (const auto& [v, r2] : per) {
      out << panel::column_name(y) << ",R-squared,," << variant_letter(v) << "," << format_roundtrip(r2) << ",,\n";
    }
  }
  out << "\nmodel,converged,chi_square,df,p_value,srmr,rmsea,cfi,tli,aic\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_roundtrip(*v) : std::string(); };
  for (const auto& f : comparison.fits) {
    out << variant_letter(f.variant) << "," << (f.converged() ? "true" : "false");
    if (f.fit) {
      out << "," << format_roundtrip(f.fit->chi_square) << "," << f.fit->df << "," << format_roundtrip(f.fit->p_value)
          << "," << format_roundtrip(f.fit->srmr) << "," << opt(f.fit->rmsea) << "," << opt(f.fit->cfi) << ","
          << opt(f.fit->tli) << "," << format_roundtrip(f.fit->aic);
    } else {
      out << ",,,,,,,,";
    }
    out << "\n";
  }
  if (!comparison.tests.empty()) {
    out << "\nrestricted,full,delta_chi_square,delta_df,p_value\n";
    for (const auto& t : comparison.tests) {
      out << variant_letter(t.restricted) << "," << variant_letter(t.full) << ","
          << format_roundtrip(t.result.delta_chi_square) << "," << t.result.delta_df << ","
          << format_roundtrip(t.result.p_value) << "\n";
    }
  }
  return out.str();
}

sem::Json comparison_to_json(const VariantComparison& comparison) {
  const auto& s = comparison.spec;
  sem::Json out;
  out["spec"] = {
      {"waves", s.waves},
      {"include_overall_propensity", s.include_overall_propensity},
      {"time_invariant", s.time_invariant},
      {"individual_effects", s.individual_effects},
      {"correlated_individual_effects", s.correlated_individual_effects},
      {"sequential_exogeneity", s.sequential_exogeneity},
      {"time_effect", s.time_effect == TimeEffect::wave_dummies ? "wave_dummies" : "linear_trend"},
  };
  sem::Json variants = sem::Json::object();
  for (const auto& f : comparison.fits) {
    sem::Json block = f.fit ? sem::fit_to_json(*f.fit) : sem::Json::object();
    block["converged"] = f.converged();
    if (!f.error.empty()) block["error"] = f.error;
    variants[std::string(1, variant_letter(f.variant))] = std::move(block);
  }
  out["variants"] = std::move(variants);
  sem::Json tests = sem::Json::array();
  for (const auto& t : comparison.tests) {
    tests.push_back({{"restricted", std::string(1, variant_letter(t.restricted))},
                     {"full", std::string(1, variant_letter(t.full))},
                     {"delta_chi_square", t.result.delta_chi_square},
                     {"delta_df", t.result.delta_df},
                     {"p_value", t.result.p_value}});
  }
  out["comparison"] = {
      {"tests", std::move(tests)},
      {"selected", comparison.selected ? sem::Json(std::string(1, variant_letter(*comparison.selected))) : sem::Json()},
      {"note", comparison.selection_note},
  };
  return out;
}

}  // namespace panelforge::clpm
