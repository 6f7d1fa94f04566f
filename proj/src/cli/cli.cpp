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

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "panelforge/cli.hpp"
#include "panelforge/error.hpp"
#include "panelforge/indicators.hpp"
#include "panelforge/mediation.hpp"
#include "panelforge/parallel.hpp"
#include "panelforge/panel.hpp"
#include "panelforge/synth.hpp"
#include "panelforge/textio.hpp"

namespace panelforge::cli {

namespace {

struct Overrides {
  std::optional<std::string> config, roster, publications, panel, fit, params, output_dir, home_country;
  std::optional<int> first_year, window_length, window_count, waves;
  std::optional<std::string> variants, moments, format, truth;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n;
  std::optional<unsigned> threads;
  bool include_c = false;
  bool linear_trend = false;
  bool free_time = false;
  bool correlated_effects = false;
  bool no_persistence = false;
  bool round_rank = false;
};

std::vector<clpm::Variant> parse_variant_list(const std::string& text) {
  std::vector<clpm::Variant> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(clpm::parse_variant(item));
  }
  if (out.empty()) throw ArgumentError("empty variant list");
  return out;
}

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config ? load_config(*o.config) : RunConfig{};
  auto set = [](auto& field, const auto& value) {
    if (value) field = *value;
  };
  set(c.roster, o.roster);
  set(c.publications, o.publications);
  set(c.panel, o.panel);
  set(c.fit, o.fit);
  set(c.params, o.params);
  set(c.output_dir, o.output_dir);
  set(c.home_country, o.home_country);
  set(c.windows.first_year, o.first_year);
  set(c.windows.length, o.window_length);
  set(c.windows.count, o.window_count);
  set(c.spec.waves, o.waves);
  if (o.window_count && !o.waves) c.spec.waves = *o.window_count;
  if (o.variants) c.variants = parse_variant_list(*o.variants);
  if (o.moments) {
    auto j = sem::Json{{"moments", *o.moments}};
    c.moments = config_from_json(j).moments;
  }
  if (o.format) {
    auto j = sem::Json{{"format", *o.format}};
    c.format = config_from_json(j).format;
  }
  if (o.truth) c.truth = clpm::parse_variant(*o.truth);
  if (o.seed) c.seed = *o.seed;
  set(c.n, o.n);
  if (o.include_c) c.spec.include_overall_propensity = true;
  if (o.linear_trend) c.spec.time_effect = clpm::TimeEffect::linear_trend;
  if (o.free_time) c.spec.time_invariant = false;
  if (o.correlated_effects) c.spec.correlated_individual_effects = true;
  if (o.no_persistence) c.include_treatment_persistence = false;
  if (o.round_rank) c.round_rank = true;
  if (o.threads) {
    c.threads = *o.threads;
  } else if (const char* env = std::getenv("PANELFORGE_THREADS"); env && *env) {
    const auto v = parse_int(env);
    if (v < 0) throw ArgumentError("PANELFORGE_THREADS must be nonnegative");
    c.threads = static_cast<unsigned>(v);
  }
  return c;
}

struct Corpus {
  corpus::Roster roster;
  std::size_t loaded = 0;
  std::vector<corpus::PublicationRecord> pubs;  // after document-type filtering
  std::vector<corpus::WindowSpec> windows;
};

Corpus load_corpus(const RunConfig& c) {
  c.validate_inputs(true, false);
  Corpus out;
  out.windows = corpus::make_windows(c.windows.first_year, c.windows.length, c.windows.count);
  out.roster = corpus::load_roster_file(c.roster);
  const corpus::YearSpan span{out.windows.front().start_year, out.windows.back().end_year};
  auto all = corpus::load_publications_file(c.publications, span);
  out.loaded = all.size();
  out.pubs = corpus::filter_document_types(all, c.excluded_doc_types);
  corpus::check_roster_links(out.pubs, out.roster);
  return out;
}

indicators::IndicatorOptions indicator_options(const RunConfig& c) {
  indicators::IndicatorOptions o;
  o.classify.home_country = c.home_country;
  o.classify.strict_roster_intra = c.strict_roster_intra;
  o.classify.missing_country = c.missing_country;
  o.byline_weighted_udas = c.byline_weighted_udas;
  o.threads = resolve_threads(c.threads);
  return o;
}

panel::PanelDataset obtain_panel(const RunConfig& c) {
  if (!c.panel.empty()) {
    c.validate_inputs(false, true);
    return panel::load_panel_file(c.panel);
  }
  const auto corp = load_corpus(c);
  panel::BuildOptions opts;
  opts.indicators = indicator_options(c);
  return panel::build_panel(corp.roster, corp.pubs, corp.windows, opts);
}

// Writes to output_dir/name, or to stdout when no directory is configured.
void emit(const RunConfig& c, const std::string& name, std::string_view contents) {
  if (c.output_dir.empty()) {
    std::cout << contents;
    return;
  }
  std::filesystem::create_directories(c.output_dir);
  write_file((std::filesystem::path(c.output_dir) / name).string(), contents);
}

std::string dump(const sem::Json& j) { return j.dump(2) + "\n"; }

void emit_report(const RunConfig& c, const std::string& stem, const std::function<std::string()>& csv,
                 const std::function<std::string()>& text, const std::function<sem::Json()>& json) {
  switch (c.format) {
    case OutputFormat::json:
      emit(c, stem + ".json", dump(json()));
      break;
    case OutputFormat::text:
      emit(c, stem + ".txt", text());
      break;
    case OutputFormat::csv:
      emit(c, stem + ".csv", csv());
      if (!c.output_dir.empty()) emit(c, stem + ".txt", text());
      break;
  }
}

sem::Json descriptives_json(const std::vector<panel::VariableSummary>& stats, std::size_t observations) {
  sem::Json rows = sem::Json::array();
  for (const auto& s : stats) {
    rows.push_back({{"variable", panel::column_name(s.variable)}, {"mean", s.mean}, {"sd", s.sd}});
  }
  return {{"observations", observations}, {"variables", std::move(rows)}};
}

sem::Json correlations_json(const panel::CorrelationMatrix& m) {
  sem::Json names = sem::Json::array();
  for (auto v : m.variables) names.push_back(panel::column_name(v));
  sem::Json cells = sem::Json::array();
  for (Eigen::Index i = 0; i < m.r.rows(); ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      cells.push_back({{"row", panel::column_name(m.variables[static_cast<std::size_t>(i)])},
                       {"column", panel::column_name(m.variables[static_cast<std::size_t>(j)])},
                       {"r", m.r(i, j)},
                       {"p_value", m.p(i, j)},
                       {"stars", m.stars(i, j)}});
    }
  }
  return {{"rows_used", m.rows_used}, {"variables", std::move(names)}, {"cells", std::move(cells)}};
}

clpm::VariantComparison run_fits(const RunConfig& c, const panel::PanelDataset& data) {
  clpm::ClpmSpec spec = c.spec;
  spec.waves = data.waves();
  sem::RobustOptions robust;
  robust.tail_probability = c.robust_tail_probability;
  const auto moments = clpm::panel_moments(data, spec, c.moments, robust);
  clpm::ComparisonOptions opts;
  opts.variants = c.variants;
  opts.threads = resolve_threads(c.threads);
  return clpm::fit_variants(moments, spec, opts);
}

void emit_fits(const RunConfig& c, const clpm::VariantComparison& cmp) {
  const auto table = clpm::coefficient_table(cmp);
  emit_report(
      c, "fits", [&] { return clpm::coefficient_table_csv(table, cmp); },
      [&] { return clpm::coefficient_table_text(table, cmp); }, [&] { return clpm::comparison_to_json(cmp); });
}

// The model whose paths feed the indirect effects: D when fitted, else the
// selected variant.
const clpm::VariantFit* mediation_source(const clpm::VariantComparison& cmp) {
  if (const auto* d = cmp.find(clpm::Variant::D); d && d->converged()) return d;
  if (cmp.selected) return cmp.find(*cmp.selected);
  return nullptr;
}

mediation::IndirectOptions indirect_options(const RunConfig& c) {
  mediation::IndirectOptions o;
  o.include_treatment_persistence = c.include_treatment_persistence;
  return o;
}

void emit_indirect(const RunConfig& c, const mediation::IndirectReport& report) {
  emit_report(
      c, "indirect", [&] { return mediation::indirect_csv(report); }, [&] { return mediation::indirect_text(report); },
      [&] { return mediation::indirect_json(report); });
}

int cmd_ingest(const RunConfig& c) {
  const auto corp = load_corpus(c);
  const auto active = corpus::select_active_population(corp.roster, corp.pubs, corp.windows);
  std::map<std::string, std::pair<std::size_t, std::size_t>> by_uda;
  for (const auto& r : corp.roster.records()) {
    auto& e = by_uda[r.uda];
    ++e.first;
    e.second += active.contains(r.researcher_id);
  }
  auto coverage = [](std::size_t part, std::size_t whole) {
    return whole == 0 ? std::string("—") : format_fixed(100.0 * static_cast<double>(part) / static_cast<double>(whole), 1);
  };
  std::ostringstream span;
  for (std::size_t k = 0; k < corp.windows.size(); ++k) {
    span << (k ? ", " : "") << corp.windows[k].start_year << "-" << corp.windows[k].end_year;
  }
  if (c.format == OutputFormat::json) {
    sem::Json udas = sem::Json::array();
    for (const auto& [uda, e] : by_uda) {
      udas.push_back({{"uda", uda}, {"total", e.first}, {"active", e.second}});
    }
    emit(c, "ingest.json",
         dump({{"researchers", corp.roster.size()},
               {"publications_loaded", corp.loaded},
               {"publications_kept", corp.pubs.size()},
               {"active_population", active.size()},
               {"windows", span.str()},
               {"udas", std::move(udas)}}));
    return 0;
  }
  std::ostringstream out;
  out << "Researchers in roster: " << corp.roster.size() << "\n"
      << "Publications loaded: " << corp.loaded << "\n"
      << "Publications kept after document-type filter: " << corp.pubs.size() << "\n"
      << "Active in " << span.str() << ": " << active.size() << "\n\n"
      << "UDA,Total professors,Active in all windows,Coverage (%)\n";
  for (const auto& [uda, e] : by_uda) {
    out << csv_field(uda) << "," << e.first << "," << e.second << "," << coverage(e.second, e.first) << "\n";
  }
  out << "Total," << corp.roster.size() << "," << active.size() << "," << coverage(active.size(), corp.roster.size())
      << "\n";
  emit(c, "ingest.txt", out.str());
  return 0;
}

int cmd_indicators(const RunConfig& c) {
  const auto corp = load_corpus(c);
  const auto active = corpus::select_active_population(corp.roster, corp.pubs, corp.windows);
  const auto rows = indicators::compute_indicators(corp.roster, corp.pubs, corp.windows, active, indicator_options(c));
  emit(c, "indicators.csv", indicators::indicators_csv(rows));
  return 0;
}

int cmd_panel(const RunConfig& c) {
  RunConfig corpus_only = c;
  corpus_only.panel.clear();
  emit(c, "panel.csv", panel::panel_csv(obtain_panel(corpus_only)));
  return 0;
}

int cmd_fit(const RunConfig& c) {
  const auto cmp = run_fits(c, obtain_panel(c));
  emit_fits(c, cmp);
  return cmp.all_converged() ? 0 : 3;
}

int cmd_mediate(const RunConfig& c) {
  if (c.fit.empty() || !std::filesystem::is_regular_file(c.fit)) throw ArgumentError("fit file not found: " + c.fit);
  sem::Json doc;
  try {
    doc = sem::Json::parse(read_file(c.fit));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(c.fit, 1, e.what());
  }
  clpm::ClpmSpec spec = c.spec;
  sem::Json fit_doc;
  if (doc.contains("variants")) {
    const auto& s = doc.value("spec", sem::Json::object());
    spec.waves = s.value("waves", spec.waves);
    spec.include_overall_propensity = s.value("include_overall_propensity", spec.include_overall_propensity);
    spec.time_invariant = s.value("time_invariant", spec.time_invariant);
    std::string letter;
    if (c.variants.size() == 1) {
      letter = std::string(1, clpm::variant_letter(c.variants.front()));
    } else if (doc["variants"].contains("D")) {
      letter = "D";
    } else if (doc.contains("comparison") && doc["comparison"]["selected"].is_string()) {
      letter = doc["comparison"]["selected"].get<std::string>();
    }
    if (letter.empty() || !doc["variants"].contains(letter)) throw ArgumentError("fit file has no usable model variant");
    fit_doc = doc["variants"][letter];
  } else {
    fit_doc = doc;
  }
  const auto paths = mediation::path_system(sem::estimates_from_json(fit_doc), spec);
  emit_indirect(c, mediation::indirect_report(paths, {panel::Variable::rank, panel::Variable::cohort, panel::Variable::gender},
                                              {panel::Variable::fss_scaled, panel::Variable::ci, panel::Variable::ced,
                                               panel::Variable::cef},
                                              indirect_options(c)));
  return 0;
}

int cmd_simulate(const RunConfig& c) {
  synth::TrueParameters truth = c.params.empty() ? synth::default_parameters(c.truth) : synth::load_parameters_file(c.params);
  if (c.round_rank) truth.round_rank = true;
  const auto seed = c.seed.value_or(truth.seed);
  truth.seed = seed;
  const auto sim = synth::simulate_panel(truth, c.n, c.spec.waves, seed, resolve_threads(c.threads));
  emit(c, "panel.csv", panel::panel_csv(sim.panel));
  if (!c.output_dir.empty()) emit(c, "true_parameters.json", dump(synth::to_json(truth)));
  std::cerr << "clamped " << sim.clamped << " of " << sim.propensity_values << " propensity values ("
            << format_fixed(100.0 * sim.clamping_rate(), 3) << "%)\n";
  return 0;
}

int cmd_analyze(const RunConfig& c) {
  if (c.output_dir.empty()) throw ArgumentError("analyze needs an output directory (--out)");
  const auto data = obtain_panel(c);
  const auto stats = panel::descriptive_stats(data);
  emit_report(
      c, "descriptives", [&] { return panel::descriptives_csv(stats); },
      [&] { return panel::descriptives_text(stats, data.rows().size()); },
      [&] { return descriptives_json(stats, data.rows().size()); });
  std::vector<panel::Variable> vars(panel::kAllVariables.begin(), panel::kAllVariables.end());
  const auto corr = panel::correlation_matrix(data, vars);
  emit_report(
      c, "correlations", [&] { return panel::correlations_csv(corr); }, [&] { return panel::correlations_text(corr); },
      [&] { return correlations_json(corr); });

  const auto cmp = run_fits(c, data);
  emit_fits(c, cmp);
  if (const auto* src = mediation_source(cmp); src && src->converged()) {
    const auto paths = mediation::path_system(*src->fit, cmp.spec);
    emit_indirect(c, mediation::indirect_report(paths, {panel::Variable::rank, panel::Variable::cohort,
                                                        panel::Variable::gender},
                                                {panel::Variable::fss_scaled, panel::Variable::ci,
                                                 panel::Variable::ced, panel::Variable::cef},
                                                indirect_options(c)));
  }
  return cmp.all_converged() ? 0 : 3;
}

void add_common(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--config", o.config, "JSON run configuration; flags override its fields");
  cmd.add_option("--out", o.output_dir, "Output directory (stdout when omitted)");
  cmd.add_option("--threads", o.threads, "Worker threads (0 = all cores; env PANELFORGE_THREADS)");
  cmd.add_option("--format", o.format, "csv (with text), json or text");
}

void add_corpus(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--roster", o.roster, "Roster CSV");
  cmd.add_option("--publications", o.publications, "Publications JSON lines");
  cmd.add_option("--first-year", o.first_year, "First year of the first window");
  cmd.add_option("--window-length", o.window_length, "Window length in years");
  cmd.add_option("--windows", o.window_count, "Number of windows");
  cmd.add_option("--home-country", o.home_country, "Country code counted as domestic");
}

void add_model(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--variants", o.variants, "Comma-separated model variants (A,B,C,D)");
  cmd.add_option("--moments", o.moments, "robust or classical first-stage moments");
  cmd.add_flag("--include-c", o.include_c, "Add the overall propensity C as a process");
  cmd.add_flag("--linear-trend", o.linear_trend, "Linear time trend instead of wave intercepts");
  cmd.add_flag("--free-time", o.free_time, "Drop the time-invariance constraints");
  cmd.add_flag("--correlated-effects", o.correlated_effects, "Free covariances among individual effects");
}

void add_mediation(CLI::App& cmd, Overrides& o) {
  cmd.add_flag("--exclude-persistence", o.no_persistence,
               "Leave the treatment's own persistence out of the indirect effect");
}

}  // namespace

int exit_code(const std::exception& e) {
  if (dynamic_cast<const sem::ConvergenceError*>(&e)) return 3;
  if (dynamic_cast<const SpecError*>(&e)) return 4;
  if (dynamic_cast<const Error*>(&e)) return 2;
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return 2;
  return 1;
}

int run(int argc, char** argv) {
  CLI::App app{"panelforge: research productivity and collaboration panels with cross-lagged SEM"};
  app.require_subcommand(1);
  Overrides o;

  auto* ingest = app.add_subcommand("ingest", "Load and filter the corpus and print coverage counts");
  add_common(*ingest, o);
  add_corpus(*ingest, o);

  auto* ind = app.add_subcommand("indicators", "Per-window FSS and collaboration propensities");
  add_common(*ind, o);
  add_corpus(*ind, o);

  auto* pan = app.add_subcommand("panel", "Assemble the balanced researcher x wave panel");
  add_common(*pan, o);
  add_corpus(*pan, o);

  auto* fit = app.add_subcommand("fit", "Fit the cross-lagged model variants and compare them");
  add_common(*fit, o);
  add_corpus(*fit, o);
  add_model(*fit, o);
  fit->add_option("--panel", o.panel, "Panel CSV (instead of roster and publications)");

  auto* med = app.add_subcommand("mediate", "Indirect effects from a saved fit");
  add_common(*med, o);
  add_mediation(*med, o);
  med->add_option("--fit", o.fit, "Fit JSON written by `fit --format json`")->required();
  med->add_option("--variants", o.variants, "Variant to read from a comparison file");
  med->add_option("--waves", o.waves, "Waves of a single-fit file");

  auto* sim = app.add_subcommand("simulate", "Simulate a panel from known cross-lagged parameters");
  add_common(*sim, o);
  sim->add_option("--params", o.params, "True-parameter JSON sidecar");
  sim->add_option("--truth", o.truth, "Built-in truth variant when no sidecar is given (A-D)");
  sim->add_option("--n", o.n, "Number of researchers");
  sim->add_option("--waves", o.waves, "Number of waves");
  sim->add_option("--seed", o.seed, "Random seed");
  sim->add_flag("--round-rank", o.round_rank, "Round rank to the 1-4 scale in the output");

  auto* analyze = app.add_subcommand("analyze", "Descriptives, correlations, model fits and indirect effects");
  add_common(*analyze, o);
  add_corpus(*analyze, o);
  add_model(*analyze, o);
  add_mediation(*analyze, o);
  analyze->add_option("--panel", o.panel, "Panel CSV (instead of roster and publications)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto cfg = resolve(o);
    if (ingest->parsed()) return cmd_ingest(cfg);
    if (ind->parsed()) return cmd_indicators(cfg);
    if (pan->parsed()) return cmd_panel(cfg);
    if (fit->parsed()) return cmd_fit(cfg);
    if (med->parsed()) return cmd_mediate(cfg);
    if (sim->parsed()) return cmd_simulate(cfg);
    if (analyze->parsed()) return cmd_analyze(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  }
  return 2;
}

}  // namespace panelforge::cli
