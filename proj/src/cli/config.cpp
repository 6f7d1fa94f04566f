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

#include "panelforge/cli.hpp"

#include <filesystem>

#include "panelforge/error.hpp"
#include "panelforge/textio.hpp"

namespace panelforge::cli {

namespace {

template <typename T>
T get(const sem::Json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string("config field '") + key + "' has the wrong type");
  }
}

clpm::MomentsMode parse_moments(const std::string& s) {
  if (s == "robust") return clpm::MomentsMode::robust;
  if (s == "classical") return clpm::MomentsMode::classical;
  throw ValidationError("moments must be 'robust' or 'classical', got '" + s + "'");
}

OutputFormat parse_format(const std::string& s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  if (s == "text") return OutputFormat::text;
  throw ValidationError("format must be csv, json or text, got '" + s + "'");
}

clpm::TimeEffect parse_time_effect(const std::string& s) {
  if (s == "wave_dummies") return clpm::TimeEffect::wave_dummies;
  if (s == "linear_trend") return clpm::TimeEffect::linear_trend;
  throw ValidationError("time_effect must be 'wave_dummies' or 'linear_trend', got '" + s + "'");
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ArgumentError(std::string("no ") + what + " file given");
  if (!std::filesystem::is_regular_file(path)) throw ArgumentError(std::string(what) + " file not found: " + path);
}

}  // namespace

void RunConfig::validate_inputs(bool need_corpus, bool need_panel) const {
  if (need_panel && !panel.empty()) {
    require_file(panel, "panel");
  } else if (need_corpus || need_panel) {
    require_file(roster, "roster");
    require_file(publications, "publications");
  }
  corpus::validate_windows(corpus::make_windows(windows.first_year, windows.length, windows.count));
}

RunConfig config_from_json(const sem::Json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  static const std::set<std::string> known = {
      "roster", "publications", "panel", "fit", "params", "output_dir", "windows", "home_country",
      "strict_roster_intra", "missing_country", "byline_weighted_udas", "excluded_doc_types", "variants", "moments",
      "robust_tail_probability", "model", "include_treatment_persistence", "seed", "n", "truth", "round_rank",
      "format", "threads"};
  for (const auto& [k, _] : j.items()) {
    if (!known.contains(k)) throw ValidationError("unknown config field '" + k + "'");
  }
  RunConfig c;
  for (auto [key, field] : {std::pair{"roster", &c.roster}, {"publications", &c.publications}, {"panel", &c.panel},
                            {"fit", &c.fit}, {"params", &c.params}, {"output_dir", &c.output_dir},
                            {"home_country", &c.home_country}}) {
    if (j.contains(key)) *field = get<std::string>(j, key);
  }
  if (j.contains("windows")) {
    const auto& w = j.at("windows");
    if (w.contains("first_year")) c.windows.first_year = get<int>(w, "first_year");
    if (w.contains("length")) c.windows.length = get<int>(w, "length");
    if (w.contains("count")) c.windows.count = get<int>(w, "count");
  }
  if (j.contains("strict_roster_intra")) c.strict_roster_intra = get<bool>(j, "strict_roster_intra");
  if (j.contains("missing_country")) {
    const auto s = get<std::string>(j, "missing_country");
    if (s == "warn") {
      c.missing_country = corpus::MissingCountryPolicy::warn_as_domestic;
    } else if (s == "error") {
      c.missing_country = corpus::MissingCountryPolicy::error;
    } else {
      throw ValidationError("missing_country must be 'warn' or 'error'");
    }
  }
  if (j.contains("byline_weighted_udas")) c.byline_weighted_udas = get<std::set<std::string>>(j, "byline_weighted_udas");
  if (j.contains("excluded_doc_types")) c.excluded_doc_types = get<std::set<std::string>>(j, "excluded_doc_types");
  if (j.contains("variants")) {
    c.variants.clear();
    for (const auto& v : get<std::vector<std::string>>(j, "variants")) c.variants.push_back(clpm::parse_variant(v));
  }
  if (j.contains("moments")) c.moments = parse_moments(get<std::string>(j, "moments"));
  if (j.contains("robust_tail_probability")) c.robust_tail_probability = get<double>(j, "robust_tail_probability");
  if (j.contains("model")) {
    const auto& m = j.at("model");
    if (m.contains("waves")) c.spec.waves = get<int>(m, "waves");
    if (m.contains("include_overall_propensity")) c.spec.include_overall_propensity = get<bool>(m, "include_overall_propensity");
    if (m.contains("time_invariant")) c.spec.time_invariant = get<bool>(m, "time_invariant");
    if (m.contains("individual_effects")) c.spec.individual_effects = get<bool>(m, "individual_effects");
    if (m.contains("correlated_individual_effects")) {
      c.spec.correlated_individual_effects = get<bool>(m, "correlated_individual_effects");
    }
    if (m.contains("sequential_exogeneity")) c.spec.sequential_exogeneity = get<bool>(m, "sequential_exogeneity");
    if (m.contains("time_effect")) c.spec.time_effect = parse_time_effect(get<std::string>(m, "time_effect"));
  }
  if (j.contains("include_treatment_persistence")) {
    c.include_treatment_persistence = get<bool>(j, "include_treatment_persistence");
  }
  if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed");
  if (j.contains("n")) c.n = get<std::size_t>(j, "n");
  if (j.contains("truth")) c.truth = clpm::parse_variant(get<std::string>(j, "truth"));
  if (j.contains("round_rank")) c.round_rank = get<bool>(j, "round_rank");
  if (j.contains("format")) c.format = parse_format(get<std::string>(j, "format"));
  if (j.contains("threads")) c.threads = get<unsigned>(j, "threads");
  return c;
}

RunConfig load_config(const std::string& path) {
  require_file(path, "config");
  try {
    return config_from_json(sem::Json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path, 1, e.what());
  }
}

}  // namespace panelforge::cli
