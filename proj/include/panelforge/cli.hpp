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

#include <cstdint>
#include <exception>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "panelforge/clpm.hpp"
#include "panelforge/corpus.hpp"
#include "panelforge/sem/serialize.hpp"

namespace panelforge::cli {

enum class OutputFormat { csv, json, text };

struct WindowConfig {
  int first_year = 2001;
  int length = 3;
  int count = 4;
};

// One declarative run description. Loaded from a JSON file with --config;
// command-line flags override individual fields.
struct RunConfig {
  std::string roster;
  std::string publications;
  std::string panel;
  std::string fit;
  std::string params;
  std::string output_dir;

  WindowConfig windows;
  std::string home_country = "IT";
  bool strict_roster_intra = true;
  corpus::MissingCountryPolicy missing_country = corpus::MissingCountryPolicy::warn_as_domestic;
  std::set<std::string> byline_weighted_udas = {"BIO", "MED", "AVS"};
  std::set<std::string> excluded_doc_types = corpus::default_excluded_doc_types();

  std::vector<clpm::Variant> variants{clpm::kAllVariants.begin(), clpm::kAllVariants.end()};
  clpm::MomentsMode moments = clpm::MomentsMode::robust;
  double robust_tail_probability = 0.05;
  clpm::ClpmSpec spec;
  bool include_treatment_persistence = true;

  // Unset: the seed stored with the true parameters.
  std::optional<std::uint64_t> seed;
  bool round_rank = false;
  std::size_t n = 5000;
  clpm::Variant truth = clpm::Variant::D;

  OutputFormat format = OutputFormat::csv;
  unsigned threads = 0;

  // Referenced input paths exist and the windows are valid.
  void validate_inputs(bool need_corpus, bool need_panel) const;
};

RunConfig config_from_json(const sem::Json& j);
RunConfig load_config(const std::string& path);

// 0 ok, 2 input error, 3 convergence failure, 4 invalid specification.
int exit_code(const std::exception& e);

int run(int argc, char** argv);

}  // namespace panelforge::cli
