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


#include <filesystem>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>
#include <unistd.h>

#include "panelforge/cli.hpp"
#include "panelforge/error.hpp"
#include "panelforge/panel.hpp"
#include "panelforge/sem/fit.hpp"
#include "panelforge/synth.hpp"
#include "panelforge/textio.hpp"

using namespace panelforge;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("panelforge_cli_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

int run(std::vector<std::string> args) {
  static std::string prog = "panelforge";
  std::vector<char*> argv{prog.data()};
  for (auto& a : args) argv.push_back(a.data());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

void write(const std::string& path, const std::string& text) { write_file(path, text); }

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = read_file(e.path().string());
  return out;
}

}  // namespace

TEST_CASE("config fields are parsed and validated") {
  const auto c = cli::config_from_json(sem::Json::parse(R"({
    "windows": {"first_year": 1999, "length": 2, "count": 5},
    "variants": ["B", "D"], "moments": "classical", "threads": 2,
    "model": {"include_overall_propensity": true, "time_effect": "linear_trend"},
    "include_treatment_persistence": false, "seed": 9, "format": "json"})"));
  CHECK(c.windows.first_year == 1999);
  CHECK(c.windows.length == 2);
  CHECK(c.windows.count == 5);
  CHECK(c.variants == std::vector<clpm::Variant>{clpm::Variant::B, clpm::Variant::D});
  CHECK(c.moments == clpm::MomentsMode::classical);
  CHECK(c.threads == 2);
  CHECK(c.spec.include_overall_propensity);
  CHECK(c.spec.time_effect == clpm::TimeEffect::linear_trend);
  CHECK_FALSE(c.include_treatment_persistence);
  CHECK(c.seed == 9u);
  CHECK(c.format == cli::OutputFormat::json);

  const auto d = cli::config_from_json(sem::Json::object());
  CHECK(d.moments == clpm::MomentsMode::robust);
  CHECK(d.variants.size() == 4);
  CHECK(d.include_treatment_persistence);

  CHECK_THROWS_AS(cli::config_from_json(sem::Json::parse(R"({"colour": 1})")), ValidationError);
  CHECK_THROWS_AS(cli::config_from_json(sem::Json::parse(R"({"moments": "fast"})")), ValidationError);
  CHECK_THROWS_AS(cli::config_from_json(sem::Json::parse(R"({"threads": "many"})")), ValidationError);
  CHECK_THROWS_AS(cli::config_from_json(sem::Json::parse("[1, 2]")), ValidationError);
}

TEST_CASE("exit codes follow the error class") {
  CHECK(cli::exit_code(ParseError("f", 3, "bad")) == 2);
  CHECK(cli::exit_code(ValidationError("bad")) == 2);
  CHECK(cli::exit_code(ArgumentError("bad")) == 2);
  CHECK(cli::exit_code(NumericalError("bad")) == 2);
  CHECK(cli::exit_code(sem::ConvergenceError("bad", sem::FitResult{})) == 3);
  CHECK(cli::exit_code(SpecError("bad")) == 4);
  CHECK(cli::exit_code(std::runtime_error("bad")) == 1);
}

TEST_CASE("command line errors map to exit codes") {
  TempDir dir("errors");
  CHECK(run({"simulate", "--params", dir / "missing.json", "--out", dir / "sim"}) == 2);
  CHECK(run({"fit", "--panel", dir / "missing.csv"}) == 2);
  CHECK(run({"analyze", "--bogus-flag"}) == 2);
  CHECK(run({"--help"}) == 0);

  auto unstable = synth::default_parameters();
  unstable.equations.at(panel::Variable::rank).lags[panel::Variable::rank] = 1.2;
  write(dir / "unstable.json", synth::to_json(unstable).dump(2));
  CHECK(run({"simulate", "--params", dir / "unstable.json", "--out", dir / "sim"}) == 4);

  write(dir / "bad.json", "{ not json");
  CHECK(run({"simulate", "--config", dir / "bad.json"}) == 2);
}

TEST_CASE("flags override the config file") {
  TempDir dir("override");
  write(dir / "config.json", R"({"n": 300, "seed": 5, "output_dir": ")" + (dir / "from_config") + R"("})");
  REQUIRE(run({"simulate", "--config", dir / "config.json"}) == 0);
  CHECK(fs::exists(dir / "from_config/panel.csv"));
  REQUIRE(run({"simulate", "--config", dir / "config.json", "--n", "200", "--out", dir / "from_flag"}) == 0);
  std::istringstream in(read_file(dir / "from_flag/panel.csv"));
  CHECK(panel::parse_panel_csv(in).researchers() == 200);
  CHECK(read_file(dir / "from_config/panel.csv") != read_file(dir / "from_flag/panel.csv"));
}

TEST_CASE("analyze writes identical reports for equal inputs") {
  TempDir dir("analyze");
  REQUIRE(run({"simulate", "--n", "1500", "--seed", "11", "--out", dir / "sim"}) == 0);
  REQUIRE(run({"analyze", "--panel", dir / "sim/panel.csv", "--out", dir / "a", "--threads", "1"}) == 0);
  REQUIRE(run({"analyze", "--panel", dir / "sim/panel.csv", "--out", dir / "b", "--threads", "3"}) == 0);
  const auto a = read_tree(dir / "a");
  CHECK(a == read_tree(dir / "b"));
  CHECK(a.count("fits.json") + a.count("fits.csv") > 0);
  CHECK(run({"analyze", "--panel", dir / "sim/panel.csv"}) == 2);
}
