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

#include "panelforge/sem/serialize.hpp"

#include <cmath>

#include "panelforge/error.hpp"

namespace panelforge::sem {

namespace {

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
Json number(const std::optional<double>& v) { return v ? number(*v) : Json(nullptr); }

std::string_view matrix_name(MatrixKind k) {
  switch (k) {
    case MatrixKind::path: return "path";
    case MatrixKind::covariance: return "covariance";
    case MatrixKind::mean: return "mean";
  }
  return "";
}

}  // namespace

Json fit_to_json(const FitResult& fit) {
  Json out;
  out["metadata"] = {
      {"estimator", "ML"},
      {"moments", fit.provenance == MomentsProvenance::robust ? "robust" : "classical"},
      {"chi_square_scaling", "N-1"},
      {"standard_errors", "expected information, no robust sandwich correction"},
  };
  Json params = Json::array();
  for (const auto& p : fit.parameters) {
    params.push_back({{"id", p.id}, {"locations", p.locations}, {"value", number(p.estimate)}, {"se", number(p.se)}});
  }
  out["parameters"] = std::move(params);
  out["fit"] = {
      {"n", fit.n},
      {"p", fit.p},
      {"q", fit.q},
      {"f_min", number(fit.f_min)},
      {"chi_square", number(fit.chi_square)},
      {"df", fit.df},
      {"p_value", number(fit.p_value)},
      {"srmr", number(fit.srmr)},
      {"rmsea", number(fit.rmsea)},
      {"cfi", number(fit.cfi)},
      {"tli", number(fit.tli)},
      {"aic", number(fit.aic)},
      {"baseline_chi_square", number(fit.baseline_chi_square)},
      {"baseline_df", fit.baseline_df},
  };
  Json r2 = Json::object();
  for (const auto& [k, v] : fit.r_squared) r2[k] = number(v);
  out["r_squared"] = std::move(r2);
  out["convergence"] = {
      {"converged", fit.convergence.converged},
      {"iterations", fit.convergence.iterations},
      {"gradient_norm", number(fit.convergence.gradient_norm)},
      {"message", fit.convergence.message},
  };
  return out;
}

Json model_to_json(const CovarianceModel& model) {
  Json out;
  Json vars = Json::array();
  for (const auto& v : model.variables()) {
    vars.push_back({{"name", v.name}, {"kind", v.kind == VariableKind::observed ? "observed" : "latent"}});
  }
  out["variables"] = std::move(vars);
  Json entries = Json::array();
  for (const auto& s : model.slots()) {
    Json e = {{"matrix", matrix_name(s.matrix)}, {"location", model.describe(s)}};
    if (s.spec.parameter) {
      e["parameter"] = *s.spec.parameter;
      if (s.spec.scale != 1.0) e["scale"] = s.spec.scale;
    } else {
      e["value"] = s.spec.value;
    }
    entries.push_back(std::move(e));
  }
  out["entries"] = std::move(entries);
  out["free_parameters"] = model.num_parameters();
  return out;
}

std::map<std::string, double> estimates_from_json(const Json& fit) {
  if (!fit.contains("parameters") || !fit["parameters"].is_array()) {
    throw ValidationError("fit document has no parameter table");
  }
  std::map<std::string, double> out;
  for (const auto& p : fit["parameters"]) {
    if (!p.contains("id") || !p.contains("value") || !p["value"].is_number()) {
      throw ValidationError("malformed parameter entry in fit document");
    }
    out[p["id"].get<std::string>()] = p["value"].get<double>();
  }
  return out;
}

}  // namespace panelforge::sem
