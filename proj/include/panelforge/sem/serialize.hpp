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

#include <map>
#include <string>

#include <json.hpp>

#include "panelforge/sem/fit.hpp"
#include "panelforge/sem/model.hpp"

namespace panelforge::sem {

using Json = nlohmann::ordered_json;

// Parameter table, fit block, convergence block and estimation metadata.
// Undefined numbers (df = 0 indices, missing SEs) are written as null.
Json fit_to_json(const FitResult& fit);
Json model_to_json(const CovarianceModel& model);

// Estimates by parameter id, read back from fit_to_json output.
std::map<std::string, double> estimates_from_json(const Json& fit);

}  // namespace panelforge::sem
