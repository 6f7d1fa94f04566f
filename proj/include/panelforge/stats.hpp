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

#include <string>

namespace panelforge::stats {

// Upper tail P(X > x) for X ~ chi-square(df). Returns 1 for x <= 0.
double chi_square_sf(double x, double df);
// x such that P(X <= x) = prob.
double chi_square_quantile(double prob, double df);
double chi_square_cdf(double x, double df);

double normal_two_sided_p(double z);
double t_two_sided_p(double t, double df);

// "***" p < 0.001, "**" p < 0.01, "*" p < 0.05; with `marginal`, "°" p < 0.1.
std::string significance_stars(double p, bool marginal = false);

}  // namespace panelforge::stats
