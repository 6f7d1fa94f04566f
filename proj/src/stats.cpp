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

#include "panelforge/stats.hpp"

#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "panelforge/error.hpp"

namespace panelforge::stats {

double chi_square_sf(double x, double df) {
  if (!(df > 0)) throw ArgumentError("chi-square df must be positive");
  if (std::isnan(x)) throw ArgumentError("chi-square statistic is NaN");
  if (x <= 0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>(df), x));
}

double chi_square_cdf(double x, double df) { return 1.0 - chi_square_sf(x, df); }

double chi_square_quantile(double prob, double df) {
  if (!(df > 0)) throw ArgumentError("chi-square df must be positive");
  if (!(prob >= 0 && prob < 1)) throw ArgumentError("quantile probability must be in [0, 1)");
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(df), prob);
}

double normal_two_sided_p(double z) {
  if (std::isnan(z)) return std::nan("");
  if (std::isinf(z)) return 0.0;
  return 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal_distribution<double>(), std::fabs(z)));
}

double t_two_sided_p(double t, double df) {
  if (std::isinf(t)) return 0.0;
  return 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<double>(df), std::fabs(t)));
}

std::string significance_stars(double p, bool marginal) {
  if (std::isnan(p)) return "";
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  if (marginal && p < 0.1) return "°";
  return "";
}

}  // namespace panelforge::stats
