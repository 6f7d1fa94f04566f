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
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "panelforge/corpus.hpp"

namespace panelforge::indicators {

using corpus::PublicationRecord;
using corpus::Roster;
using corpus::WindowSpec;

enum class FractionalScheme { uniform, byline_weighted };

// Credit share of every byline entry. Sums to 1.
//
// byline_weighted follows life-science ordering conventions. When the first
// and last authors share a university_id, first and last get 0.4 each and the
// rest split 0.2. Otherwise first and last get 0.3, second and second-to-last
// 0.15, and the rest split 0.1. Short bylines where roles coincide accumulate
// the role weights per author, then everything is renormalized to 1.
std::vector<double> byline_weights(const PublicationRecord& pub, FractionalScheme scheme);
double fractional_contribution(const PublicationRecord& pub, std::string_view focal, FractionalScheme scheme);

// Mean citations of cited publications per (year, subject category).
class CitationBaseline {
 public:
  struct Cell {
    double citation_sum = 0;
    std::size_t cited = 0;
  };

  static CitationBaseline build(std::span<const PublicationRecord> pubs);

  // Throws NumericalError when the cell has no cited publications.
  double mean(int year, std::string_view category) const;
  std::size_t cited_count(int year, std::string_view category) const;
  // Mean of the per-category baselines of the publication's categories.
  double reference(const PublicationRecord& pub) const;

  const std::map<std::pair<int, std::string>, Cell, std::less<>>& cells() const { return cells_; }

 private:
  std::map<std::pair<int, std::string>, Cell, std::less<>> cells_;
};

// (1/t) * sum over the focal's publications in the window of
// (citations / baseline) * fractional contribution.
double fss(std::string_view focal, const WindowSpec& window, std::span<const PublicationRecord> pubs,
           const CitationBaseline& baseline, FractionalScheme scheme, double t_years);

// Divides each value by the mean of its SDS group.
std::map<std::string, double> fss_scaled(const std::map<std::string, double>& values,
                                         const std::map<std::string, std::string>& sds_of);

struct Propensities {
  std::size_t n_pubs = 0;
  double c = 0;
  double ci = 0;
  double ced = 0;
  double cef = 0;
};

Propensities propensities(std::string_view focal, const WindowSpec& window, std::span<const PublicationRecord> pubs,
                          const Roster& roster, const corpus::ClassifyOptions& options = {});

struct WindowIndicators {
  std::string researcher_id;
  int window = 0;
  std::size_t n_pubs = 0;
  double fss = 0;
  double fss_scaled = 0;
  double c = 0;
  double ci = 0;
  double ced = 0;
  double cef = 0;
};

struct IndicatorOptions {
  corpus::ClassifyOptions classify;
  std::set<std::string> byline_weighted_udas = {"BIO", "MED", "AVS"};
  // Defaults to the window length in years.
  std::optional<double> t_years;
  unsigned threads = 1;
};

FractionalScheme scheme_for(const corpus::ResearcherRecord& r, const IndicatorOptions& options);

// Indicators for every active researcher and window, sorted by (id, window).
// FSS is scaled per SDS within each window over the given population.
std::vector<WindowIndicators> compute_indicators(const Roster& roster, std::span<const PublicationRecord> pubs,
                                                 std::span<const WindowSpec> windows,
                                                 const std::set<std::string>& population,
                                                 const IndicatorOptions& options = {});

inline constexpr std::string_view kIndicatorHeader = "researcher_id,window,n_pubs,fss,fss_scaled,c,ci,ced,cef";
std::string indicators_csv(std::span<const WindowIndicators> rows);

}  // namespace panelforge::indicators
