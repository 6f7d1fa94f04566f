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

#include "panelforge/indicators.hpp"

#include <numeric>

#include "panelforge/error.hpp"
#include "panelforge/parallel.hpp"
#include "panelforge/textio.hpp"

namespace panelforge::indicators {

std::vector<double> byline_weights(const PublicationRecord& pub, FractionalScheme scheme) {
  const std::size_t n = pub.byline.size();
  if (n == 0) throw ArgumentError("publication " + pub.publication_id + " has an empty byline");
  std::vector<double> w(n, 0.0);
  if (scheme == FractionalScheme::uniform) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(n));
    return w;
  }

  const auto& first = pub.byline.front().university_id;
  const auto& last = pub.byline.back().university_id;
  const bool same_university = first && last && *first == *last;
  if (same_university) {
    w[0] += 0.4;
    w[n - 1] += 0.4;
    if (n > 2) {
      for (std::size_t i = 1; i + 1 < n; ++i) w[i] += 0.2 / static_cast<double>(n - 2);
    }
  } else {
    w[0] += 0.3;
    w[n - 1] += 0.3;
    if (n >= 2) {
      w[1] += 0.15;
      w[n - 2] += 0.15;
    }
    if (n > 4) {
      for (std::size_t i = 2; i + 2 < n; ++i) w[i] += 0.1 / static_cast<double>(n - 4);
    }
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= total;
  return w;
}

double fractional_contribution(const PublicationRecord& pub, std::string_view focal, FractionalScheme scheme) {
  const auto pos = pub.find_author(focal);
  if (!pos) {
    throw ArgumentError("researcher '" + std::string(focal) + "' is not in the byline of " + pub.publication_id);
  }
  return byline_weights(pub, scheme)[*pos];
}

CitationBaseline CitationBaseline::build(std::span<const PublicationRecord> pubs) {
  if (pubs.empty()) throw ArgumentError("citation baseline needs at least one publication");
  CitationBaseline b;
  for (const auto& p : pubs) {
    // Every category cell exists even when uncited, so lookups can tell an
    // empty cell from an unknown one.
    for (const auto& cat : p.subject_categories) {
      auto& cell = b.cells_[{p.year, cat}];
      if (p.citation_count >= 1) {
        cell.citation_sum += static_cast<double>(p.citation_count);
        ++cell.cited;
      }
    }
  }
  return b;
}

double CitationBaseline::mean(int year, std::string_view category) const {
  auto it = cells_.find(std::pair<int, std::string>{year, std::string(category)});
  if (it == cells_.end() || it->second.cited == 0) {
    throw NumericalError("citation baseline undefined for (" + std::to_string(year) + ", " + std::string(category) +
                         "): no cited publications");
  }
  return it->second.citation_sum / static_cast<double>(it->second.cited);
}

std::size_t CitationBaseline::cited_count(int year, std::string_view category) const {
  auto it = cells_.find(std::pair<int, std::string>{year, std::string(category)});
  return it == cells_.end() ? 0 : it->second.cited;
}

double CitationBaseline::reference(const PublicationRecord& pub) const {
  double sum = 0;
  for (const auto& cat : pub.subject_categories) sum += mean(pub.year, cat);
  return sum / static_cast<double>(pub.subject_categories.size());
}

double fss(std::string_view focal, const WindowSpec& window, std::span<const PublicationRecord> pubs,
           const CitationBaseline& baseline, FractionalScheme scheme, double t_years) {
  if (!(t_years > 0)) throw ArgumentError("t_years must be positive");
  double sum = 0;
  for (const auto& p : pubs) {
    if (!window.contains(p.year) || !p.find_author(focal)) continue;
    if (p.citation_count == 0) continue;  // contributes zero, no baseline needed
    sum += static_cast<double>(p.citation_count) / baseline.reference(p) * fractional_contribution(p, focal, scheme);
  }
  return sum / t_years;
}

std::map<std::string, double> fss_scaled(const std::map<std::string, double>& values,
                                         const std::map<std::string, std::string>& sds_of) {
  std::map<std::string, std::pair<double, std::size_t>> groups;
  auto sds = [&](const std::string& id) -> const std::string& {
    auto it = sds_of.find(id);
    if (it == sds_of.end()) throw ArgumentError("no SDS for researcher '" + id + "'");
    return it->second;
  };
  for (const auto& [id, v] : values) {
    auto& g = groups[sds(id)];
    g.first += v;
    ++g.second;
  }
  std::map<std::string, double> means;
  for (const auto& [code, g] : groups) {
    const double m = g.first / static_cast<double>(g.second);
    if (!(m > 0)) throw NumericalError("SDS group '" + code + "' has zero mean FSS; cannot rescale");
    means[code] = m;
  }
  std::map<std::string, double> out;
  for (const auto& [id, v] : values) out[id] = v / means.at(sds(id));
  return out;
}

Propensities propensities(std::string_view focal, const WindowSpec& window, std::span<const PublicationRecord> pubs,
                          const Roster& roster, const corpus::ClassifyOptions& options) {
  Propensities out;
  std::size_t cp = 0, cip = 0, cedp = 0, cefp = 0;
  for (const auto& p : pubs) {
    if (!window.contains(p.year) || !p.find_author(focal)) continue;
    ++out.n_pubs;
    const auto prof = corpus::classify_collaboration(p, focal, roster, options);
    cp += prof.is_coauthored;
    cip += prof.intra_university;
    cedp += prof.extramural_domestic;
    cefp += prof.extramural_international;
  }
  if (out.n_pubs == 0) {
    throw NumericalError("researcher '" + std::string(focal) + "' has no publications in window " +
                         std::to_string(window.index) + "; propensities undefined");
  }
  const double n = static_cast<double>(out.n_pubs);
  out.c = static_cast<double>(cp) / n;
  out.ci = static_cast<double>(cip) / n;
  out.ced = static_cast<double>(cedp) / n;
  out.cef = static_cast<double>(cefp) / n;
  return out;
}

FractionalScheme scheme_for(const corpus::ResearcherRecord& r, const IndicatorOptions& options) {
  return options.byline_weighted_udas.contains(r.uda) ? FractionalScheme::byline_weighted : FractionalScheme::uniform;
}

std::vector<WindowIndicators> compute_indicators(const Roster& roster, std::span<const PublicationRecord> pubs,
                                                 std::span<const WindowSpec> windows,
                                                 const std::set<std::string>& population,
                                                 const IndicatorOptions& options) {
  corpus::validate_windows(windows);
  const auto baseline = CitationBaseline::build(pubs);
  const std::vector<std::string> ids(population.begin(), population.end());

  // Bucket publications by researcher once; scanning the full corpus per
  // researcher is quadratic.
  std::map<std::string, std::vector<PublicationRecord>, std::less<>> by_author;
  for (const auto& p : pubs) {
    for (const auto& a : p.byline) {
      if (a.researcher_id && population.contains(*a.researcher_id)) by_author[*a.researcher_id].push_back(p);
    }
  }

  std::vector<WindowIndicators> rows(ids.size() * windows.size());
  parallel_for(ids.size(), options.threads, [&](std::size_t i) {
    const auto& id = ids[i];
    const auto& rec = roster.at(id);
    const auto scheme = scheme_for(rec, options);
    static const std::vector<PublicationRecord> none;
    auto it = by_author.find(id);
    const auto& mine = it == by_author.end() ? none : it->second;
    for (std::size_t k = 0; k < windows.size(); ++k) {
      const auto& w = windows[k];
      const double t = options.t_years.value_or(static_cast<double>(w.end_year - w.start_year + 1));
      auto& row = rows[i * windows.size() + k];
      row.researcher_id = id;
      row.window = w.index;
      row.fss = fss(id, w, mine, baseline, scheme, t);
      const auto pr = propensities(id, w, mine, roster, options.classify);
      row.n_pubs = pr.n_pubs;
      row.c = pr.c;
      row.ci = pr.ci;
      row.ced = pr.ced;
      row.cef = pr.cef;
    }
  });

  for (const auto& w : windows) {
    std::map<std::string, double> values;
    std::map<std::string, std::string> sds_of;
    for (const auto& row : rows) {
      if (row.window != w.index) continue;
      values[row.researcher_id] = row.fss;
      sds_of[row.researcher_id] = roster.at(row.researcher_id).sds;
    }
    const auto scaled = fss_scaled(values, sds_of);
    for (auto& row : rows) {
      if (row.window == w.index) row.fss_scaled = scaled.at(row.researcher_id);
    }
  }
  return rows;
}

std::string indicators_csv(std::span<const WindowIndicators> rows) {
  std::string out(kIndicatorHeader);
  out.push_back('\n');
  for (const auto& r : rows) {
    out += csv_field(r.researcher_id) + "," + std::to_string(r.window) + "," + std::to_string(r.n_pubs) + "," +
           format_fixed(r.fss, 6) + "," + format_fixed(r.fss_scaled, 6) + "," + format_fixed(r.c, 6) + "," +
           format_fixed(r.ci, 6) + "," + format_fixed(r.ced, 6) + "," + format_fixed(r.cef, 6) + "\n";
  }
  return out;
}

}  // namespace panelforge::indicators
