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

#include "panelforge/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <istream>
#include <sstream>

#include <json.hpp>

#include "panelforge/error.hpp"
#include "panelforge/log.hpp"

namespace panelforge::corpus {

using nlohmann::ordered_json;

std::optional<std::size_t> PublicationRecord::find_author(std::string_view id) const {
  for (std::size_t i = 0; i < byline.size(); ++i) {
    if (byline[i].researcher_id && *byline[i].researcher_id == id) return i;
  }
  return std::nullopt;
}

std::vector<WindowSpec> make_windows(int first_year, int length, int count) {
  if (length < 1 || count < 1) throw ArgumentError("windows need positive length and count");
  std::vector<WindowSpec> out;
  for (int k = 0; k < count; ++k) {
    WindowSpec w;
    w.index = k + 1;
    w.start_year = first_year + k * length;
    w.end_year = w.start_year + length - 1;
    w.rank_snapshot_date = day_before(Date{std::chrono::year{w.start_year}, std::chrono::January, std::chrono::day{1}});
    out.push_back(w);
  }
  return out;
}

void validate_windows(std::span<const WindowSpec> windows) {
  if (windows.empty()) throw ArgumentError("at least one window is required");
  const int length = windows.front().end_year - windows.front().start_year + 1;
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const auto& w = windows[k];
    if (w.index != static_cast<int>(k) + 1) throw ArgumentError("window indices must be 1..W in order");
    if (w.end_year - w.start_year + 1 != length || length < 1) {
      throw ArgumentError("windows must all have the same positive length");
    }
    if (k > 0 && w.start_year != windows[k - 1].end_year + 1) {
      throw ArgumentError("windows must be contiguous and disjoint");
    }
    const Date start{std::chrono::year{w.start_year}, std::chrono::January, std::chrono::day{1}};
    if (w.rank_snapshot_date != day_before(start)) {
      throw ArgumentError("window " + std::to_string(w.index) + " rank snapshot must be the day before its start");
    }
  }
}

void validate_researcher(const ResearcherRecord& r) {
  if (r.researcher_id.empty()) throw ValidationError("empty researcher_id");
  const int this_year = static_cast<int>(
      std::chrono::year_month_day{std::chrono::floor<std::chrono::days>(std::chrono::system_clock::now())}.year());
  if (r.birth_year < 1900 || r.birth_year > this_year) {
    throw ValidationError("researcher " + r.researcher_id + ": birth_year " + std::to_string(r.birth_year) +
                          " out of range");
  }
  if (r.rank_history.empty()) throw ValidationError("researcher " + r.researcher_id + ": empty rank history");
  for (std::size_t k = 0; k < r.rank_history.size(); ++k) {
    const auto& e = r.rank_history[k];
    if (e.rank < 1 || e.rank > 4) {
      throw ValidationError("researcher " + r.researcher_id + ": rank " + std::to_string(e.rank) + " not in 1..4");
    }
    if (k > 0 && !(r.rank_history[k - 1].effective_date < e.effective_date)) {
      throw ValidationError("researcher " + r.researcher_id + ": rank history dates must be strictly increasing");
    }
  }
}

Roster::Roster(std::vector<ResearcherRecord> records) : records_(std::move(records)) {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    validate_researcher(records_[i]);
    if (!index_.emplace(records_[i].researcher_id, i).second) {
      throw ValidationError("duplicate researcher_id '" + records_[i].researcher_id + "'");
    }
  }
}

const ResearcherRecord* Roster::find(std::string_view id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &records_[it->second];
}

const ResearcherRecord& Roster::at(std::string_view id) const {
  const auto* r = find(id);
  if (!r) throw ArgumentError("researcher '" + std::string(id) + "' not in roster");
  return *r;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::vector<RankEntry> parse_rank_history(std::string_view text) {
  std::vector<RankEntry> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('|', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view item = text.substr(start, end - start);
    auto colon = item.find(':');
    if (colon == std::string_view::npos) throw ArgumentError("rank history item '" + std::string(item) + "' lacks ':'");
    RankEntry e;
    e.effective_date = parse_date(item.substr(0, colon));
    e.rank = static_cast<int>(parse_int(item.substr(colon + 1)));
    out.push_back(e);
    start = end + 1;
  }
  return out;
}

}  // namespace

Roster load_roster(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t row = 0;
  if (!std::getline(in, line)) throw ParseError(source, 1, "missing header");
  ++row;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRosterHeader) throw ParseError(source, row, "unexpected header '" + line + "'");

  std::vector<ResearcherRecord> records;
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      auto f = split_csv_line(line);
      if (f.size() != 7) throw ArgumentError("expected 7 fields, got " + std::to_string(f.size()));
      ResearcherRecord r;
      r.researcher_id = f[0];
      if (f[1] == "male") {
        r.gender = Gender::male;
      } else if (f[1] == "female") {
        r.gender = Gender::female;
      } else {
        throw ArgumentError("gender must be 'male' or 'female', got '" + f[1] + "'");
      }
      r.birth_year = static_cast<int>(parse_int(f[2]));
      r.sds = f[3];
      r.uda = f[4];
      r.university_id = f[5];
      r.rank_history = parse_rank_history(f[6]);
      validate_researcher(r);
      if (auto [it, fresh] = seen.emplace(r.researcher_id, row); !fresh) {
        throw ValidationError("duplicate researcher_id '" + r.researcher_id + "' (first seen on row " +
                              std::to_string(it->second) + ")");
      }
      records.push_back(std::move(r));
    } catch (const ValidationError& e) {
      throw ValidationError(source + ":" + std::to_string(row) + ": " + e.what());
    } catch (const ArgumentError& e) {
      throw ParseError(source, row, e.what());
    }
  }
  return Roster(std::move(records));
}

Roster load_roster_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open roster '" + path + "'");
  return load_roster(in, path);
}

std::string serialize_roster(const Roster& roster) {
  std::string out(kRosterHeader);
  out.push_back('\n');
  for (const auto& r : roster.records()) {
    std::string hist;
    for (const auto& e : r.rank_history) {
      if (!hist.empty()) hist.push_back('|');
      hist += format_date(e.effective_date) + ":" + std::to_string(e.rank);
    }
    out += csv_field(r.researcher_id) + "," + (r.gender == Gender::male ? "male" : "female") + "," +
           std::to_string(r.birth_year) + "," + csv_field(r.sds) + "," + csv_field(r.uda) + "," +
           csv_field(r.university_id) + "," + hist + "\n";
  }
  return out;
}

void validate_publication(const PublicationRecord& pub) {
  const std::string who = "publication " + pub.publication_id;
  if (pub.publication_id.empty()) throw ValidationError("empty publication_id");
  if (pub.byline.empty()) throw ValidationError(who + ": empty byline");
  if (pub.subject_categories.empty()) throw ValidationError(who + ": no subject categories");
  if (pub.citation_count < 0) throw ValidationError(who + ": negative citation_count");
  std::set<std::string> linked;
  for (std::size_t i = 0; i < pub.byline.size(); ++i) {
    if (pub.byline[i].position != static_cast<int>(i) + 1) {
      throw ValidationError(who + ": byline positions must be exactly 1..n in order");
    }
    if (const auto& id = pub.byline[i].researcher_id; id && !linked.insert(*id).second) {
      throw ValidationError(who + ": researcher '" + *id + "' appears twice in the byline");
    }
  }
}

namespace {

PublicationRecord publication_from_json(const ordered_json& j) {
  PublicationRecord p;
  p.publication_id = j.at("publication_id").get<std::string>();
  p.year = j.at("year").get<int>();
  p.doc_type = j.at("doc_type").get<std::string>();
  p.subject_categories = j.at("subject_categories").get<std::vector<std::string>>();
  p.citation_count = j.at("citation_count").get<long long>();
  for (const auto& a : j.at("byline")) {
    AuthorEntry e;
    e.position = a.at("position").get<int>();
    if (a.contains("researcher_id") && !a["researcher_id"].is_null()) {
      e.researcher_id = a["researcher_id"].get<std::string>();
    }
    if (a.contains("university_id") && !a["university_id"].is_null()) {
      e.university_id = a["university_id"].get<std::string>();
    }
    if (a.contains("country") && !a["country"].is_null()) e.country = a["country"].get<std::string>();
    p.byline.push_back(std::move(e));
  }
  return p;
}

ordered_json publication_to_json(const PublicationRecord& p) {
  ordered_json j;
  j["publication_id"] = p.publication_id;
  j["year"] = p.year;
  j["doc_type"] = p.doc_type;
  j["subject_categories"] = p.subject_categories;
  j["citation_count"] = p.citation_count;
  ordered_json byline = ordered_json::array();
  for (const auto& a : p.byline) {
    ordered_json e;
    e["position"] = a.position;
    if (a.researcher_id) e["researcher_id"] = *a.researcher_id;
    if (a.university_id) e["university_id"] = *a.university_id;
    e["country"] = a.country;
    byline.push_back(std::move(e));
  }
  j["byline"] = std::move(byline);
  return j;
}

}  // namespace

std::vector<PublicationRecord> load_publications(std::istream& in, const std::string& source,
                                                 std::optional<YearSpan> span) {
  std::vector<PublicationRecord> pubs;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      auto p = publication_from_json(ordered_json::parse(line));
      validate_publication(p);
      if (span && (p.year < span->first || p.year > span->last)) {
        throw ValidationError("publication " + p.publication_id + ": year " + std::to_string(p.year) +
                              " outside observation span");
      }
      pubs.push_back(std::move(p));
    } catch (const ValidationError& e) {
      throw ValidationError(source + ":" + std::to_string(row) + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, row, e.what());
    }
  }
  return pubs;
}

std::vector<PublicationRecord> load_publications_file(const std::string& path, std::optional<YearSpan> span) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open publications '" + path + "'");
  return load_publications(in, path, span);
}

std::string serialize_publications(std::span<const PublicationRecord> pubs) {
  std::string out;
  for (const auto& p : pubs) {
    out += publication_to_json(p).dump();
    out.push_back('\n');
  }
  return out;
}

void check_roster_links(std::span<const PublicationRecord> pubs, const Roster& roster) {
  for (const auto& p : pubs) {
    for (const auto& a : p.byline) {
      if (!a.researcher_id) continue;
      const auto* r = roster.find(*a.researcher_id);
      if (!r) {
        throw ValidationError("publication " + p.publication_id + ": author '" + *a.researcher_id +
                              "' is not in the roster");
      }
      if (!a.university_id || *a.university_id != r->university_id) {
        throw ValidationError("publication " + p.publication_id + ": author '" + *a.researcher_id +
                              "' must carry university_id '" + r->university_id + "'");
      }
    }
  }
}

std::set<std::string> default_excluded_doc_types() {
  return {"editorial material", "meeting abstract", "letter reply", "correction", "news item"};
}

std::vector<PublicationRecord> filter_document_types(std::span<const PublicationRecord> pubs,
                                                     const std::set<std::string>& excluded) {
  std::set<std::string> norm;
  for (const auto& e : excluded) norm.insert(lower(e));
  std::vector<PublicationRecord> out;
  for (const auto& p : pubs) {
    if (!norm.contains(lower(p.doc_type))) out.push_back(p);
  }
  return out;
}

CollaborationProfile classify_collaboration(const PublicationRecord& pub, std::string_view focal, const Roster& roster,
                                            const ClassifyOptions& options) {
  const auto focal_pos = pub.find_author(focal);
  if (!focal_pos) {
    throw ArgumentError("researcher '" + std::string(focal) + "' is not in the byline of " + pub.publication_id);
  }
  const std::string& home_uni = roster.at(focal).university_id;

  CollaborationProfile prof;
  prof.is_coauthored = pub.byline.size() > 1;
  for (std::size_t i = 0; i < pub.byline.size(); ++i) {
    if (i == *focal_pos) continue;
    const auto& a = pub.byline[i];
    std::string_view country = a.country;
    if (country.empty()) {
      if (options.missing_country == MissingCountryPolicy::error) {
        throw ValidationError("publication " + pub.publication_id + ": author at position " +
                              std::to_string(a.position) + " has no country");
      }
      warn("publication " + pub.publication_id + ": author at position " + std::to_string(a.position) +
           " has no country; treated as domestic");
      country = options.home_country;
    }
    if (country != options.home_country) {
      prof.extramural_international = true;
      continue;
    }
    if (a.researcher_id) {
      const auto* r = roster.find(*a.researcher_id);
      const std::string& uni = r ? r->university_id : a.university_id.value_or("");
      if (uni == home_uni) {
        prof.intra_university = true;
      } else {
        prof.extramural_domestic = true;
      }
    } else if (a.university_id && *a.university_id == home_uni) {
      // Same-university address without a roster link: only counted when the
      // roster-only rule is relaxed.
      if (!options.strict_roster_intra) prof.intra_university = true;
    } else {
      prof.extramural_domestic = true;
    }
  }
  return prof;
}

std::set<std::string> select_active_population(const Roster& roster, std::span<const PublicationRecord> pubs,
                                               std::span<const WindowSpec> windows) {
  if (windows.empty()) throw ArgumentError("at least one window is required");
  std::map<std::string, std::vector<bool>, std::less<>> covered;
  for (const auto& p : pubs) {
    for (const auto& w : windows) {
      if (!w.contains(p.year)) continue;
      for (const auto& a : p.byline) {
        if (!a.researcher_id || !roster.find(*a.researcher_id)) continue;
        auto& flags = covered[*a.researcher_id];
        flags.resize(windows.size(), false);
        flags[static_cast<std::size_t>(&w - windows.data())] = true;
      }
    }
  }
  std::set<std::string> active;
  for (const auto& [id, flags] : covered) {
    if (std::all_of(flags.begin(), flags.end(), [](bool b) { return b; })) active.insert(id);
  }
  return active;
}

int rank_at(const ResearcherRecord& r, const Date& date) {
  const RankEntry* hit = nullptr;
  for (const auto& e : r.rank_history) {
    if (e.effective_date <= date) hit = &e;
  }
  if (!hit) {
    throw ArgumentError("researcher " + r.researcher_id + ": no rank on " + format_date(date) +
                        " (history starts later)");
  }
  return hit->rank;
}

}  // namespace panelforge::corpus
