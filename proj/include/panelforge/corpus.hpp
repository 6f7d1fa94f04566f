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

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "panelforge/textio.hpp"

namespace panelforge::corpus {

enum class Gender { male, female };

struct RankEntry {
  Date effective_date;
  int rank = 0;  // 1 adjunct, 2 assistant, 3 associate, 4 full
};

struct ResearcherRecord {
  std::string researcher_id;
  Gender gender = Gender::male;
  int birth_year = 0;
  std::string sds;
  std::string uda;
  std::string university_id;
  std::vector<RankEntry> rank_history;  // strictly increasing dates
};

struct AuthorEntry {
  int position = 0;  // 1-based
  std::optional<std::string> researcher_id;
  std::optional<std::string> university_id;
  std::string country;  // empty means the address carried no country
};

struct PublicationRecord {
  std::string publication_id;
  int year = 0;
  std::string doc_type;
  std::vector<std::string> subject_categories;
  long long citation_count = 0;
  std::vector<AuthorEntry> byline;

  // Index into byline of the entry linked to `researcher_id`, if any.
  std::optional<std::size_t> find_author(std::string_view researcher_id) const;
};

struct CollaborationProfile {
  bool is_coauthored = false;
  bool intra_university = false;
  bool extramural_domestic = false;
  bool extramural_international = false;

  bool operator==(const CollaborationProfile&) const = default;
};

struct WindowSpec {
  int index = 0;  // 1..W
  int start_year = 0;
  int end_year = 0;  // inclusive
  Date rank_snapshot_date;

  bool contains(int year) const { return year >= start_year && year <= end_year; }
};

// `count` contiguous windows of `length` years starting at `first_year`.
std::vector<WindowSpec> make_windows(int first_year, int length = 3, int count = 4);
// Disjoint, contiguous, equal length, snapshot = day before start.
void validate_windows(std::span<const WindowSpec> windows);

class Roster {
 public:
  Roster() = default;
  // Throws ValidationError on a duplicate id or a record violating invariants.
  explicit Roster(std::vector<ResearcherRecord> records);

  const ResearcherRecord* find(std::string_view id) const;
  const ResearcherRecord& at(std::string_view id) const;
  const std::vector<ResearcherRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

 private:
  std::vector<ResearcherRecord> records_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

void validate_researcher(const ResearcherRecord& r);

inline constexpr std::string_view kRosterHeader =
    "researcher_id,gender,birth_year,sds,uda,university_id,rank_history";

Roster load_roster(std::istream& in, const std::string& source = "roster");
Roster load_roster_file(const std::string& path);
std::string serialize_roster(const Roster& roster);

struct YearSpan {
  int first = 0;
  int last = 0;
};

// JSON lines. When `span` is given, publications outside it are rejected.
std::vector<PublicationRecord> load_publications(std::istream& in, const std::string& source = "publications",
                                                 std::optional<YearSpan> span = std::nullopt);
std::vector<PublicationRecord> load_publications_file(const std::string& path,
                                                      std::optional<YearSpan> span = std::nullopt);
std::string serialize_publications(std::span<const PublicationRecord> pubs);

void validate_publication(const PublicationRecord& pub);
// Every roster link must resolve and carry the researcher's university_id.
void check_roster_links(std::span<const PublicationRecord> pubs, const Roster& roster);

std::set<std::string> default_excluded_doc_types();

// Doc types are compared case-insensitively.
std::vector<PublicationRecord> filter_document_types(std::span<const PublicationRecord> pubs,
                                                     const std::set<std::string>& excluded);

enum class MissingCountryPolicy { warn_as_domestic, error };

struct ClassifyOptions {
  std::string home_country = "IT";
  // When on, only roster-linked co-authors count as intra-university.
  bool strict_roster_intra = true;
  MissingCountryPolicy missing_country = MissingCountryPolicy::warn_as_domestic;
};

CollaborationProfile classify_collaboration(const PublicationRecord& pub, std::string_view focal, const Roster& roster,
                                            const ClassifyOptions& options = {});

// Researchers of the roster with at least one publication in every window.
std::set<std::string> select_active_population(const Roster& roster, std::span<const PublicationRecord> pubs,
                                               std::span<const WindowSpec> windows);

int rank_at(const ResearcherRecord& r, const Date& date);

}  // namespace panelforge::corpus
