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

#include <sstream>

#include <doctest.h>

#include "panelforge/corpus.hpp"
#include "panelforge/error.hpp"
#include "support.hpp"

using namespace panelforge;
using namespace panelforge::corpus;

namespace {

ResearcherRecord researcher(const std::string& id, const std::string& uni) {
  ResearcherRecord r;
  r.researcher_id = id;
  r.birth_year = 1960;
  r.sds = "FIS/01";
  r.uda = "FIS";
  r.university_id = uni;
  r.rank_history = {{parse_date("1995-01-01"), 3}};
  return r;
}

AuthorEntry linked(int pos, const std::string& id, const std::string& uni) {
  return AuthorEntry{pos, id, uni, "IT"};
}

AuthorEntry unlinked(int pos, std::optional<std::string> uni, const std::string& country) {
  return AuthorEntry{pos, std::nullopt, std::move(uni), country};
}

PublicationRecord pub_with(std::vector<AuthorEntry> byline) {
  PublicationRecord p;
  p.publication_id = "P1";
  p.year = 2002;
  p.doc_type = "Article";
  p.subject_categories = {"CAT"};
  p.citation_count = 3;
  p.byline = std::move(byline);
  return p;
}

const Roster& two_uni_roster() {
  static const Roster roster({researcher("A", "U1"), researcher("B", "U1"), researcher("C", "U2")});
  return roster;
}

}  // namespace

TEST_CASE("windows are contiguous with the snapshot the day before each start") {
  const auto w = make_windows(2001, 3, 4);
  REQUIRE(w.size() == 4);
  CHECK(w[0].start_year == 2001);
  CHECK(w[0].end_year == 2003);
  CHECK(w[3].start_year == 2010);
  CHECK(w[3].end_year == 2012);
  CHECK(format_date(w[1].rank_snapshot_date) == "2003-12-31");
  CHECK(w[2].contains(2009));
  CHECK_FALSE(w[2].contains(2010));
  CHECK_NOTHROW(validate_windows(w));
  auto broken = w;
  broken[2].start_year = 2008;
  CHECK_THROWS_AS(validate_windows(broken), ArgumentError);
}

TEST_CASE("roster parses rank histories and rejects invalid records") {
  std::istringstream good(std::string(kRosterHeader) +
                          "\nR1,male,1950,FIS/01,FIS,U1,2000-12-31:3|2006-12-31:4\nR2,female,1970,BIO/10,BIO,U2,1999-01-01:1\n");
  const auto roster = load_roster(good);
  REQUIRE(roster.size() == 2);
  const auto& r1 = roster.at("R1");
  CHECK(r1.gender == Gender::male);
  CHECK(rank_at(r1, parse_date("2003-12-31")) == 3);
  CHECK(rank_at(r1, parse_date("2006-12-31")) == 4);
  CHECK_THROWS_AS(rank_at(r1, parse_date("2000-12-30")), ArgumentError);

  std::istringstream roundtrip(serialize_roster(roster));
  CHECK(load_roster(roundtrip).at("R2").uda == "BIO");

  std::istringstream dup(std::string(kRosterHeader) + "\nR1,male,1950,F,F,U1,2000-12-31:3\nR1,male,1950,F,F,U1,2000-12-31:3\n");
  CHECK_THROWS_AS(load_roster(dup), ValidationError);
  std::istringstream bad_rank(std::string(kRosterHeader) + "\nR1,male,1950,F,F,U1,2000-12-31:5\n");
  CHECK_THROWS_AS(load_roster(bad_rank), ValidationError);
  std::istringstream unordered(std::string(kRosterHeader) + "\nR1,male,1950,F,F,U1,2006-12-31:3|2000-12-31:4\n");
  CHECK_THROWS_AS(load_roster(unordered), ValidationError);
  std::istringstream short_row(std::string(kRosterHeader) + "\nR1,male,1950\n");
  CHECK_THROWS_AS(load_roster(short_row), ParseError);
}

TEST_CASE("publications load from JSON lines and respect the year span") {
  const std::string line =
      R"({"publication_id":"P9","year":2004,"doc_type":"Article","subject_categories":["X","Y"],)"
      R"("citation_count":7,"byline":[{"position":1,"researcher_id":"A","university_id":"U1","country":"IT"},)"
      R"({"position":2,"country":"US"}]})";
  std::istringstream in(line + "\n");
  const auto pubs = load_publications(in);
  REQUIRE(pubs.size() == 1);
  CHECK(pubs[0].subject_categories.size() == 2);
  CHECK(pubs[0].byline[1].country == "US");
  CHECK_FALSE(pubs[0].byline[1].researcher_id.has_value());
  CHECK(pubs[0].find_author("A") == std::optional<std::size_t>(0));

  std::istringstream again(serialize_publications(pubs));
  CHECK(load_publications(again)[0].citation_count == 7);

  std::istringstream out_of_span(line + "\n");
  CHECK_THROWS_AS(load_publications(out_of_span, "pubs", YearSpan{2001, 2003}), ValidationError);
  std::istringstream garbage("{not json\n");
  CHECK_THROWS_AS(load_publications(garbage), ParseError);
}

TEST_CASE("document-type filter is case-insensitive") {
  std::vector<PublicationRecord> pubs(3, pub_with({linked(1, "A", "U1")}));
  pubs[0].doc_type = "Article";
  pubs[1].doc_type = "EDITORIAL MATERIAL";
  pubs[2].doc_type = "Letter Reply";
  const auto kept = filter_document_types(pubs, default_excluded_doc_types());
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].doc_type == "Article");
}

TEST_CASE("roster links must match the researcher's university") {
  const auto good = pub_with({linked(1, "A", "U1"), linked(2, "C", "U2")});
  CHECK_NOTHROW(check_roster_links(std::vector{good}, two_uni_roster()));
  const auto wrong = pub_with({linked(1, "A", "U2")});
  CHECK_THROWS_AS(check_roster_links(std::vector{wrong}, two_uni_roster()), ValidationError);
  const auto unknown = pub_with({linked(1, "Z", "U1")});
  CHECK_THROWS_AS(check_roster_links(std::vector{unknown}, two_uni_roster()), ValidationError);
}

TEST_CASE("collaboration classification") {
  const auto& roster = two_uni_roster();
  SUBCASE("solo publication sets nothing") {
    const auto p = classify_collaboration(pub_with({linked(1, "A", "U1")}), "A", roster);
    CHECK(p == CollaborationProfile{});
  }
  SUBCASE("roster colleague at the same university is intra-university") {
    const auto p = classify_collaboration(pub_with({linked(1, "A", "U1"), linked(2, "B", "U1")}), "A", roster);
    CHECK(p == CollaborationProfile{true, true, false, false});
  }
  SUBCASE("domestic co-author elsewhere is extramural domestic") {
    const auto p = classify_collaboration(pub_with({linked(1, "A", "U1"), linked(2, "C", "U2")}), "A", roster);
    CHECK(p == CollaborationProfile{true, false, true, false});
    const auto q = classify_collaboration(pub_with({linked(1, "A", "U1"), unlinked(2, "U9", "IT")}), "A", roster);
    CHECK(q == CollaborationProfile{true, false, true, false});
  }
  SUBCASE("foreign co-author is international and flags combine") {
    const auto p = classify_collaboration(
        pub_with({unlinked(1, "F1", "DE"), linked(2, "A", "U1"), linked(3, "B", "U1"), linked(4, "C", "U2")}), "A",
        roster);
    CHECK(p == CollaborationProfile{true, true, true, true});
  }
  SUBCASE("unlinked same-university address depends on the roster-only rule") {
    const auto pub = pub_with({linked(1, "A", "U1"), unlinked(2, "U1", "IT")});
    CHECK(classify_collaboration(pub, "A", roster) == CollaborationProfile{true, false, false, false});
    ClassifyOptions relaxed;
    relaxed.strict_roster_intra = false;
    CHECK(classify_collaboration(pub, "A", roster, relaxed) == CollaborationProfile{true, true, false, false});
  }
  SUBCASE("missing country is domestic or an error") {
    const auto pub = pub_with({linked(1, "A", "U1"), unlinked(2, "U7", "")});
    CHECK(classify_collaboration(pub, "A", roster).extramural_domestic);
    ClassifyOptions strict;
    strict.missing_country = MissingCountryPolicy::error;
    CHECK_THROWS_AS(classify_collaboration(pub, "A", roster, strict), ValidationError);
  }
  SUBCASE("focal outside the byline is an argument error") {
    CHECK_THROWS_AS(classify_collaboration(pub_with({linked(1, "B", "U1")}), "A", roster), ArgumentError);
  }
  SUBCASE("home country is configurable") {
    ClassifyOptions fr;
    fr.home_country = "FR";
    const auto pub = pub_with({linked(1, "A", "U1"), unlinked(2, "X", "FR")});
    CHECK(classify_collaboration(pub, "A", roster, fr) == CollaborationProfile{true, false, true, false});
  }
}

TEST_CASE("active population needs a publication in every window") {
  const auto windows = make_windows(2001, 3, 2);
  auto p1 = pub_with({linked(1, "A", "U1"), linked(2, "B", "U1")});
  p1.year = 2001;
  auto p2 = pub_with({linked(1, "A", "U1")});
  p2.year = 2005;
  auto p3 = pub_with({linked(1, "C", "U2")});
  p3.year = 2006;
  const auto active = select_active_population(two_uni_roster(), std::vector{p1, p2, p3}, windows);
  CHECK(active == std::set<std::string>{"A"});
}

TEST_CASE("classification flags imply co-authorship on random corpora") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const auto c = testing::random_corpus(rng, 12, 40);
    for (const auto& p : c.pubs) {
      for (const auto& a : p.byline) {
        if (!a.researcher_id) continue;
        const auto prof = classify_collaboration(p, *a.researcher_id, c.roster);
        if (prof.intra_university || prof.extramural_domestic || prof.extramural_international) {
          CHECK(prof.is_coauthored);
        }
        CHECK(prof.is_coauthored == (p.byline.size() > 1));
      }
    }
  }
}
