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

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "panelforge/corpus.hpp"
#include "panelforge/sem/model.hpp"

namespace panelforge::testing {

inline Eigen::MatrixXd draw_normal(const Eigen::MatrixXd& cov, const Eigen::VectorXd& mean, int n, std::mt19937_64& rng) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const Eigen::MatrixXd l = llt.matrixL();
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd rows(n, cov.rows());
  Eigen::VectorXd e(cov.rows());
  for (int i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < e.size(); ++k) e(k) = z(rng);
    rows.row(i) = (mean + l * e).transpose();
  }
  return rows;
}

// Recursive model over p observed variables: x0 exogenous, each later
// variable regressed on a random subset of earlier ones. Optionally a latent
// factor loading on the last two variables with one shared loading id.
struct RandomModel {
  sem::CovarianceModel model;
  Eigen::VectorXd theta;
};

inline RandomModel random_model(int p, std::mt19937_64& rng, bool with_latent = false) {
  std::uniform_real_distribution<double> coef(-0.6, 0.6);
  std::uniform_real_distribution<double> var(0.5, 2.0);
  std::bernoulli_distribution keep(0.6);
  RandomModel out;
  auto& m = out.model;
  std::vector<std::string> names;
  for (int k = 0; k < p; ++k) {
    names.push_back("v" + std::to_string(k));
    m.add_observed(names.back());
  }
  std::vector<std::pair<std::string, double>> values;
  auto add = [&](const std::string& id, double v) {
    for (const auto& [n, _] : values) {
      if (n == id) return;
    }
    values.emplace_back(id, v);
  };
  for (int k = 0; k < p; ++k) {
    m.variance(names[static_cast<std::size_t>(k)], sem::free("var" + std::to_string(k)));
    add("var" + std::to_string(k), var(rng));
    m.mean(names[static_cast<std::size_t>(k)], sem::free("mean" + std::to_string(k)));
    add("mean" + std::to_string(k), coef(rng) * 3);
    for (int j = 0; j < k; ++j) {
      if (j + 1 == k || keep(rng)) {
        const auto id = "b" + std::to_string(k) + "_" + std::to_string(j);
        m.path(names[static_cast<std::size_t>(j)], names[static_cast<std::size_t>(k)], sem::free(id));
        add(id, coef(rng));
      }
    }
  }
  if (with_latent && p >= 3) {
    m.add_latent("f");
    m.variance("f", sem::free("var_f"));
    add("var_f", var(rng));
    m.path("f", names[static_cast<std::size_t>(p - 1)], sem::fixed(1.0));
    m.path("f", names[static_cast<std::size_t>(p - 2)], sem::fixed(1.0));
  }
  out.theta.resize(static_cast<Eigen::Index>(m.num_parameters()));
  for (std::size_t k = 0; k < m.parameters().size(); ++k) {
    for (const auto& [id, v] : values) {
      if (id == m.parameters()[k].id) out.theta(static_cast<Eigen::Index>(k)) = v;
    }
  }
  return out;
}

// Small random corpus: researchers spread over three universities and two
// fields, publications mixing roster-linked, unlinked domestic and foreign
// co-authors, some without a country.
struct RandomCorpus {
  corpus::Roster roster;
  std::vector<corpus::PublicationRecord> pubs;
};

inline RandomCorpus random_corpus(std::mt19937_64& rng, int researchers, int publications, int first_year = 2001,
                                  int last_year = 2012) {
  std::uniform_int_distribution<int> uni(0, 2);
  std::uniform_int_distribution<int> year(first_year, last_year);
  std::uniform_int_distribution<int> byline_len(1, 8);
  std::uniform_int_distribution<int> kind(0, 4);
  std::uniform_int_distribution<int> researcher(0, researchers - 1);
  std::uniform_int_distribution<int> cites(0, 30);
  std::bernoulli_distribution coin(0.5);
  std::vector<corpus::ResearcherRecord> recs;
  for (int i = 0; i < researchers; ++i) {
    corpus::ResearcherRecord r;
    r.researcher_id = "R" + std::to_string(100 + i);
    r.gender = coin(rng) ? corpus::Gender::male : corpus::Gender::female;
    r.birth_year = 1940 + i % 30;
    r.sds = i % 2 ? "BIO/10" : "FIS/01";
    r.uda = i % 2 ? "BIO" : "FIS";
    r.university_id = "U" + std::to_string(uni(rng));
    r.rank_history = {{parse_date("1990-01-01"), 2}, {parse_date("2005-06-30"), 3}};
    recs.push_back(std::move(r));
  }
  RandomCorpus out;
  for (int k = 0; k < publications; ++k) {
    corpus::PublicationRecord p;
    p.publication_id = "P" + std::to_string(k);
    p.year = year(rng);
    p.doc_type = "Article";
    p.subject_categories = coin(rng) ? std::vector<std::string>{"CAT-A"} : std::vector<std::string>{"CAT-A", "CAT-B"};
    p.citation_count = cites(rng);
    const int len = byline_len(rng);
    std::vector<int> linked;
    for (int pos = 1; pos <= len; ++pos) {
      corpus::AuthorEntry a;
      a.position = pos;
      const int kd = pos == 1 ? 0 : kind(rng);
      if (kd <= 1) {
        int r = researcher(rng);
        while (std::find(linked.begin(), linked.end(), r) != linked.end()) r = (r + 1) % researchers;
        if (static_cast<int>(linked.size()) == researchers) {
          a.university_id = "EXT";
          a.country = "IT";
        } else {
          linked.push_back(r);
          const auto& rec = recs[static_cast<std::size_t>(r)];
          a.researcher_id = rec.researcher_id;
          a.university_id = rec.university_id;
          a.country = "IT";
        }
      } else if (kd == 2) {
        a.university_id = "U" + std::to_string(uni(rng));
        a.country = coin(rng) ? "IT" : "";
      } else if (kd == 3) {
        a.university_id = "FOREIGN";
        a.country = coin(rng) ? "FR" : "US";
      } else {
        a.country = "IT";
      }
      p.byline.push_back(std::move(a));
    }
    out.pubs.push_back(std::move(p));
  }
  out.roster = corpus::Roster(std::move(recs));
  return out;
}

}  // namespace panelforge::testing
