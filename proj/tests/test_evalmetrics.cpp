#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "dssddi/errors.hpp"
#include "dssddi/evalmetrics.hpp"
#include "dssddi/rng.hpp"
#include "test_support.hpp"

using namespace dssddi;
using namespace dssddi::eval;

TEST_CASE("precision and recall on single lists") {
  const std::vector<RankedSuggestion> b{{1, {0, 1}, {0}}};
  CHECK(precision_at_k(b) == 0.5);
  CHECK(recall_at_k(b) == 1.0);
  const std::vector<RankedSuggestion> subset{{1, {0, 1}, {0, 1, 2}}, {2, {3, 4}, {4, 3}}};
  CHECK(precision_at_k(subset) == 1.0);
  const std::vector<RankedSuggestion> disjoint{{1, {0, 1}, {2, 3}}};
  CHECK(recall_at_k(disjoint) == 0.0);
}

TEST_CASE("three-patient batch matches a hand tally") {
  // hits: 2, 0, 1 of 3 suggested each; truth sizes 2, 1, 4
  const std::vector<RankedSuggestion> b{
      {1, {0, 1, 2}, {0, 2}}, {2, {3, 4, 5}, {6}}, {3, {7, 8, 9}, {9, 10, 11, 12}}};
  CHECK(precision_at_k(b) == doctest::Approx(3.0 / 9.0));
  CHECK(recall_at_k(b) == doctest::Approx(3.0 / 7.0));
  // ndcg: p1 hits at 1,3 over ideal 2; p2 0; p3 hit at 3 over ideal 3
  const double p1 = (1 + 1 / std::log2(4.0)) / (1 + 1 / std::log2(3.0));
  const double p3 = (1 / std::log2(4.0)) / (1 + 1 / std::log2(3.0) + 1 / std::log2(4.0));
  CHECK(ndcg_at_k(b) == doctest::Approx((p1 + 0 + p3) / 3));
}

TEST_CASE("ndcg hand cases") {
  const std::vector<RankedSuggestion> first{{1, {5}, {5}}};
  CHECK(ndcg_at_k(first) == 1.0);
  const std::vector<RankedSuggestion> second{{1, {4, 5}, {5}}};
  CHECK(ndcg_at_k(second) == doctest::Approx(0.6309).epsilon(1e-4));
  const std::vector<RankedSuggestion> none{{1, {1, 2}, {3}}};
  CHECK(ndcg_at_k(none) == 0.0);
}

TEST_CASE("empty truth sets are skipped with a warning") {
  const std::vector<RankedSuggestion> b{{1, {0, 1}, {0}}, {2, {0, 1}, {}}};
  std::vector<std::string> w;
  CHECK(recall_at_k(b, &w) == 1.0);
  REQUIRE(w.size() == 1);
  CHECK(w[0].find("patient 2") != std::string::npos);
  CHECK(ndcg_at_k(b) == 1.0);
  CHECK(precision_at_k(b) == 0.25);  // precision counts every list
  const std::vector<RankedSuggestion> only_empty{{2, {0}, {}}};
  CHECK_THROWS_AS(recall_at_k(only_empty), ArgumentError);
}

TEST_CASE("malformed batches") {
  CHECK_THROWS_AS(precision_at_k({}), ArgumentError);
  const std::vector<RankedSuggestion> uneven{{1, {0, 1}, {0}}, {2, {0}, {0}}};
  CHECK_THROWS_AS(precision_at_k(uneven), ArgumentError);
  const std::vector<RankedSuggestion> dup{{1, {0, 0}, {0}}};
  CHECK_THROWS_AS(ndcg_at_k(dup), ArgumentError);
}

TEST_CASE("metric properties on random batches") {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RankedSuggestion> b;
    const std::size_t k = 1 + uniform_index(rng, 6);
    for (long long p = 0; p < 6; ++p) {
      std::vector<DrugId> perm(12);
      for (DrugId d = 0; d < 12; ++d) perm[d] = d;
      shuffle(perm.begin(), perm.end(), rng);
      RankedSuggestion r{p, {perm.begin(), perm.begin() + k}, {}};
      for (DrugId d = 0; d < 12; ++d)
        if (uniform01(rng) < 0.3) r.truth.push_back(d);
      if (r.truth.empty()) r.truth.push_back(perm[11]);
      b.push_back(r);
    }
    const double pr = precision_at_k(b), rc = recall_at_k(b), nd = ndcg_at_k(b);
    for (double m : {pr, rc, nd}) {
      CHECK(m >= 0.0);
      CHECK(m <= 1.0 + 1e-15);
    }
    auto reordered = b;
    std::reverse(reordered.begin(), reordered.end());
    CHECK(precision_at_k(reordered) == pr);
    CHECK(recall_at_k(reordered) == rc);
    CHECK(ndcg_at_k(reordered) == doctest::Approx(nd).epsilon(1e-15));
    // hits first up to the ideal count gives ndcg 1
    auto ideal = b;
    for (auto& r : ideal) {
      std::vector<DrugId> list = r.truth;
      for (DrugId d = 0; d < 12; ++d)
        if (std::find(r.truth.begin(), r.truth.end(), d) == r.truth.end()) list.push_back(d);
      r.suggested.assign(list.begin(), list.begin() + k);
    }
    CHECK(ndcg_at_k(ideal) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("ranking report and csv round-trip") {
  const std::vector<RankedSuggestion> full{{1, {0, 1, 2, 3}, {1}}, {2, {2, 3, 1, 0}, {2, 0}}};
  const std::vector<std::size_t> ks{1, 2, 4};
  const auto rows = ranking_metrics(full, ks);
  CHECK(rows.size() == 9);
  CHECK(find_metric(rows, "recall", 4) == 1.0);
  CHECK(find_metric(rows, "precision", 1) == 0.5);
  CHECK_THROWS_AS(find_metric(rows, "recall", 3), ArgumentError);
  testing::TempDir dir;
  write_metrics_csv(dir.path() / "m.csv", rows);
  const auto back = read_metrics_csv(dir.path() / "m.csv");
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].metric == rows[i].metric);
    CHECK(back[i].k == rows[i].k);
    CHECK(back[i].value == rows[i].value);
  }
}
