#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "ddl/dictionary.hpp"
#include "ddl/knn.hpp"
#include "ddl/reference.hpp"
#include "support.hpp"

using namespace ddl;
using namespace ddl::dictionary;

namespace {

// One codebook per label from 1-D positions.
std::vector<CategoryCodebook> codebooks_1d(const std::map<int, std::vector<double>>& by_label) {
  std::vector<CategoryCodebook> out;
  for (const auto& [label, xs] : by_label) {
    CategoryCodebook cb{label, {}};
    for (std::size_t k = 0; k < xs.size(); ++k) cb.codewords.push_back({Vector{xs[k]}, label, 0, 0, 0, k});
    out.push_back(std::move(cb));
  }
  return out;
}

CategoryCodebook ranked_with(std::vector<double> ranks, std::vector<double> xs = {}) {
  CategoryCodebook cb{0, {}};
  for (std::size_t k = 0; k < ranks.size(); ++k)
    cb.codewords.push_back({Vector{xs.empty() ? static_cast<double>(k) : xs[k]}, 0, 0, 0, ranks[k], k});
  return cb;
}

ChainGraph chain_with_edges(const std::vector<double>& edges) {
  ChainGraph g;
  double x = 0.0;
  g.nodes.append_row(Vector{x});
  for (double e : edges) {
    x += e;
    g.nodes.append_row(Vector{x});
  }
  g.edge_weights = edges;
  return g;
}

}  // namespace

TEST_CASE("conditional entropy and tf-idf examples") {
  // Query codeword (label 0) at 0; neighbors at 1..4 carry the labels under test.
  SUBCASE("unanimous neighbors") {
    const auto cbs = codebooks_1d({{0, {0, 1, 2, 3, 4}}, {1, {100}}});
    const CodewordIndex idx(cbs);
    CHECK(conditional_entropy(idx, 0, 4) == 0.0);
    CHECK(!std::signbit(conditional_entropy(idx, 0, 4)));
    CHECK(tfidf_score(idx, 0, 4) == 1.0);
  }
  SUBCASE("uniform over four classes") {
    const auto cbs = codebooks_1d({{0, {0, 1}}, {1, {2}}, {2, {3}}, {3, {4}}});
    const CodewordIndex idx(cbs);
    CHECK(conditional_entropy(idx, 0, 4) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(tfidf_score(idx, 0, 4) == 0.25);
  }
  SUBCASE("labels a a b c") {
    const auto cbs = codebooks_1d({{0, {0, 1, 2}}, {1, {3}}, {2, {4}}});
    const CodewordIndex idx(cbs);
    CHECK(conditional_entropy(idx, 0, 4) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(tfidf_score(idx, 0, 4) == 0.5);
  }
  SUBCASE("no shared label") {
    const auto cbs = codebooks_1d({{0, {0}}, {1, {1, 2}}, {2, {3, 4}}});
    CHECK(tfidf_score(CodewordIndex(cbs), 0, 4) == 0.0);
  }
  SUBCASE("three of four share the label") {
    const auto cbs = codebooks_1d({{0, {0, 1, 2, 4}}, {1, {3}}});
    CHECK(tfidf_score(CodewordIndex(cbs), 0, 4) == 0.75);
  }
  SUBCASE("T must leave room for self-exclusion") {
    const auto cbs = codebooks_1d({{0, {0, 1}}, {1, {2}}});
    const CodewordIndex idx(cbs);
    CHECK_THROWS_AS(conditional_entropy(idx, 0, 3), ParameterError);
    CHECK_THROWS_AS(tfidf_score(idx, 0, 0), ParameterError);
  }
}

TEST_CASE("rank_score examples") {
  CHECK(rank_score(0.0, 1.0, 0.5, 0.1) == doctest::Approx(5.5));
  CHECK(rank_score(1.3, 0.37, 0.0, 0.1) == 0.37);
  CHECK(rank_score(0.5, 0.4, 0.5, 0.1) > rank_score(0.9, 0.4, 0.5, 0.1));
  CHECK_THROWS_AS(rank_score(0.5, 0.4, 0.5, 0.0), ParameterError);
}

TEST_CASE("rank_codebook examples") {
  SUBCASE("single codeword is scored") {
    const auto cbs = codebooks_1d({{0, {0}}, {1, {1, 2}}});
    RankingParams p;
    p.neighbors = 2;
    const auto r = rank_codebook(cbs, 0, p);
    REQUIRE(r.size() == 1);
    CHECK(r.codewords[0].tfidf == 0.0);
    CHECK(r.codewords[0].entropy == 0.0);
    CHECK(r.codewords[0].rank == doctest::Approx(5.0));
  }
  SUBCASE("codeword among its own class ranks first") {
    // Class-0 codewords 0..2 form a pure cluster; codeword 3 sits among class 1.
    const auto cbs = codebooks_1d({{0, {0, 0.1, 0.2, 10}}, {1, {10.1, 10.2, 20, 20.1}}});
    RankingParams p;
    p.neighbors = 3;
    const auto r = rank_codebook(cbs, 0, p);
    CHECK(r.codewords[0].source_index == 0);
    CHECK(r.codewords[0].tfidf == 1.0);
    CHECK(r.codewords.back().source_index == 3);
    CHECK(r.codewords.back().tfidf == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("output is a permutation, descending, ties by source index") {
    Rng rng(3);
    std::map<int, std::vector<double>> by_label;
    for (int l = 0; l < 3; ++l)
      for (int k = 0; k < 20; ++k) by_label[l].push_back(static_cast<double>(rng.below(10)));
    const auto cbs = codebooks_1d(by_label);
    const auto r = rank_codebook(cbs, 1, {});
    REQUIRE(r.size() == 20);
    std::vector<std::size_t> seen;
    for (std::size_t k = 0; k < r.size(); ++k) {
      seen.push_back(r.codewords[k].source_index);
      if (k > 0) {
        const auto& a = r.codewords[k - 1];
        const auto& b = r.codewords[k];
        CHECK((a.rank > b.rank || (a.rank == b.rank && a.source_index < b.source_index)));
      }
    }
    std::sort(seen.begin(), seen.end());
    for (std::size_t k = 0; k < seen.size(); ++k) CHECK(seen[k] == k);
  }
}

TEST_CASE("scores agree with a full-sort oracle") {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const int L = 2 + static_cast<int>(rng.below(4));
    const std::size_t d = 1 + rng.below(16);
    std::vector<CategoryCodebook> cbs;
    for (int l = 0; l < L; ++l) {
      CategoryCodebook cb{l, {}};
      const std::size_t n = 1 + rng.below(30);
      for (std::size_t k = 0; k < n; ++k) {
        Vector v(d);
        for (double& x : v) x = static_cast<double>(rng.below(4));
        cb.codewords.push_back({v, l, 0, 0, 0, k});
      }
      cbs.push_back(std::move(cb));
    }
    const CodewordIndex idx(cbs);
    if (idx.size() < 3) continue;
    const std::size_t t = 1 + rng.below(std::min<std::size_t>(idx.size() - 1, 15));
    const auto fast = score_all(idx, t);
    const auto slow = reference::score_all(idx, t);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      CHECK(std::abs(fast[i].entropy - slow[i].entropy) <= 1e-12);
      CHECK(std::abs(fast[i].tfidf - slow[i].tfidf) <= 1e-12);
    }
  }
}

TEST_CASE("ranking is invariant under monotone distance rescaling") {
  Rng rng(78);
  std::vector<CategoryCodebook> cbs;
  for (int l = 0; l < 3; ++l) {
    CategoryCodebook cb{l, {}};
    for (std::size_t k = 0; k < 15; ++k) cb.codewords.push_back({Vector{rng.normal(l, 1.0), rng.normal(0, 1.0)}, l, 0, 0, 0, k});
    cbs.push_back(cb);
  }
  auto scaled = cbs;
  for (auto& cb : scaled)
    for (auto& c : cb.codewords)
      for (double& v : c.vector) v = 7.0 * v + 2.0;
  const auto a = rank_codebooks(cbs, {});
  const auto b = rank_codebooks(scaled, {});
  for (std::size_t l = 0; l < a.size(); ++l)
    for (std::size_t k = 0; k < a[l].size(); ++k) CHECK(a[l].codewords[k].source_index == b[l].codewords[k].source_index);
}

TEST_CASE("chain graph follows the ranked order") {
  const auto cb = ranked_with({3, 2, 1}, {0, 4, 1});
  const auto g = build_chain(cb);
  CHECK(g.nodes.rows() == 3);
  CHECK(g.edge_weights == std::vector<double>{4, 3});
}

TEST_CASE("dominant set bipartition examples") {
  SUBCASE("tight pair, gap, tight pair") {
    const auto bp = dominant_set_bipartition(chain_with_edges({0.1, 9.0, 0.1}));
    auto a = bp.first, b = bp.second;
    if (a.front() != 0) std::swap(a, b);
    CHECK(a == std::vector<std::size_t>{0, 1});
    CHECK(b == std::vector<std::size_t>{2, 3});
  }
  SUBCASE("two nodes") {
    const auto bp = dominant_set_bipartition(chain_with_edges({2.0}));
    CHECK(bp.first.size() == 1);
    CHECK(bp.second.size() == 1);
    CHECK(bp.first[0] + bp.second[0] == 1);
  }
  SUBCASE("fewer than two nodes") {
    CHECK_THROWS_AS(dominant_set_bipartition(chain_with_edges({})), ParameterError);
  }
  SUBCASE("a single tight pair is the dominant set") {
    const auto bp = dominant_set_bipartition(chain_with_edges({5.0, 5.0, 0.2, 5.0, 5.0}));
    CHECK(!bp.used_fallback);
    CHECK(bp.first == std::vector<std::size_t>{2, 3});
    CHECK(bp.second == std::vector<std::size_t>{0, 1, 4, 5});
  }
  SUBCASE("deterministic") {
    const auto g = chain_with_edges({0.3, 1.2, 0.8, 0.1, 2.0, 0.5});
    const auto a = dominant_set_bipartition(g);
    const auto b = dominant_set_bipartition(g);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
  }
}

TEST_CASE("chain affinity has zero diagonal and only chain entries") {
  const auto g = chain_with_edges({1.0, 2.0});
  const auto a = chain_affinity(g, 1.0, false);
  CHECK(a(0, 0) == 0.0);
  CHECK(a(0, 1) == doctest::Approx(std::exp(-1.0)));
  CHECK(a(1, 2) == doctest::Approx(std::exp(-2.0)));
  CHECK(a(0, 2) == 0.0);
  CHECK(chain_affinity(g, 1.0, true)(0, 2) == doctest::Approx(std::exp(-3.0)));
}

TEST_CASE("select_codewords examples") {
  const auto cb = ranked_with({8, 7, 6, 5, 4, 3});
  SUBCASE("top half over bottom half") {
    const auto s = select_codewords(cb, {{3, 4, 5}, {0, 1, 2}, false});
    REQUIRE(s.size() == 3);
    CHECK(s.codewords[0].rank == 8);
    CHECK(s.codewords[2].rank == 6);
  }
  SUBCASE("single top node beats a lower mean") {
    const auto s = select_codewords(ranked_with({10, 1, 1, 1}), {{0}, {1, 2, 3}, false});
    REQUIRE(s.size() == 1);
    CHECK(s.codewords[0].rank == 10);
  }
  SUBCASE("the side with the higher mean wins regardless of position") {
    const auto s = select_codewords(ranked_with({5, 4.9, 4.9, 1}), {{3}, {0, 1, 2}, false});
    CHECK(s.size() == 3);
  }
  SUBCASE("equal means go to the side holding the top node") {
    const auto s = select_codewords(ranked_with({2, 2, 2, 2}), {{2, 3}, {0, 1}, false});
    REQUIRE(s.size() == 2);
    CHECK(s.codewords[0].source_index == 0);
  }
  SUBCASE("selection is a subset of the input") {
    const auto s = select_adaptive(cb, {});
    for (const auto& c : s.codewords)
      CHECK(std::find(cb.codewords.begin(), cb.codewords.end(), c) != cb.codewords.end());
  }
}

TEST_CASE("select_top and single-codeword adaptive selection") {
  const auto cb = ranked_with({4, 3, 2});
  CHECK(select_top(cb, 2).size() == 2);
  CHECK(select_top(cb, 9).size() == 3);
  CHECK(select_adaptive(ranked_with({1}), {}).size() == 1);
}

TEST_CASE("global dictionary assembly") {
  std::vector<CategoryCodebook> sel{ranked_with({1, 1, 1}), ranked_with({1, 1, 1, 1, 1})};
  sel[1].label = 1;
  for (auto& c : sel[1].codewords) c.label = 1;
  const auto d = build_global_dictionary(sel, 2);
  CHECK(d.size() == 8);
  CHECK(d.per_class_counts == std::vector<std::size_t>{3, 5});

  std::vector<CategoryCodebook> swapped{sel[1], sel[0]};
  CHECK(build_global_dictionary(swapped, 2) == d);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(d.labels[i] == (i < 3 ? 0 : 1));

  CHECK_THROWS_AS(build_global_dictionary(std::span(sel).first(1), 2), ValidationError);
  std::vector<CategoryCodebook> dup{sel[0], sel[0]};
  CHECK_THROWS_AS(build_global_dictionary(dup, 2), ValidationError);
  std::vector<CategoryCodebook> empty{sel[0], CategoryCodebook{1, {}}};
  CHECK_THROWS_AS(build_global_dictionary(empty, 2), ValidationError);
}

TEST_CASE("dictionary save and load") {
  test::TempDir dir("dict");
  std::vector<CategoryCodebook> sel{ranked_with({2.5, 1.25}), ranked_with({0.1})};
  sel[1].label = 1;
  sel[1].codewords[0].label = 1;
  sel[0].codewords[0].entropy = 0.3;
  sel[0].codewords[1].tfidf = 0.7;
  const auto d = build_global_dictionary(sel, 2);
  save_dictionary(d, dir / "d.bin", dir / "d.meta");
  CHECK(load_dictionary(dir / "d.bin", dir / "d.meta", 2) == d);
  CHECK_THROWS_AS(load_dictionary(dir / "d.bin", dir / "d.meta", 1), ValidationError);
}
