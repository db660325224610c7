#include <random>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "lga/anatomy.hpp"
#include "lga/error.hpp"

using namespace lga;
using lga::test::kind_of;
using lga::test::make_video;

TEST_CASE("cluster_segment merges the most similar adjacent pair") {
  auto v = make_video(Matrix{{1, 0}, {1, 0.01}, {0, 1}, {0.01, 1}});
  auto s = cluster_segment(v, 2, 0);
  CHECK(s.clusters == std::vector<IndexList>{{0, 1}, {2, 3}});
  CHECK(s.source_T == 4);
  CHECK(s.overlap == 0);

  auto o = cluster_segment(v, 2, 1);
  CHECK(o.clusters == std::vector<IndexList>{{0, 1, 2}, {1, 2, 3}});
  CHECK(o.total_rows() == 6);
}

TEST_CASE("L equal to T yields singletons") {
  auto v = make_video(Matrix{{1, 0}, {1, 0.01}, {0, 1}, {0.01, 1}});
  auto s = cluster_segment(v, 4, 0);
  CHECK(s.clusters == std::vector<IndexList>{{0}, {1}, {2}, {3}});
}

TEST_CASE("ties resolve to the earliest pair") {
  // All frames identical: every similarity is 1, so merges always take pair 0.
  auto v = make_video(Matrix(5, 3, 1.0));
  auto s = cluster_segment(v, 3, 0);
  CHECK(s.clusters == std::vector<IndexList>{{0, 1, 2}, {3}, {4}});
}

TEST_CASE("invalid phase counts are rejected") {
  auto v = make_video(Matrix{{1, 0}, {0, 1}});
  CHECK(kind_of([&] { cluster_segment(v, 3); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([&] { cluster_segment(v, 0); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([&] { hard_segment(2, 3); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([&] { hard_segment(2, 0); }) == ErrorKind::invalid_argument);
}

TEST_CASE("zero-norm mean reports the frame range") {
  auto v = make_video(Matrix{{1, 0}, {0, 0}, {0, 1}}, "zero");
  try {
    cluster_segment(v, 1);
    FAIL("expected degenerate_feature");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::degenerate_feature);
    CHECK(std::string(e.what()).find("[1, 1]") != std::string::npos);
    CHECK(std::string(e.what()).find("zero") != std::string::npos);
  }
  // With L == T no similarity is computed, so a zero frame is fine.
  CHECK(cluster_segment(v, 3).phase_count() == 3);
}

TEST_CASE("non-finite frames are invalid data") {
  auto v = make_video(Matrix{{1, 0}, {std::nan(""), 1}});
  CHECK(kind_of([&] { cluster_segment(v, 1); }) == ErrorKind::invalid_data);
  auto inf = make_video(Matrix{{1, 0}, {INFINITY, 1}});
  CHECK(kind_of([&] { cluster_segment(inf, 2); }) == ErrorKind::invalid_data);
}

TEST_CASE("mean_cluster_feature") {
  auto v = make_video(Matrix{{1, 2}, {3, 4}, {5, 6}});
  CHECK(mean_cluster_feature(v, {0, 1}) == std::vector<double>{2, 3});
  CHECK(mean_cluster_feature(v, {2}) == std::vector<double>{5, 6});
  CHECK(mean_cluster_feature(v, {0, 1, 2}) == std::vector<double>{3, 4});
  CHECK(kind_of([&] { mean_cluster_feature(v, {}); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([&] { mean_cluster_feature(v, {3}); }) == ErrorKind::invalid_argument);
}

TEST_CASE("cosine_similarity") {
  CHECK(cosine_similarity({1, 0}, {0, 1}) == doctest::Approx(0.0));
  CHECK(cosine_similarity({1, 1}, {2, 2}) == doctest::Approx(1.0));
  CHECK(cosine_similarity({1, 0}, {-3, 0}) == doctest::Approx(-1.0));
  CHECK(kind_of([] { cosine_similarity({0, 0}, {1, 0}); }) == ErrorKind::degenerate_feature);
}

TEST_CASE("hard_segment splits evenly with the remainder up front") {
  auto s = hard_segment(8, 3, 0);
  CHECK(s.clusters == std::vector<IndexList>{{0, 1, 2}, {3, 4, 5}, {6, 7}});
  CHECK(hard_segment(6, 3, 0).clusters == std::vector<IndexList>{{0, 1}, {2, 3}, {4, 5}});
  CHECK(hard_segment(4, 2, 1).clusters == std::vector<IndexList>{{0, 1, 2}, {1, 2, 3}});
  CHECK(hard_segment(5, 1, 1).clusters == std::vector<IndexList>{{0, 1, 2, 3, 4}});
  CHECK(hard_segment(8, 3).source_T == 8);
}

TEST_CASE("overlap borrows at most the neighbour's size") {
  std::vector<IndexList> part{{0}, {1, 2, 3}, {4}};
  CHECK(inject_overlap(part, 2) == std::vector<IndexList>{{0, 1, 2}, {0, 1, 2, 3, 4}, {2, 3, 4}});
  CHECK(inject_overlap(part, 0) == part);
  CHECK(inject_overlap(part, 10) == std::vector<IndexList>{{0, 1, 2, 3}, {0, 1, 2, 3, 4}, {1, 2, 3, 4}});
}

TEST_CASE("property: partition, contiguity and order") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t T = 1 + rng() % 16;
    const std::size_t C = 1 + rng() % 5;
    const std::size_t L = 1 + rng() % T;
    auto v = make_video(test::random_matrix(rng, T, C, 0.05, 1.0));
    auto s = cluster_segment(v, L, 0);
    REQUIRE(s.phase_count() == L);
    std::size_t next = 0;
    for (const auto& c : s.clusters) {
      REQUIRE_FALSE(c.empty());
      for (auto idx : c) CHECK(idx == next++);
    }
    CHECK(next == T);
  }
}

TEST_CASE("property: matches the straight-line reference") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t T = 1 + rng() % 12;
    const std::size_t C = 1 + rng() % 4;
    const std::size_t L = 1 + rng() % T;
    const Matrix m = trial % 2 ? test::random_matrix(rng, T, C) : test::random_int_matrix(rng, T, C);
    auto v = make_video(m);
    bool oracle_failed = false;
    oracle::Clusters expected;
    try {
      expected = oracle::greedy_segment(test::to_rows(m), L);
    } catch (const std::domain_error&) {
      oracle_failed = true;
    }
    if (oracle_failed) {
      CHECK(kind_of([&] { cluster_segment(v, L, 0); }) == ErrorKind::degenerate_feature);
    } else {
      CHECK(cluster_segment(v, L, 0).clusters == expected);
    }
  }
}

TEST_CASE("property: each lower L is one adjacent merge away") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t T = 2 + rng() % 12;
    auto v = make_video(test::random_matrix(rng, T, 3, 0.05, 1.0));
    auto prev = cluster_segment(v, T, 0).clusters;
    for (std::size_t L = T - 1; L >= 1; --L) {
      auto cur = cluster_segment(v, L, 0).clusters;
      REQUIRE(cur.size() + 1 == prev.size());
      std::size_t merged = 0;
      while (merged < cur.size() && cur[merged] == prev[merged]) ++merged;
      REQUIRE(merged < cur.size());
      IndexList joined = prev[merged];
      joined.insert(joined.end(), prev[merged + 1].begin(), prev[merged + 1].end());
      CHECK(cur[merged] == joined);
      for (std::size_t j = merged + 1; j < cur.size(); ++j) CHECK(cur[j] == prev[j + 1]);
      prev = cur;
    }
  }
}

TEST_CASE("property: overlap keeps the partition plus bounded borrowing") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t T = 1 + rng() % 14;
    const std::size_t L = 1 + rng() % T;
    const std::size_t o = rng() % 3;
    auto v = make_video(test::random_matrix(rng, T, 3, 0.05, 1.0));
    auto base = cluster_segment(v, L, 0).clusters;
    auto s = cluster_segment(v, L, o);
    REQUIRE(s.phase_count() == L);
    CHECK(s.overlap == o);
    CHECK(s.clusters == inject_overlap(base, o));
    // First phase never borrows on the left, last never on the right.
    CHECK(s.clusters.front().front() == 0);
    CHECK(s.clusters.back().back() == T - 1);
    for (std::size_t i = 0; i < L; ++i) {
      const auto& c = s.clusters[i];
      CHECK(std::is_sorted(c.begin(), c.end()));
      CHECK(std::set<std::size_t>(c.begin(), c.end()).size() == c.size());
      const std::size_t left = i > 0 ? std::min(o, base[i - 1].size()) : 0;
      const std::size_t right = i + 1 < L ? std::min(o, base[i + 1].size()) : 0;
      CHECK(c.size() == base[i].size() + left + right);
    }
    CHECK(cluster_segment(v, L, o) == s);
  }
}

TEST_CASE("property: hard_segment sizes differ by at most one") {
  for (std::size_t T = 1; T <= 30; ++T) {
    for (std::size_t L = 1; L <= T; ++L) {
      auto s = hard_segment(T, L, 0);
      REQUIRE(s.phase_count() == L);
      std::size_t next = 0;
      for (std::size_t i = 0; i < L; ++i) {
        const std::size_t expected = T / L + (i < T % L ? 1 : 0);
        CHECK(s.clusters[i].size() == expected);
        for (auto idx : s.clusters[i]) CHECK(idx == next++);
      }
    }
  }
}
