#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "tape/error.hpp"
#include "tape/pred_features.hpp"
#include "tape/rng.hpp"

using namespace tape;

namespace {

PredFeatureConfig cfg(std::size_t k, std::size_t c, std::size_t d_p, std::uint64_t seed = 42) {
  PredFeatureConfig p;
  p.k = k;
  p.num_classes = c;
  p.d_p = d_p;
  p.seed = seed;
  return p;
}

EnrichmentRecord rec(std::string id, std::vector<std::size_t> ranked) {
  return {std::move(id), std::move(ranked), "", ParseStatus::full};
}

}  // namespace

TEST_CASE("one_hot_concat layout") {
  const std::vector<std::size_t> r0{0};
  CHECK(one_hot_concat(r0, cfg(1, 2, 4)) == std::vector<float>{1, 0, 0});
  const std::vector<std::size_t> r1{1, 2};
  CHECK(one_hot_concat(r1, cfg(2, 2, 4)) == std::vector<float>{0, 1, 0, 0, 0, 1});
  CHECK(cfg(5, 40, 8).one_hot_width() == 205);
  const std::vector<std::size_t> bad{3, 0};
  CHECK_THROWS_AS(one_hot_concat(bad, cfg(2, 2, 4)), ConfigError);
  CHECK_THROWS_AS(one_hot_concat(r0, cfg(2, 2, 4)), ConfigError);
}

TEST_CASE("property: one_hot_concat matches the layout oracle") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t c = 2 + rng.below(10), k = 1 + rng.below(c);
    std::vector<std::size_t> ranked(k);
    for (auto& r : ranked) r = rng.below(c + 1);
    const auto hot = one_hot_concat(ranked, cfg(k, c, 4));
    REQUIRE(hot.size() == k * (c + 1));
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t v = 0; v <= c; ++v) CHECK(hot[j * (c + 1) + v] == (ranked[j] == v ? 1.0f : 0.0f));
  }
}

TEST_CASE("encode_predictions: seeded projection oracle") {
  const auto c = cfg(2, 2, 8, 42);
  const auto p = pred_projection(c);
  REQUIRE(p.rows() == 8);
  REQUIRE(p.cols() == 6);
  const auto m = encode_predictions({rec("a", {0, 1})}, {"a"}, c);
  // ranked [0, 1] selects columns 0 and 3 + 1.
  for (std::size_t r = 0; r < 8; ++r) {
    double explicit_product = 0.0;
    const auto hot = one_hot_concat(std::vector<std::size_t>{0, 1}, c);
    for (std::size_t col = 0; col < 6; ++col) explicit_product += static_cast<double>(p(r, col)) * hot[col];
    CHECK(m(0, r) == doctest::Approx(explicit_product).epsilon(1e-6));
    CHECK(m(0, r) == doctest::Approx(static_cast<double>(p(r, 0)) + p(r, 4)).epsilon(1e-6));
  }
  CHECK(pred_projection(c) == p);
  CHECK_FALSE(pred_projection(cfg(2, 2, 8, 43)) == p);
}

TEST_CASE("encode_predictions: identical lists, missing nodes, identity mode") {
  auto c = cfg(3, 4, 32);
  const auto m = encode_predictions({rec("x", {2, 0}), rec("y", {2, 0}), rec("z", {})}, {"x", "y", "z", "w"}, c);
  CHECK(m.rows() == 4);
  for (std::size_t j = 0; j < 32; ++j) {
    CHECK(m(0, j) == m(1, j));
    CHECK(m(2, j) == m(3, j));
  }

  c.projection = PredProjection::identity;
  c.d_p = c.one_hot_width();
  const auto id = encode_predictions({rec("x", {2, 0})}, {"x"}, c);
  const auto hot = one_hot_concat(std::vector<std::size_t>{2, 0, 4}, c);
  for (std::size_t j = 0; j < hot.size(); ++j) CHECK(id(0, j) == hot[j]);

  c.d_p = 7;
  CHECK_THROWS_AS(encode_predictions({}, {"x"}, c), ConfigError);
  c.projection = PredProjection::learnable;
  CHECK(encode_predictions({rec("x", {2, 0})}, {"x"}, c).cols() == c.one_hot_width());
}

TEST_CASE("identity mode: row squared norm equals the count of selected unit columns") {
  auto c = cfg(3, 5, 18);
  c.projection = PredProjection::identity;
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::size_t> ranked;
    for (std::size_t j = 0; j < rng.below(4); ++j) {
      const auto v = rng.below(5);
      if (std::find(ranked.begin(), ranked.end(), v) == ranked.end()) ranked.push_back(v);
    }
    const auto m = encode_predictions({rec("n", ranked)}, {"n"}, c);
    double n2 = 0;
    for (const float v : m.row(0)) n2 += static_cast<double>(v) * v;
    CHECK(n2 == 3.0);
  }
}

TEST_CASE("gaussian mode: row squared norm is k in expectation") {
  // Entries are N(0, 1/d_P), so each selected column has expected squared
  // norm 1 and distinct columns are uncorrelated. Over many random lists the
  // mean lands near k; the per-list value does not equal k exactly.
  const auto c = cfg(3, 5, 256, 9);
  Rng rng(10);
  double total = 0.0;
  constexpr int kLists = 400;
  for (int t = 0; t < kLists; ++t) {
    std::vector<std::size_t> ranked;
    while (ranked.size() < 3) {
      const auto v = rng.below(5);
      if (std::find(ranked.begin(), ranked.end(), v) == ranked.end()) ranked.push_back(v);
    }
    const auto m = encode_predictions({rec("n", ranked)}, {"n"}, c);
    for (const float v : m.row(0)) total += static_cast<double>(v) * v;
  }
  CHECK(std::abs(total / kLists - 3.0) < 0.3);
}

TEST_CASE("property: no collisions across 1000 distinct ranked lists at d_P = 64") {
  const auto c = cfg(3, 12, 64, 9);
  std::set<std::vector<std::size_t>> lists;
  Rng rng(10);
  while (lists.size() < 1000) {
    std::vector<std::size_t> r;
    const std::size_t len = rng.below(4);
    while (r.size() < len) {
      const auto v = rng.below(12);
      if (std::find(r.begin(), r.end(), v) == r.end()) r.push_back(v);
    }
    lists.insert(r);
  }
  std::vector<EnrichmentRecord> recs;
  std::vector<std::string> ids;
  for (const auto& l : lists) {
    ids.push_back(std::to_string(ids.size()));
    recs.push_back(rec(ids.back(), l));
  }
  const auto m = encode_predictions(recs, ids, c);
  std::set<std::vector<float>> rows;
  for (std::size_t i = 0; i < m.rows(); ++i) rows.emplace(m.row(i).begin(), m.row(i).end());
  CHECK(rows.size() == 1000);
}

TEST_CASE("encode_predictions is bit-deterministic and validates records") {
  const auto c = cfg(2, 3, 16, 5);
  const std::vector<EnrichmentRecord> recs{rec("a", {1}), rec("b", {2, 0})};
  CHECK(encode_predictions(recs, {"a", "b"}, c) == encode_predictions(recs, {"a", "b"}, c));
  CHECK_THROWS_AS(encode_predictions({rec("a", {3})}, {"a"}, c), ConfigError);
  CHECK_THROWS_AS(encode_predictions({rec("a", {0, 1, 2})}, {"a"}, c), ConfigError);
  CHECK_THROWS_AS(encode_predictions({}, {"a"}, cfg(4, 3, 8)), ConfigError);
}
