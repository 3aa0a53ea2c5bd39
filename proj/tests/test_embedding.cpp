#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>

#include "openset/embedding.hpp"
#include "openset/rng.hpp"
#include "openset/split.hpp"

using namespace openset;

namespace {

Embedding emb(std::string id, Vec v) { return {std::move(id), std::move(v)}; }

LabeledSet three_member_set() {
  return LabeledSet{{{emb("a", {1, 0}), 0}, {emb("b", {0, 2}), 1},
                    {emb("c", {3, 0}), 2}}};
}

Vec random_vec(std::mt19937_64& rng, std::size_t dim) {
  Vec v(dim);
  for (auto& x : v) x = uniform_in(rng, -50.0, 50.0);
  return v;
}

}  // namespace

TEST_CASE("euclidean distance basics") {
  CHECK(euclidean_distance(emb("a", {0, 0}), emb("b", {3, 4})) == 5.0);
  CHECK(euclidean_distance(emb("a", {1.5, -2}), emb("a", {1.5, -2})) == 0.0);
  CHECK_THAT(euclidean_distance(emb("a", {1, 1, 1}), emb("b", {2, 2, 2})),
             Catch::Matchers::WithinAbs(std::sqrt(3.0), 1e-15));
  CHECK_THROWS_AS(euclidean_distance(emb("a", {1, 2}), emb("b", {1, 2, 3})),
                  DataError);
}

TEST_CASE("distance axioms on random vectors") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t dim = 1 + uniform_below(rng, 8);
    const auto a = emb("a", random_vec(rng, dim));
    const auto b = emb("b", random_vec(rng, dim));
    const auto c = emb("c", random_vec(rng, dim));
    const double dab = euclidean_distance(a, b);
    const double dba = euclidean_distance(b, a);
    const double dac = euclidean_distance(a, c);
    const double dcb = euclidean_distance(c, b);
    CHECK(dab == dba);
    CHECK(dab >= 0.0);
    CHECK(euclidean_distance(a, a) == 0.0);
    CHECK(dab <= dac + dcb + 1e-9 * (1.0 + dab));
  }
}

TEST_CASE("nearest neighbors ordering and ties") {
  const auto set = three_member_set();

  SECTION("query on a member returns it at distance zero") {
    const auto nn = nearest_neighbors(emb("q", {0, 2}), set, 1);
    REQUIRE(nn.size() == 1);
    CHECK(nn[0].index == 1);
    CHECK(nn[0].distance == 0.0);
  }

  SECTION("derived three-point case") {
    // brute force: d to (1,0)=1, (0,2)=2, (3,0)=3
    const auto nn = nearest_neighbors(emb("q", {0, 0}), set, 2);
    REQUIRE(nn.size() == 2);
    CHECK(nn[0].index == 0);
    CHECK(nn[0].distance == 1.0);
    CHECK(nn[1].index == 1);
    CHECK(nn[1].distance == 2.0);
  }

  SECTION("k = set size yields the full sorted set") {
    const auto nn = nearest_neighbors(emb("q", {0, 0}), set, 3);
    REQUIRE(nn.size() == 3);
    CHECK(nn[0].distance <= nn[1].distance);
    CHECK(nn[1].distance <= nn[2].distance);
  }

  SECTION("ties break by ascending member index") {
    LabeledSet tied{{{emb("a", {1, 0}), 0}, {emb("b", {-1, 0}), 1},
                     {emb("c", {0, 1}), 2}}};
    const auto nn = nearest_neighbors(emb("q", {0, 0}), tied, 3);
    CHECK(nn[0].index == 0);
    CHECK(nn[1].index == 1);
    CHECK(nn[2].index == 2);
  }

  SECTION("k out of range") {
    CHECK_THROWS_AS(nearest_neighbors(emb("q", {0, 0}), set, 4), ConfigError);
    CHECK_THROWS_AS(nearest_neighbors(emb("q", {0, 0}), set, 0), ConfigError);
  }
}

TEST_CASE("nearest neighbors prefix property") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t dim = 1 + uniform_below(rng, 5);
    std::vector<LabeledEmbedding> members;
    const std::size_t n = 3 + uniform_below(rng, 12);
    for (std::size_t i = 0; i < n; ++i) {
      members.push_back({emb("m" + std::to_string(i), random_vec(rng, dim)),
                         static_cast<int>(i % 3)});
    }
    const LabeledSet set(std::move(members));
    const auto query = emb("q", random_vec(rng, dim));
    const auto full = nearest_neighbors(query, set, set.size());
    for (std::size_t k = 1; k <= set.size(); ++k) {
      const auto part = nearest_neighbors(query, set, k);
      REQUIRE(part.size() == k);
      for (std::size_t i = 0; i < k; ++i) {
        CHECK(part[i].index == full[i].index);
        CHECK(part[i].distance == full[i].distance);
      }
    }
  }
}

TEST_CASE("labeled set append guards") {
  LabeledSet set;
  set.append({emb("a", {0, 0}), 0});
  CHECK_THROWS_AS(set.append({emb("a", {1, 1}), 1}), DataError);
  CHECK_THROWS_AS(set.append({emb("b", {1, 1, 1}), 1}), DataError);
  CHECK_THROWS_AS(set.append({emb("c", {std::nan(""), 0}), 1}), DataError);
  set.append({emb("d", {1, 1}), 1});
  CHECK(set.size() == 2);
  CHECK(set.classes() == std::set<int>{0, 1});
}

namespace {

std::vector<LabeledEmbedding> grid_dataset(int n_classes, int per_class) {
  std::vector<LabeledEmbedding> data;
  for (int c = 0; c < n_classes; ++c) {
    for (int j = 0; j < per_class; ++j) {
      data.push_back({emb("c" + std::to_string(c) + "_" + std::to_string(j),
                          {static_cast<double>(c), static_cast<double>(j)}),
                      c});
    }
  }
  return data;
}

}  // namespace

TEST_CASE("split_known_novel first-half protocol") {
  SECTION("196 classes, fraction 0.5 -> classes 0..97 known") {
    const auto data = grid_dataset(196, 2);
    SplitOptions opt;
    opt.seed = 3;
    const auto split = split_known_novel(data, opt);
    CHECK(split.known_classes.size() == 98);
    CHECK(*split.known_classes.begin() == 0);
    CHECK(*split.known_classes.rbegin() == 97);
    CHECK(*split.novel_classes.begin() == 98);
    CHECK(split.novel_classes.size() == 98);
  }

  SECTION("two classes split into one known, one novel") {
    const auto data = grid_dataset(2, 4);
    SplitOptions opt;
    const auto split = split_known_novel(data, opt);
    CHECK(split.known_classes == std::set<int>{0});
    CHECK(split.novel_classes == std::set<int>{1});
  }

  SECTION("fewer than 2 classes rejected") {
    const auto data = grid_dataset(1, 4);
    CHECK_THROWS_AS(split_known_novel(data, SplitOptions{}), ConfigError);
  }

  SECTION("explicit list must be a vocabulary subset") {
    const auto data = grid_dataset(3, 2);
    SplitOptions opt;
    opt.assignment = KnownAssignment::explicit_list;
    opt.known_labels = {0, 9};
    CHECK_THROWS_AS(split_known_novel(data, opt), ConfigError);
    opt.known_labels = {1};
    const auto split = split_known_novel(data, opt);
    CHECK(split.known_classes == std::set<int>{1});
    CHECK(split.novel_classes == std::set<int>{0, 2});
  }
}

TEST_CASE("split_known_novel conservation and determinism") {
  const auto data = grid_dataset(6, 10);
  SplitOptions opt;
  opt.seed = 11;
  const auto a = split_known_novel(data, opt);
  const auto b = split_known_novel(data, opt);

  SECTION("identical splits for identical seeds") {
    REQUIRE(a.train.size() == b.train.size());
    for (std::size_t i = 0; i < a.train.size(); ++i) {
      CHECK(a.train[i].embedding.id == b.train[i].embedding.id);
    }
    REQUIRE(a.observed.size() == b.observed.size());
    for (std::size_t i = 0; i < a.observed.size(); ++i) {
      CHECK(a.observed[i].id == b.observed[i].id);
    }
  }

  SECTION("different seed moves members") {
    SplitOptions opt2 = opt;
    opt2.seed = 12;
    const auto c = split_known_novel(data, opt2);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.train.size() && i < c.train.size(); ++i) {
      if (a.train[i].embedding.id != c.train[i].embedding.id) any_diff = true;
    }
    CHECK(any_diff);
  }

  SECTION("no novel label in train, ids conserved") {
    std::size_t novel_in_train = 0;
    for (const auto& m : a.train.members()) {
      if (a.novel_classes.count(m.label)) ++novel_in_train;
    }
    CHECK(novel_in_train == 0);

    std::set<std::string> ids;
    for (const auto& m : a.train.members()) ids.insert(m.embedding.id);
    for (const auto& e : a.observed.members()) ids.insert(e.id);
    for (const auto& e : a.test.members()) ids.insert(e.id);
    CHECK(ids.size() == data.size());
  }

  SECTION("observed and test see both sides") {
    const auto has_both = [&a](const UnlabeledPool& pool) {
      bool known = false, novel = false;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        (is_novel_truth(pool, i, a.known_classes) ? novel : known) = true;
      }
      return known && novel;
    };
    CHECK(has_both(a.observed));
    CHECK(has_both(a.test));
  }
}
