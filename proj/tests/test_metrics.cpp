#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "openset/metrics.hpp"
#include "openset/rng.hpp"

using namespace openset;

namespace {

// Pair-concordance oracle for AUROC: fraction of (positive, negative) pairs
// where the positive outscores the negative, half credit for ties.
double auroc_oracle(const std::vector<BinaryScore>& scores) {
  double concordant = 0.0;
  std::size_t pairs = 0;
  for (const auto& p : scores) {
    if (!p.positive) continue;
    for (const auto& n : scores) {
      if (n.positive) continue;
      ++pairs;
      if (p.score > n.score) concordant += 1.0;
      if (p.score == n.score) concordant += 0.5;
    }
  }
  return concordant / static_cast<double>(pairs);
}

// Threshold-stepping oracle for average precision: fresh confusion counts at
// every distinct score, descending.
double aupr_oracle(const std::vector<BinaryScore>& scores) {
  std::vector<double> thresholds;
  for (const auto& s : scores) thresholds.push_back(s.score);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<double>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  std::size_t total_pos = 0;
  for (const auto& s : scores) total_pos += s.positive ? 1 : 0;

  double ap = 0.0;
  std::size_t tp_prev = 0;
  for (double t : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (const auto& s : scores) {
      if (s.score >= t) (s.positive ? tp : fp)++;
    }
    if (tp > tp_prev) {
      const double precision =
          static_cast<double>(tp) / static_cast<double>(tp + fp);
      ap += precision * static_cast<double>(tp - tp_prev) /
            static_cast<double>(total_pos);
    }
    tp_prev = tp;
  }
  return ap;
}

std::vector<BinaryScore> random_scores(std::mt19937_64& rng, std::size_t n,
                                       bool coarse) {
  std::vector<BinaryScore> out;
  bool any_pos = false, any_neg = false;
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = uniform_below(rng, 2) == 0;
    const double score =
        coarse ? uniform_below(rng, 5) / 4.0 : uniform_in(rng, 0.0, 1.0);
    out.push_back({score, pos});
    (pos ? any_pos : any_neg) = true;
  }
  if (!any_pos) out[0].positive = true;
  if (!any_neg) out.back().positive = false;
  return out;
}

}  // namespace

TEST_CASE("auroc basics") {
  SECTION("perfect separation") {
    const std::vector<BinaryScore> s{{0.9, true}, {0.8, true}, {0.3, false}};
    CHECK(auroc(s) == 1.0);
  }
  SECTION("derived 0.75 case") {
    const std::vector<BinaryScore> s{
        {0.8, true}, {0.4, true}, {0.6, false}, {0.2, false}};
    CHECK(auroc(s) == 0.75);
  }
  SECTION("all ties give one half") {
    const std::vector<BinaryScore> s{{0.5, true}, {0.5, false}, {0.5, true}};
    CHECK(auroc(s) == 0.5);
  }
  SECTION("single-class input rejected") {
    CHECK_THROWS_AS(auroc(std::vector<BinaryScore>{{0.5, true}}), ConfigError);
  }
}

TEST_CASE("auroc equals the concordance oracle") {
  std::mt19937_64 rng(404);
  for (int trial = 0; trial < 300; ++trial) {
    const auto scores = random_scores(rng, 2 + uniform_below(rng, 7), trial % 2 == 0);
    CHECK(auroc(scores) == auroc_oracle(scores));
  }
}

TEST_CASE("auroc invariances") {
  std::mt19937_64 rng(808);
  for (int trial = 0; trial < 100; ++trial) {
    const auto scores = random_scores(rng, 3 + uniform_below(rng, 30), false);
    const double base = auroc(scores);

    auto exp_scores = scores;
    for (auto& s : exp_scores) s.score = std::exp(s.score);
    CHECK_THAT(auroc(exp_scores), Catch::Matchers::WithinAbs(base, 1e-12));

    auto affine = scores;
    for (auto& s : affine) s.score = 3.5 * s.score + 11.0;
    CHECK_THAT(auroc(affine), Catch::Matchers::WithinAbs(base, 1e-12));

    // continuous scores: no ties, so negation complements
    auto negated = scores;
    for (auto& s : negated) s.score = -s.score;
    CHECK_THAT(auroc(negated) + base, Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("aupr basics") {
  SECTION("perfect separation") {
    const std::vector<BinaryScore> s{{0.9, true}, {0.8, true}, {0.3, false}};
    CHECK(aupr(s) == 1.0);
  }
  SECTION("derived 0.8333 case") {
    const std::vector<BinaryScore> s{
        {0.8, true}, {0.4, true}, {0.6, false}, {0.2, false}};
    CHECK_THAT(aupr(s), Catch::Matchers::WithinAbs(0.5 + 1.0 / 3.0, 1e-15));
  }
  SECTION("no positives rejected") {
    CHECK_THROWS_AS(aupr(std::vector<BinaryScore>{{0.5, false}}), ConfigError);
  }
}

TEST_CASE("aupr equals the threshold-stepping oracle on small instances") {
  std::mt19937_64 rng(606);
  for (int trial = 0; trial < 300; ++trial) {
    const auto scores = random_scores(rng, 2 + uniform_below(rng, 7), trial % 2 == 0);
    CHECK(aupr(scores) == aupr_oracle(scores));
  }
}

TEST_CASE("aupr of random scores approaches the positive fraction") {
  std::mt19937_64 rng(9090);
  std::vector<BinaryScore> scores;
  std::size_t positives = 0;
  for (int i = 0; i < 1000; ++i) {
    const bool pos = uniform_below(rng, 4) == 0;  // p = 0.25
    positives += pos ? 1 : 0;
    scores.push_back({uniform_in(rng, 0.0, 1.0), pos});
  }
  const double p = static_cast<double>(positives) / 1000.0;
  CHECK_THAT(aupr(scores), Catch::Matchers::WithinAbs(p, 0.1));
}

TEST_CASE("f1 at a threshold") {
  const std::vector<BinaryScore> s{
      {0.8, true}, {0.4, true}, {0.6, false}, {0.2, false}};

  SECTION("derived 0.8 case") {
    CHECK_THAT(f1_at_threshold(s, 0.3), Catch::Matchers::WithinAbs(0.8, 1e-15));
  }
  SECTION("gap threshold on separated scores") {
    const std::vector<BinaryScore> sep{{0.9, true}, {0.8, true}, {0.3, false}};
    CHECK(f1_at_threshold(sep, 0.5) == 1.0);
  }
  SECTION("predict-all-novel on a half-novel set") {
    CHECK_THAT(f1_at_threshold(s, -1.0),
               Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-15));
  }
  SECTION("zero when nothing is predicted novel") {
    CHECK(f1_at_threshold(s, 2.0) == 0.0);
  }
}

TEST_CASE("open-set accuracy") {
  SECTION("all known, all correct") {
    const std::vector<OpenSetOutcome> o{{1, 1, false}, {2, 2, false}};
    CHECK(open_set_accuracy(o) == 1.0);
  }
  SECTION("everything flagged novel on an all-novel set") {
    const std::vector<OpenSetOutcome> o{{std::nullopt, 7, true},
                                        {std::nullopt, 9, true}};
    CHECK(open_set_accuracy(o) == 1.0);
  }
  SECTION("derived 0.75 mixed case") {
    const std::vector<OpenSetOutcome> o{{1, 1, false},
                                        {2, 2, false},
                                        {std::nullopt, 8, true},
                                        {3, 9, true}};
    CHECK(open_set_accuracy(o) == 0.75);
  }
  SECTION("a known example flagged novel is wrong") {
    const std::vector<OpenSetOutcome> o{{std::nullopt, 1, false}};
    CHECK(open_set_accuracy(o) == 0.0);
  }
}

TEST_CASE("closed accuracy") {
  SECTION("counting") {
    const std::vector<LabelPrediction> p{{1, 1}, {2, 2}, {3, 3}, {4, 9}};
    const auto r = closed_accuracy(p);
    CHECK(r.value == 0.75);
    CHECK_FALSE(r.degenerate);
  }
  SECTION("empty subset reports zero with the degenerate flag") {
    const auto r = closed_accuracy(std::vector<LabelPrediction>{});
    CHECK(r.value == 0.0);
    CHECK(r.degenerate);
  }
  SECTION("a true label outside the vocabulary signals a wiring bug") {
    const std::set<int> vocab{1, 2};
    const std::vector<LabelPrediction> p{{1, 3}};
    CHECK_THROWS_AS(closed_accuracy(p, &vocab), InternalError);
  }
}

namespace {

double recall_oracle(const std::vector<Vec>& pts, const std::vector<int>& labels,
                     std::size_t m) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (j != i) d.emplace_back(squared_distance(pts[i], pts[j]), j);
    }
    std::sort(d.begin(), d.end());
    bool hit = false;
    for (std::size_t t = 0; t < m; ++t) {
      if (labels[d[t].second] == labels[i]) hit = true;
    }
    hits += hit ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(pts.size());
}

}  // namespace

TEST_CASE("recall at m") {
  SECTION("coincident same-class pairs recall at m=1") {
    const std::vector<Vec> pts{{0, 0}, {0, 0}, {9, 9}, {9, 9}};
    const std::vector<int> labels{0, 0, 1, 1};
    CHECK(recall_at_m(pts, labels, 1) == 1.0);
  }
  SECTION("all-unique classes never recall") {
    const std::vector<Vec> pts{{0, 0}, {1, 0}, {2, 0}, {3, 0}};
    const std::vector<int> labels{0, 1, 2, 3};
    for (std::size_t m = 1; m <= 3; ++m) CHECK(recall_at_m(pts, labels, m) == 0.0);
  }
  SECTION("five-point instance matches exhaustive enumeration") {
    const std::vector<Vec> pts{{0, 0}, {1, 0}, {5, 0}, {5.5, 0}, {10, 0}};
    const std::vector<int> labels{0, 1, 1, 0, 0};
    for (std::size_t m = 1; m <= 4; ++m) {
      CHECK(recall_at_m(pts, labels, m) == recall_oracle(pts, labels, m));
    }
  }
  SECTION("m out of range") {
    const std::vector<Vec> pts{{0, 0}, {1, 0}};
    const std::vector<int> labels{0, 0};
    CHECK_THROWS_AS(recall_at_m(pts, labels, 2), ConfigError);
  }
}

TEST_CASE("recall at m is non-decreasing in m and matches the oracle") {
  std::mt19937_64 rng(321);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + uniform_below(rng, 15);
    std::vector<Vec> pts;
    std::vector<int> labels;
    for (std::size_t i = 0; i < n; ++i) {
      pts.push_back({uniform_in(rng, 0.0, 10.0), uniform_in(rng, 0.0, 10.0)});
      labels.push_back(static_cast<int>(uniform_below(rng, 3)));
    }
    double prev = 0.0;
    for (std::size_t m = 1; m < n; ++m) {
      const double r = recall_at_m(pts, labels, m);
      CHECK(r >= prev);
      CHECK(r == recall_oracle(pts, labels, m));
      prev = r;
    }
  }
}

TEST_CASE("roc and pr curves end at the full-set operating point") {
  const std::vector<BinaryScore> s{
      {0.8, true}, {0.4, true}, {0.6, false}, {0.2, false}};
  const auto roc = roc_curve(s);
  REQUIRE(roc.size() >= 2);
  CHECK(roc.front().x == 0.0);
  CHECK(roc.front().y == 0.0);
  CHECK(roc.back().x == 1.0);
  CHECK(roc.back().y == 1.0);
  const auto pr = pr_curve(s);
  CHECK(pr.back().x == 1.0);  // recall reaches 1
  CHECK(pr.back().y == 0.5);  // precision at the full set
}
