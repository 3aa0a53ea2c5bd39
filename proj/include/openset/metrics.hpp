#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "openset/embedding.hpp"
#include "openset/error.hpp"

namespace openset {

// One scored example for novelty-detection curves. Novel is the positive
// class throughout.
struct BinaryScore {
  double score = 0.0;
  bool positive = false;
};

namespace detail {

struct ScoreCounts {
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

inline ScoreCounts count_classes(std::span<const BinaryScore> scores) {
  ScoreCounts c;
  for (const auto& s : scores) (s.positive ? c.positives : c.negatives)++;
  return c;
}

// Scores sorted descending; equal scores kept adjacent so they can be
// processed as one block.
inline std::vector<BinaryScore> sorted_desc(std::span<const BinaryScore> scores) {
  std::vector<BinaryScore> v(scores.begin(), scores.end());
  std::stable_sort(v.begin(), v.end(), [](const BinaryScore& a, const BinaryScore& b) {
    return a.score > b.score;
  });
  return v;
}

}  // namespace detail

// Rank-based AUROC: the probability that a uniformly drawn positive outscores
// a uniformly drawn negative, ties counting one half. Computed via the
// Mann-Whitney statistic with average ranks, which equals trapezoidal ROC
// integration.
inline double auroc(std::span<const BinaryScore> scores) {
  const auto counts = detail::count_classes(scores);
  require(counts.positives >= 1 && counts.negatives >= 1,
          "auroc needs at least one positive and one negative");
  std::vector<BinaryScore> v(scores.begin(), scores.end());
  std::sort(v.begin(), v.end(), [](const BinaryScore& a, const BinaryScore& b) {
    return a.score < b.score;
  });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j < v.size() && v[j].score == v[i].score) ++j;
    // average 1-based rank of the tie block [i, j)
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (v[t].positive) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  const double np = static_cast<double>(counts.positives);
  const double nn = static_cast<double>(counts.negatives);
  const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
  return u / (np * nn);
}

// Average precision over the descending-score prefix curve, equal scores
// processed as one block.
inline double aupr(std::span<const BinaryScore> scores) {
  const auto counts = detail::count_classes(scores);
  require(counts.positives >= 1, "aupr needs at least one positive");
  const auto v = detail::sorted_desc(scores);
  const double total_pos = static_cast<double>(counts.positives);
  double ap = 0.0;
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < v.size()) {
    const std::size_t tp_prev = tp;
    std::size_t j = i;
    while (j < v.size() && v[j].score == v[i].score) {
      (v[j].positive ? tp : fp)++;
      ++j;
    }
    if (tp > tp_prev) {
      const double precision =
          static_cast<double>(tp) / static_cast<double>(tp + fp);
      ap += precision * static_cast<double>(tp - tp_prev) / total_pos;
    }
    i = j;
  }
  return ap;
}

// F-measure of the rule "predict positive when score > delta"; zero when
// precision + recall is zero.
inline double f1_at_threshold(std::span<const BinaryScore> scores, double delta) {
  require(!scores.empty(), "empty score list");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& s : scores) {
    const bool predicted = s.score > delta;
    if (predicted && s.positive) ++tp;
    if (predicted && !s.positive) ++fp;
    if (!predicted && s.positive) ++fn;
  }
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
};

// ROC points (fpr, tpr) swept over descending score blocks, starting at (0,0).
inline std::vector<CurvePoint> roc_curve(std::span<const BinaryScore> scores) {
  const auto counts = detail::count_classes(scores);
  require(counts.positives >= 1 && counts.negatives >= 1,
          "roc_curve needs both classes");
  const auto v = detail::sorted_desc(scores);
  std::vector<CurvePoint> pts{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j < v.size() && v[j].score == v[i].score) {
      (v[j].positive ? tp : fp)++;
      ++j;
    }
    pts.push_back({static_cast<double>(fp) / static_cast<double>(counts.negatives),
                   static_cast<double>(tp) / static_cast<double>(counts.positives)});
    i = j;
  }
  return pts;
}

// PR points (recall, precision) per descending score block.
inline std::vector<CurvePoint> pr_curve(std::span<const BinaryScore> scores) {
  const auto counts = detail::count_classes(scores);
  require(counts.positives >= 1, "pr_curve needs at least one positive");
  const auto v = detail::sorted_desc(scores);
  std::vector<CurvePoint> pts;
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j < v.size() && v[j].score == v[i].score) {
      (v[j].positive ? tp : fp)++;
      ++j;
    }
    pts.push_back({static_cast<double>(tp) / static_cast<double>(counts.positives),
                   static_cast<double>(tp) / static_cast<double>(tp + fp)});
    i = j;
  }
  return pts;
}

// Open-set outcome for one example: the predicted label (nullopt = novel
// verdict), the ground-truth label, and whether the example truly is novel.
struct OpenSetOutcome {
  std::optional<int> predicted_label;
  int true_label = 0;
  bool is_novel = false;
};

// Accuracy with all novel classes collapsed into one unknown superclass: a
// novel example counts iff flagged novel, a known example iff labeled with
// its true class.
inline double open_set_accuracy(std::span<const OpenSetOutcome> outcomes) {
  require(!outcomes.empty(), "empty outcome list");
  std::size_t correct = 0;
  for (const auto& o : outcomes) {
    if (o.is_novel) {
      if (!o.predicted_label) ++correct;
    } else {
      if (o.predicted_label && *o.predicted_label == o.true_label) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(outcomes.size());
}

struct LabelPrediction {
  int predicted = 0;
  int true_label = 0;
};

struct AccuracyResult {
  double value = 0.0;
  bool degenerate = false;  // empty evaluation subset
};

// Plain per-label classification accuracy over a subset. An empty subset is
// reported as 0 with the degenerate flag rather than an error so that
// zero-budget baselines plot cleanly. When a vocabulary is supplied, every
// true label must belong to it; a violation signals a pipeline wiring bug.
inline AccuracyResult closed_accuracy(std::span<const LabelPrediction> preds,
                                      const std::set<int>* vocabulary = nullptr) {
  if (preds.empty()) return {0.0, true};
  std::size_t correct = 0;
  for (const auto& p : preds) {
    if (vocabulary && vocabulary->count(p.true_label) == 0) {
      throw InternalError("true label " + std::to_string(p.true_label) +
                          " outside the dataset vocabulary");
    }
    if (p.predicted == p.true_label) ++correct;
  }
  return {static_cast<double>(correct) / static_cast<double>(preds.size()), false};
}

// Fraction of examples with at least one same-label embedding among their m
// nearest neighbors (self excluded; distance ties broken by index).
inline double recall_at_m(std::span<const Vec> points, std::span<const int> labels,
                          std::size_t m) {
  require(points.size() == labels.size(), "points/labels size mismatch");
  require(points.size() >= 2, "recall_at_m needs at least 2 examples");
  require(m >= 1, "m must be positive");
  require(m < points.size(), "m must be smaller than the set size");
  const std::size_t n = points.size();
  std::size_t hits = 0;
  std::vector<std::pair<double, std::size_t>> dists;
  dists.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    dists.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      dists.emplace_back(squared_distance(points[i], points[j]), j);
    }
    std::partial_sort(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(m),
                      dists.end());
    bool hit = false;
    for (std::size_t t = 0; t < m; ++t) {
      if (labels[dists[t].second] == labels[i]) {
        hit = true;
        break;
      }
    }
    if (hit) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

struct MetricsReport {
  double auroc = 0.0;
  double aupr = 0.0;
  double f1 = 0.0;
  double open_set_accuracy = 0.0;
  double novel_accuracy = 0.0;
  double combined_accuracy = 0.0;
  std::map<std::size_t, double> recall_at_m;
};

}  // namespace openset
