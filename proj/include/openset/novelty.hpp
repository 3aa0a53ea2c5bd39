#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "openset/embedding.hpp"
#include "openset/error.hpp"
#include "openset/kernel.hpp"
#include "openset/metrics.hpp"

namespace openset {

enum class NoveltyMeasure { nn_distance, density, entropy };

inline std::string to_string(NoveltyMeasure m) {
  switch (m) {
    case NoveltyMeasure::nn_distance: return "nn_distance";
    case NoveltyMeasure::density: return "density";
    case NoveltyMeasure::entropy: return "entropy";
  }
  throw InternalError("unreachable novelty measure");
}

inline NoveltyMeasure parse_novelty_measure(std::string_view s) {
  if (s == "nn_distance") return NoveltyMeasure::nn_distance;
  if (s == "density") return NoveltyMeasure::density;
  if (s == "entropy") return NoveltyMeasure::entropy;
  throw ConfigError("unknown novelty measure '" + std::string(s) + "'");
}

// Distance from x to its nearest labeled embedding.
inline double novelty_nn_distance(const Embedding& x, const LabeledSet& set) {
  require(!set.empty(), "labeled set is empty");
  require_data(x.dim() == set.dim(), "dimension mismatch");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& m : set.members()) {
    best = std::min(best, squared_distance(x.vector, m.embedding.vector));
  }
  return std::sqrt(best);
}

// One minus the maximum posterior class probability, accumulated as the
// complementary class mass so near-zero values keep their resolution.
inline double novelty_density(const Embedding& x, const LabeledSet& set,
                              const KernelParams& params) {
  return class_posterior(x, set, params).complement_of_max();
}

// Shannon entropy (natural log) of the posterior class distribution, with
// 0 * ln 0 = 0.
inline double novelty_entropy(const Embedding& x, const LabeledSet& set,
                              const KernelParams& params) {
  const auto posterior = class_posterior(x, set, params);
  double h = 0.0;
  for (const auto& [label, p] : posterior.probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

inline double novelty_score(const Embedding& x, const LabeledSet& set,
                            const KernelParams& params, NoveltyMeasure measure) {
  switch (measure) {
    case NoveltyMeasure::nn_distance: return novelty_nn_distance(x, set);
    case NoveltyMeasure::density: return novelty_density(x, set, params);
    case NoveltyMeasure::entropy: return novelty_entropy(x, set, params);
  }
  throw InternalError("unreachable novelty measure");
}

// Open-set verdict: nullopt label means novel.
struct OpenSetPrediction {
  std::optional<int> label;
  double novelty_score = 0.0;
  double threshold = 0.0;

  bool is_novel() const { return !label.has_value(); }
};

// The open-set decision rule. A score at or below delta classifies as known
// (the boundary case is known); above delta the verdict is novel.
inline OpenSetPrediction open_set_predict(const Embedding& x,
                                          const LabeledSet& set,
                                          const KernelParams& params,
                                          NoveltyMeasure measure, double delta) {
  OpenSetPrediction out;
  out.novelty_score = novelty_score(x, set, params, measure);
  out.threshold = delta;
  if (out.novelty_score <= delta) out.label = classify(x, set, params);
  return out;
}

// Threshold maximizing novelty-detection F1 over the candidate set: midpoints
// between consecutive distinct sorted scores plus -inf/+inf sentinels. Ties
// resolve toward the smallest delta. Confusion counts come from one sorted
// suffix scan, independent of f1_at_threshold's per-delta counting.
inline double calibrate_threshold(std::span<const BinaryScore> scores) {
  std::size_t total_pos = 0, total_neg = 0;
  for (const auto& s : scores) (s.positive ? total_pos : total_neg)++;
  require(total_pos >= 1 && total_neg >= 1,
          "calibration needs both a novel and a known example");

  auto v = detail::sorted_desc(scores);  // descending

  const auto f1_of = [total_pos](std::size_t tp, std::size_t fp) {
    if (tp == 0) return 0.0;
    const std::size_t fn = total_pos - tp;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return 2.0 * precision * recall / (precision + recall);
  };

  const double inf = std::numeric_limits<double>::infinity();
  // delta = -inf: everything predicted novel.
  double best_delta = -inf;
  double best_f1 = f1_of(total_pos, total_neg);

  // Walking delta down through each gap between distinct scores: predicted
  // positives are exactly the prefix of v above the gap.
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j < v.size() && v[j].score == v[i].score) {
      (v[j].positive ? tp : fp)++;
      ++j;
    }
    if (j == v.size()) break;  // delta below the minimum equals the -inf candidate
    const double delta = 0.5 * (v[i].score + v[j].score);
    const double f1 = f1_of(tp, fp);
    if (f1 > best_f1 || (f1 == best_f1 && delta < best_delta)) {
      best_f1 = f1;
      best_delta = delta;
    }
    i = j;
  }
  // delta = +inf predicts nothing novel: F1 = 0, never beats the -inf
  // candidate (total_pos >= 1), so it needs no explicit branch.
  return best_delta;
}

}  // namespace openset
