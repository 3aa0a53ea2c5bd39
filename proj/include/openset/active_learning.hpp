#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "openset/embedding.hpp"
#include "openset/error.hpp"
#include "openset/kernel.hpp"
#include "openset/metrics.hpp"
#include "openset/novelty.hpp"
#include "openset/numeric.hpp"
#include "openset/rng.hpp"

namespace openset {

enum class StrategyKind { uldr, random, fnn, kde, entropy };

inline std::string to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::uldr: return "uldr";
    case StrategyKind::random: return "random";
    case StrategyKind::fnn: return "fnn";
    case StrategyKind::kde: return "kde";
    case StrategyKind::entropy: return "entropy";
  }
  throw InternalError("unreachable strategy kind");
}

inline StrategyKind parse_strategy(std::string_view s) {
  if (s == "uldr") return StrategyKind::uldr;
  if (s == "random") return StrategyKind::random;
  if (s == "fnn") return StrategyKind::fnn;
  if (s == "kde") return StrategyKind::kde;
  if (s == "entropy") return StrategyKind::entropy;
  throw ConfigError("unknown query strategy '" + std::string(s) + "'");
}

struct QueryStrategy {
  StrategyKind kind = StrategyKind::uldr;
  std::uint64_t seed = 0;  // drives the random strategy's stream
};

struct ALConfig {
  std::size_t budget = 0;
  QueryStrategy strategy;
  KernelParams params;
  std::size_t eval_every = 0;             // 0 = no cadence snapshots
  std::vector<std::size_t> snapshot_at;   // extra checkpoint steps (0 = baseline)
};

struct ALStep {
  std::size_t step = 0;  // 1-based
  std::string id;
  double score = 0.0;
  int label = 0;
  bool was_novel = false;  // relative to the initial known-class vocabulary
};

struct ALSnapshot {
  std::size_t step = 0;
  double novel_acc = 0.0;
  double combined_acc = 0.0;
  bool novel_degenerate = false;
  bool combined_degenerate = false;
};

struct ALTrace {
  std::vector<ALStep> steps;
  std::vector<ALSnapshot> snapshots;
};

struct ALResult {
  ALTrace trace;
  LabeledSet final_set;
  std::optional<std::string> abort_reason;  // set when the oracle failed
};

// Simulated user: answers queries from the pool's hidden ground truth and
// rejects repeats.
class LabelOracle {
 public:
  explicit LabelOracle(const UnlabeledPool& pool) : pool_(&pool) {}

  int answer(const std::string& id) {
    const auto idx = pool_->index_of(id);
    require_data(idx.has_value(), "oracle: unknown id '" + id + "'");
    require_data(consumed_.insert(id).second,
                 "oracle: repeated query for id '" + id + "'");
    const auto& label = pool_->truth_label(*idx);
    require_data(label.has_value(),
                 "oracle: no ground-truth label for id '" + id + "'");
    return *label;
  }

  std::size_t consumed_count() const { return consumed_.size(); }

 private:
  const UnlabeledPool* pool_;
  std::unordered_set<std::string> consumed_;
};

namespace detail {

// Squared distances from pool member i to every active pool member and to
// every labeled member, supplied as callables so the standalone operations
// and the cached run loop share one arithmetic path.
template <typename PoolSq, typename LabeledSq>
double uldr_log_from(std::size_t i, std::span<const std::size_t> active,
                     std::size_t n_labeled, const KernelParams& params,
                     PoolSq&& pool_sq, LabeledSq&& labeled_sq) {
  const double inv = 1.0 / (2.0 * params.sigma * params.sigma);

  std::vector<double> num;
  num.reserve(active.size());
  for (std::size_t j : active) {
    if (j == i) continue;
    num.push_back(-pool_sq(i, j) * inv);
  }
  std::vector<double> den;
  den.reserve(n_labeled);
  for (std::size_t k = 0; k < n_labeled; ++k) {
    den.push_back(-labeled_sq(i, k) * inv);
  }
  if (params.neighbor_limit) {
    // Neighborhood-restricted variant: keep only the largest exponents
    // (nearest points) on each side. Full sort keeps the summation order
    // platform-independent.
    const auto keep_largest = [](std::vector<double>& v, std::size_t k) {
      if (v.size() <= k) return;
      std::sort(v.begin(), v.end(), std::greater<double>());
      v.resize(k);
    };
    keep_largest(num, *params.neighbor_limit);
    keep_largest(den, *params.neighbor_limit);
  }
  return log_sum_exp(num) - log_sum_exp(den);
}

}  // namespace detail

// Log of the unlabeled-to-labeled density ratio for pool member i: the kernel
// mass of the other active pool members over the kernel mass of the labeled
// set. The empty-numerator case (sole remaining point) is -inf by convention.
inline double uldr_log_score(std::size_t i, std::span<const std::size_t> active,
                             const UnlabeledPool& pool, const LabeledSet& set,
                             const KernelParams& params) {
  require(!set.empty(), "labeled set is empty");
  params.validate(set.size());
  require_data(pool.dim() == set.dim(), "dimension mismatch");
  return detail::uldr_log_from(
      i, active, set.size(), params,
      [&pool](std::size_t a, std::size_t b) {
        return squared_distance(pool[a].vector, pool[b].vector);
      },
      [&pool, &set](std::size_t a, std::size_t k) {
        return squared_distance(pool[a].vector, set[k].embedding.vector);
      });
}

// Convenience overload scoring against the whole pool.
inline double uldr_log_score(std::size_t i, const UnlabeledPool& pool,
                             const LabeledSet& set, const KernelParams& params) {
  std::vector<std::size_t> active(pool.size());
  for (std::size_t j = 0; j < active.size(); ++j) active[j] = j;
  return uldr_log_score(i, active, pool, set, params);
}

struct Selection {
  std::size_t pool_index = 0;
  double score = 0.0;
};

namespace detail {

template <typename ScoreFn>
Selection argmax_selection(std::span<const std::size_t> active, ScoreFn&& score) {
  Selection best{active[0], score(active[0])};
  for (std::size_t t = 1; t < active.size(); ++t) {
    const double s = score(active[t]);
    if (s > best.score) best = {active[t], s};  // ties keep the smaller index
  }
  return best;
}

}  // namespace detail

// One query selection over the active (not yet queried) pool members. Argmax
// ties break toward the smallest pool index; the random strategy draws from
// the supplied stream. The returned score is the strategy's own scale (log
// ratio for uldr, distance for fnn, novelty for kde/entropy, 0 for random).
inline Selection select_query(std::span<const std::size_t> active,
                              const UnlabeledPool& pool, const LabeledSet& set,
                              const QueryStrategy& strategy,
                              const KernelParams& params,
                              std::mt19937_64& random_stream) {
  require(!active.empty(), "no unqueried pool members remain");
  require(!set.empty(), "labeled set is empty");
  switch (strategy.kind) {
    case StrategyKind::random: {
      const std::size_t t = static_cast<std::size_t>(
          uniform_below(random_stream, active.size()));
      return {active[t], 0.0};
    }
    case StrategyKind::uldr:
      return detail::argmax_selection(active, [&](std::size_t i) {
        return uldr_log_score(i, active, pool, set, params);
      });
    case StrategyKind::fnn:
      return detail::argmax_selection(active, [&](std::size_t i) {
        return novelty_nn_distance(pool[i], set);
      });
    case StrategyKind::kde:
      return detail::argmax_selection(active, [&](std::size_t i) {
        return novelty_density(pool[i], set, params);
      });
    case StrategyKind::entropy:
      return detail::argmax_selection(active, [&](std::size_t i) {
        return novelty_entropy(pool[i], set, params);
      });
  }
  throw InternalError("unreachable strategy kind");
}

inline Selection select_query(std::span<const std::size_t> active,
                              const UnlabeledPool& pool, const LabeledSet& set,
                              const QueryStrategy& strategy,
                              const KernelParams& params) {
  std::mt19937_64 stream(strategy.seed);
  return select_query(active, pool, set, strategy, params, stream);
}

namespace detail {

// Precomputed squared distances for the run loop: pool x pool and
// pool x initial-train. Appended centers are pool members, so every labeled
// distance stays a lookup as the center set grows.
class ALDistanceCache {
 public:
  ALDistanceCache(const UnlabeledPool& pool, const LabeledSet& train) {
    n_pool_ = pool.size();
    n_train_ = train.size();
    pool_pool_.resize(n_pool_ * n_pool_, 0.0);
    for (std::size_t i = 0; i < n_pool_; ++i) {
      for (std::size_t j = i + 1; j < n_pool_; ++j) {
        const double d = squared_distance(pool[i].vector, pool[j].vector);
        pool_pool_[i * n_pool_ + j] = d;
        pool_pool_[j * n_pool_ + i] = d;
      }
    }
    pool_train_.resize(n_pool_ * n_train_);
    for (std::size_t i = 0; i < n_pool_; ++i) {
      for (std::size_t k = 0; k < n_train_; ++k) {
        pool_train_[i * n_train_ + k] =
            squared_distance(pool[i].vector, train[k].embedding.vector);
      }
    }
  }

  double pool_pool(std::size_t i, std::size_t j) const {
    return pool_pool_[i * n_pool_ + j];
  }
  double pool_train(std::size_t i, std::size_t k) const {
    return pool_train_[i * n_train_ + k];
  }

  // Squared distance from pool member i to labeled member k, where labeled
  // members beyond the initial train set are appended pool members.
  double pool_labeled(std::size_t i, std::size_t k,
                      std::span<const std::size_t> appended) const {
    if (k < n_train_) return pool_train(i, k);
    return pool_pool(i, appended[k - n_train_]);
  }

 private:
  std::size_t n_pool_ = 0;
  std::size_t n_train_ = 0;
  std::vector<double> pool_pool_;
  std::vector<double> pool_train_;
};

inline ALSnapshot evaluate_snapshot(std::size_t step, const DatasetSplit& split,
                                    const LabeledSet& current,
                                    const KernelParams& params) {
  std::vector<LabelPrediction> novel_preds;
  std::vector<LabelPrediction> combined_preds;
  std::set<int> vocabulary = split.known_classes;
  vocabulary.insert(split.novel_classes.begin(), split.novel_classes.end());
  for (std::size_t i = 0; i < split.test.size(); ++i) {
    const int predicted = classify(split.test[i], current, params);
    const auto& truth = split.test.truth_label(i);
    require_data(truth.has_value(), "test member '" + split.test[i].id +
                                        "' has no ground-truth label");
    const LabelPrediction p{predicted, *truth};
    combined_preds.push_back(p);
    if (split.test_is_novel(i)) novel_preds.push_back(p);
  }
  const auto novel = closed_accuracy(novel_preds, &vocabulary);
  const auto combined = closed_accuracy(combined_preds, &vocabulary);
  return {step, novel.value, combined.value, novel.degenerate,
          combined.degenerate};
}

}  // namespace detail

// Budgeted query loop: score the remaining pool against the current center
// set, query the argmax, append the labeled embedding, remove it from the
// pool, repeat. Oracle failure aborts the run but preserves the partial
// trace. Snapshots (accuracy on the test set) are taken at the steps listed
// in cfg.snapshot_at and every cfg.eval_every steps when set.
inline ALResult run_active_learning(const DatasetSplit& split,
                                    const ALConfig& cfg, LabelOracle& oracle) {
  const UnlabeledPool& pool = split.observed;
  require(cfg.budget <= pool.size(), "budget exceeds pool size");
  require(!split.train.empty(), "train set is empty");
  cfg.params.validate(split.train.size());

  ALResult result;
  result.final_set = split.train;

  const detail::ALDistanceCache cache(pool, split.train);
  std::vector<std::size_t> appended;  // pool indices appended to the center set
  std::vector<std::size_t> active(pool.size());
  for (std::size_t i = 0; i < active.size(); ++i) active[i] = i;

  std::mt19937_64 random_stream(cfg.strategy.seed);
  const std::unordered_set<std::size_t> snapshot_at(cfg.snapshot_at.begin(),
                                                    cfg.snapshot_at.end());
  const auto want_snapshot = [&](std::size_t step) {
    if (snapshot_at.count(step)) return true;
    return cfg.eval_every > 0 && step > 0 && step % cfg.eval_every == 0;
  };
  if (want_snapshot(0)) {
    result.trace.snapshots.push_back(
        detail::evaluate_snapshot(0, split, result.final_set, cfg.params));
  }

  const std::size_t n_train = split.train.size();

  for (std::size_t step = 1; step <= cfg.budget; ++step) {
    // Score the remaining pool against the current center set via the cache.
    Selection picked;
    switch (cfg.strategy.kind) {
      case StrategyKind::random: {
        const std::size_t t = static_cast<std::size_t>(
            uniform_below(random_stream, active.size()));
        picked = {active[t], 0.0};
        break;
      }
      case StrategyKind::uldr:
        picked = detail::argmax_selection(active, [&](std::size_t i) {
          return detail::uldr_log_from(
              i, active, result.final_set.size(), cfg.params,
              [&cache](std::size_t a, std::size_t b) {
                return cache.pool_pool(a, b);
              },
              [&cache, &appended](std::size_t a, std::size_t k) {
                return cache.pool_labeled(a, k, appended);
              });
        });
        break;
      case StrategyKind::fnn:
        picked = detail::argmax_selection(active, [&](std::size_t i) {
          double best = std::numeric_limits<double>::infinity();
          for (std::size_t k = 0; k < result.final_set.size(); ++k) {
            best = std::min(best, cache.pool_labeled(i, k, appended));
          }
          return std::sqrt(best);
        });
        break;
      case StrategyKind::kde:
      case StrategyKind::entropy: {
        std::vector<double> sq(result.final_set.size());
        std::vector<int> labels(result.final_set.size());
        for (std::size_t k = 0; k < result.final_set.size(); ++k) {
          labels[k] = result.final_set[k].label;
        }
        picked = detail::argmax_selection(active, [&](std::size_t i) {
          for (std::size_t k = 0; k < result.final_set.size(); ++k) {
            sq[k] = cache.pool_labeled(i, k, appended);
          }
          const auto post =
              detail::posterior_from_sq_dists(sq, labels, cfg.params);
          if (cfg.strategy.kind == StrategyKind::kde) {
            return post.complement_of_max();
          }
          double h = 0.0;
          for (const auto& [label, p] : post.probs) {
            if (p > 0.0) h -= p * std::log(p);
          }
          return h;
        });
        break;
      }
    }

    const std::string& id = pool[picked.pool_index].id;
    int label = 0;
    try {
      label = oracle.answer(id);
    } catch (const Error& e) {
      result.abort_reason = e.what();
      break;
    }
    const bool was_novel = split.known_classes.count(label) == 0;
    result.trace.steps.push_back({step, id, picked.score, label, was_novel});
    result.final_set.append({pool[picked.pool_index], label});
    appended.push_back(picked.pool_index);
    active.erase(std::find(active.begin(), active.end(), picked.pool_index));

    if (want_snapshot(step)) {
      result.trace.snapshots.push_back(
          detail::evaluate_snapshot(step, split, result.final_set, cfg.params));
    }
  }

  // Conservation: the final set must be the initial train set plus exactly
  // the queried members.
  if (!result.abort_reason) {
    if (result.final_set.size() != n_train + cfg.budget ||
        result.trace.steps.size() != cfg.budget) {
      throw InternalError("active-learning conservation violated");
    }
  }
  return result;
}

}  // namespace openset
