#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "openset/embedding.hpp"
#include "openset/error.hpp"

namespace openset {

// Shared-sigma Gaussian kernel parameters. neighbor_limit bounds the support
// set S; nullopt means every labeled member participates.
struct KernelParams {
  double sigma = 1.0;
  std::optional<std::size_t> neighbor_limit;  // nullopt = all

  void validate(std::size_t set_size) const {
    require(sigma > 0.0, "sigma must be positive");
    if (neighbor_limit) {
      require(*neighbor_limit >= 1, "neighbor_limit must be positive");
      require(*neighbor_limit <= set_size,
              "neighbor_limit exceeds labeled set size");
    }
  }
};

struct ClassPosterior {
  std::map<int, double> probs;       // class label -> probability
  std::vector<std::size_t> support;  // member indices of S, ascending

  double max_prob() const {
    double best = 0.0;
    for (const auto& [label, p] : probs) best = std::max(best, p);
    return best;
  }

  // Argmax class, ties broken by smallest label (map iteration is ascending).
  int argmax() const {
    int best_label = 0;
    double best = -1.0;
    for (const auto& [label, p] : probs) {
      if (p > best) {
        best = p;
        best_label = label;
      }
    }
    return best_label;
  }

  // 1 - max_prob(), accumulated from the complementary masses so tiny values
  // survive instead of cancelling against 1.
  double complement_of_max() const {
    const int top = argmax();
    double sum = 0.0;
    for (const auto& [label, p] : probs) {
      if (label != top) sum += p;
    }
    return sum;
  }
};

namespace detail {

// Indices of the k smallest squared distances, ties by ascending index,
// returned in ascending index order.
inline std::vector<std::size_t> smallest_k_indices(
    std::span<const double> sq_dists, std::size_t k) {
  std::vector<std::size_t> idx(sq_dists.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  if (k < idx.size()) {
    const auto cmp = [&sq_dists](std::size_t a, std::size_t b) {
      if (sq_dists[a] != sq_dists[b]) return sq_dists[a] < sq_dists[b];
      return a < b;
    };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k),
                      idx.end(), cmp);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

// Posterior from precomputed squared distances to every labeled member
// (ordered by member index). Exponents are shifted by their maximum before
// exponentiation so the normalizer is at least 1 and the result is NaN-free
// at any sigma.
inline ClassPosterior posterior_from_sq_dists(std::span<const double> sq_dists,
                                              std::span<const int> labels,
                                              const KernelParams& params) {
  ClassPosterior out;
  const std::size_t limit =
      params.neighbor_limit ? *params.neighbor_limit : sq_dists.size();
  out.support = smallest_k_indices(sq_dists, limit);

  const double inv = 1.0 / (2.0 * params.sigma * params.sigma);
  std::vector<double> exponents(out.support.size());
  double max_e = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < out.support.size(); ++i) {
    exponents[i] = -sq_dists[out.support[i]] * inv;
    max_e = std::max(max_e, exponents[i]);
  }
  double denom = 0.0;
  for (std::size_t i = 0; i < out.support.size(); ++i) {
    const double w = std::exp(exponents[i] - max_e);
    out.probs[labels[out.support[i]]] += w;
    denom += w;
  }
  for (auto& [label, p] : out.probs) p /= denom;
  return out;
}

}  // namespace detail

// Per-class Gaussian kernel sum over the support S, normalized across S.
inline ClassPosterior class_posterior(const Embedding& x, const LabeledSet& set,
                                      const KernelParams& params) {
  require(!set.empty(), "labeled set is empty");
  params.validate(set.size());
  require_data(x.dim() == set.dim(), "dimension mismatch");

  std::vector<double> sq(set.size());
  std::vector<int> labels(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    sq[i] = squared_distance(x.vector, set[i].embedding.vector);
    labels[i] = set[i].label;
  }
  return detail::posterior_from_sq_dists(sq, labels, params);
}

// Maximum-posterior class label, ties broken by smallest label.
inline int classify(const Embedding& x, const LabeledSet& set,
                    const KernelParams& params) {
  return class_posterior(x, set, params).argmax();
}

}  // namespace openset
