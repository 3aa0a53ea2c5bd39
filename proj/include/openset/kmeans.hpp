#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "openset/embedding.hpp"
#include "openset/error.hpp"
#include "openset/rng.hpp"

namespace openset {

struct Clustering {
  std::size_t k = 0;
  std::vector<Vec> centroids;
  std::vector<std::size_t> assignment;   // point index -> cluster id
  double inertia = 0.0;                  // sum of squared distances
  std::vector<double> inertia_history;   // one entry per Lloyd iteration
  std::size_t iterations = 0;
};

// D^2-weighted seeding: first centroid uniform over the points, each later
// one drawn with probability proportional to the squared distance to its
// nearest chosen centroid.
inline std::vector<Vec> kmeans_pp_init(std::span<const Vec> points,
                                       std::size_t k, std::mt19937_64& rng) {
  require(k >= 1, "k must be positive");
  require(k <= points.size(), "k exceeds the number of points");

  std::vector<Vec> centroids;
  centroids.reserve(k);
  centroids.push_back(points[uniform_below(rng, points.size())]);

  std::vector<double> best_sq(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    best_sq[i] = squared_distance(points[i], centroids[0]);
  }
  while (centroids.size() < k) {
    double total = 0.0;
    for (double w : best_sq) total += w;
    require(total > 0.0, "fewer than k distinct points");
    const double u = uniform_double(rng) * total;
    double cum = 0.0;
    std::size_t chosen = points.size() - 1;
    for (std::size_t i = 0; i < points.size(); ++i) {
      cum += best_sq[i];
      if (cum > u) {
        chosen = i;
        break;
      }
    }
    centroids.push_back(points[chosen]);
    for (std::size_t i = 0; i < points.size(); ++i) {
      best_sq[i] = std::min(best_sq[i],
                            squared_distance(points[i], centroids.back()));
    }
  }
  return centroids;
}

inline std::vector<Vec> kmeans_pp_init(std::span<const Vec> points,
                                       std::size_t k, std::uint64_t seed) {
  auto rng = make_rng(seed, "kmeans++");
  return kmeans_pp_init(points, k, rng);
}

// Lloyd iterations from given initial centroids: assign to the nearest
// centroid (ties to the smallest cluster id), recompute means, stop when the
// assignment stops changing, the inertia improvement drops below tol, or
// max_iter is reached. An empty cluster is re-seeded at the point farthest
// from its assigned centroid (among clusters that can spare a point).
inline Clustering kmeans_lloyd(std::span<const Vec> points,
                               std::vector<Vec> centroids,
                               std::size_t max_iter = 100, double tol = 1e-10) {
  const std::size_t n = points.size();
  const std::size_t k = centroids.size();
  require(k >= 1 && k <= n, "centroid count must be in [1, n]");

  Clustering out;
  out.k = k;
  out.assignment.assign(n, 0);
  std::vector<std::size_t> prev_assignment;
  std::vector<std::size_t> sizes(k, 0);
  double prev_inertia = std::numeric_limits<double>::infinity();

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    // Assignment step.
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_c = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(points[i], centroids[c]);
        if (d < best) {
          best = d;
          best_c = c;
        }
      }
      out.assignment[i] = best_c;
      sizes[best_c]++;
    }

    // Empty-cluster repair: re-seed at the farthest point of a cluster that
    // keeps at least one member.
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] > 0) continue;
      double far_d = -1.0;
      std::size_t far_i = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[out.assignment[i]] < 2) continue;
        const double d = squared_distance(points[i], centroids[out.assignment[i]]);
        if (d > far_d) {
          far_d = d;
          far_i = i;
        }
      }
      if (far_i == n) throw InternalError("empty-cluster repair found no donor");
      sizes[out.assignment[far_i]]--;
      out.assignment[far_i] = c;
      sizes[c] = 1;
      centroids[c] = points[far_i];
    }

    if (out.assignment == prev_assignment) break;

    // Mean update, accumulated in point order.
    const std::size_t dim = points[0].size();
    for (auto& c : centroids) std::fill(c.begin(), c.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& c = centroids[out.assignment[i]];
      for (std::size_t d = 0; d < dim; ++d) c[d] += points[i][d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      const double inv = 1.0 / static_cast<double>(sizes[c]);
      for (double& v : centroids[c]) v *= inv;
    }

    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      inertia += squared_distance(points[i], centroids[out.assignment[i]]);
    }
    out.inertia_history.push_back(inertia);
    out.iterations = iter + 1;
    prev_assignment = out.assignment;
    if (prev_inertia - inertia < tol) break;
    prev_inertia = inertia;
  }

  out.centroids = std::move(centroids);
  out.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.inertia += squared_distance(points[i], out.centroids[out.assignment[i]]);
  }
  return out;
}

inline Clustering kmeans(std::span<const Vec> points, std::size_t k,
                         std::uint64_t seed, std::size_t max_iter = 100,
                         double tol = 1e-10) {
  auto rng = make_rng(seed, "kmeans++");
  return kmeans_lloyd(points, kmeans_pp_init(points, k, rng), max_iter, tol);
}

// Mean silhouette over all points: per point, a is the mean distance to its
// own cluster (self excluded) and b the smallest mean distance to another
// cluster; the point contributes (b - a) / max(a, b), or 0 for singleton
// clusters and for the degenerate a = b = 0 case.
inline double silhouette_score(std::span<const Vec> points,
                               std::span<const std::size_t> assignment) {
  require(points.size() == assignment.size(), "points/assignment size mismatch");
  const std::size_t n = points.size();
  require(n >= 2, "silhouette needs at least 2 points");
  std::size_t k = 0;
  for (std::size_t c : assignment) k = std::max(k, c + 1);
  require(k >= 2, "silhouette needs at least 2 clusters");
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t c : assignment) sizes[c]++;
  for (std::size_t c = 0; c < k; ++c) {
    require(sizes[c] > 0, "cluster " + std::to_string(c) + " is empty");
  }

  double total = 0.0;
  std::vector<double> sums(k);
  for (std::size_t i = 0; i < n; ++i) {
    if (sizes[assignment[i]] == 1) continue;  // singleton contributes 0
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sums[assignment[j]] += std::sqrt(squared_distance(points[i], points[j]));
    }
    const double a =
        sums[assignment[i]] / static_cast<double>(sizes[assignment[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c == assignment[i]) continue;
      b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

struct KSelection {
  std::size_t k = 0;
  Clustering clustering;
  double silhouette = -1.0;
};

// Silhouette-maximizing k over the candidate grid. Each candidate runs a
// fixed number of seeded restarts and keeps the lowest-inertia clustering;
// silhouette ties resolve toward the smallest k.
inline KSelection select_k(std::span<const Vec> points,
                           std::span<const std::size_t> candidates,
                           std::uint64_t seed, std::size_t restarts = 5,
                           std::size_t max_iter = 100, double tol = 1e-10) {
  require(!candidates.empty(), "empty candidate list");
  require(restarts >= 1, "restarts must be positive");
  KSelection best;
  for (std::size_t k : candidates) {
    require(k >= 2, "candidate k must be at least 2");
    require(k <= points.size(), "candidate k exceeds the number of points");
    Clustering best_run;
    double best_inertia = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < restarts; ++r) {
      auto rng = make_rng(seed, "kmeans-restart", k * 1000003ULL + r);
      auto run = kmeans_lloyd(points, kmeans_pp_init(points, k, rng), max_iter, tol);
      if (run.inertia < best_inertia) {
        best_inertia = run.inertia;
        best_run = std::move(run);
      }
    }
    const double sil = silhouette_score(points, best_run.assignment);
    if (sil > best.silhouette) {
      best = {k, std::move(best_run), sil};
    }
  }
  return best;
}

struct PseudoLabels {
  std::vector<int> labels;  // one per pool member, disjoint from reserved
  std::size_t k = 0;
  double silhouette = -1.0;
  int offset = 0;
  Clustering clustering;
};

// Unsupervised pseudo-labels for a pool: cluster ids of the silhouette-best
// k-means run, offset past every reserved (real) class label.
inline PseudoLabels generate_pseudo_labels(const UnlabeledPool& pool,
                                           std::span<const std::size_t> candidates,
                                           std::uint64_t seed,
                                           const std::set<int>& reserved_labels,
                                           std::size_t restarts = 5,
                                           std::size_t max_iter = 100,
                                           double tol = 1e-10) {
  require(!candidates.empty(), "empty candidate list");
  const std::size_t max_candidate =
      *std::max_element(candidates.begin(), candidates.end());
  require(pool.size() >= max_candidate, "pool smaller than the candidate grid");

  std::vector<Vec> points;
  points.reserve(pool.size());
  for (const auto& e : pool.members()) points.push_back(e.vector);

  auto selection = select_k(points, candidates, seed, restarts, max_iter, tol);
  PseudoLabels out;
  out.k = selection.k;
  out.silhouette = selection.silhouette;
  out.offset = reserved_labels.empty() ? 0 : *reserved_labels.rbegin() + 1;
  out.labels.resize(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    out.labels[i] = out.offset + static_cast<int>(selection.clustering.assignment[i]);
  }
  out.clustering = std::move(selection.clustering);
  return out;
}

}  // namespace openset
