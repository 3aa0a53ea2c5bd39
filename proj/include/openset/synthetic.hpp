#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "openset/embedding.hpp"
#include "openset/error.hpp"
#include "openset/rng.hpp"

namespace openset {

// Gaussian-mixture embedding generator standing in for an external feature
// extractor: class centers drawn uniformly in a hypercube, members isotropic
// Gaussian around their center. Difficulty is the std/spread ratio.
struct MixtureConfig {
  std::size_t n_classes = 20;
  std::size_t dim = 16;
  std::size_t per_class_count = 50;
  double class_center_spread = 100.0;
  double within_class_std = 1.0;
  double fraction_known = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    require(n_classes >= 1, "n_classes must be positive");
    require(dim >= 1, "dim must be positive");
    require(per_class_count >= 1, "per_class_count must be positive");
    require(class_center_spread > 0.0, "class_center_spread must be positive");
    require(within_class_std >= 0.0, "within_class_std must be non-negative");
    require(fraction_known > 0.0 && fraction_known <= 1.0,
            "fraction_known must be in (0, 1]");
  }
};

// Deterministic per seed. The first ceil(fraction_known * n_classes) labels
// are known; train holds per_class_count members of each known class, while
// observed and test split the novel members evenly and receive exactly as
// many extra known-class members, so each pool is balanced between known and
// novel.
inline DatasetSplit generate_mixture(const MixtureConfig& cfg) {
  cfg.validate();

  const std::size_t n_known = std::min<std::size_t>(
      cfg.n_classes,
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(
                                   cfg.fraction_known *
                                   static_cast<double>(cfg.n_classes)))));
  const std::size_t n_novel = cfg.n_classes - n_known;

  const std::size_t novel_total = n_novel * cfg.per_class_count;
  const std::size_t obs_novel = (novel_total + 1) / 2;
  const std::size_t test_novel = novel_total - obs_novel;

  // Known-class pool quotas match the novel counts, spread as evenly as
  // possible across the known classes.
  const auto quota = [n_known](std::size_t total, std::size_t class_pos) {
    std::size_t q = total / n_known;
    if (class_pos < total % n_known) ++q;
    return q;
  };

  DatasetSplit split;
  std::vector<Embedding> obs_members, test_members;
  std::vector<std::optional<int>> obs_truth, test_truth;

  std::size_t novel_toggle = 0;  // alternates novel members observed/test
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    const int label = static_cast<int>(c);
    const bool is_known = c < n_known;
    (is_known ? split.known_classes : split.novel_classes).insert(label);

    auto center_rng = make_rng(cfg.seed, "mixture-center", c);
    Vec center(cfg.dim);
    for (auto& v : center) {
      v = uniform_in(center_rng, 0.0, cfg.class_center_spread);
    }

    const std::size_t n_members =
        is_known ? cfg.per_class_count + quota(obs_novel, c) +
                       quota(test_novel, c)
                 : cfg.per_class_count;

    auto point_rng = make_rng(cfg.seed, "mixture-points", c);
    for (std::size_t j = 0; j < n_members; ++j) {
      Embedding e;
      e.id = "c" + std::to_string(label) + "_" + std::to_string(j);
      e.vector.resize(cfg.dim);
      for (std::size_t d = 0; d < cfg.dim; ++d) {
        e.vector[d] =
            center[d] + cfg.within_class_std * standard_normal(point_rng);
      }
      if (is_known) {
        if (j < cfg.per_class_count) {
          split.train.append({std::move(e), label});
        } else if (j < cfg.per_class_count + quota(obs_novel, c)) {
          obs_members.push_back(std::move(e));
          obs_truth.emplace_back(label);
        } else {
          test_members.push_back(std::move(e));
          test_truth.emplace_back(label);
        }
      } else {
        if (novel_toggle++ % 2 == 0) {
          obs_members.push_back(std::move(e));
          obs_truth.emplace_back(label);
        } else {
          test_members.push_back(std::move(e));
          test_truth.emplace_back(label);
        }
      }
    }
  }

  split.observed = UnlabeledPool(std::move(obs_members), std::move(obs_truth));
  split.test = UnlabeledPool(std::move(test_members), std::move(test_truth));
  split.validate();
  return split;
}

}  // namespace openset
