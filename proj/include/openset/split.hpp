#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "openset/embedding.hpp"
#include "openset/error.hpp"
#include "openset/rng.hpp"

namespace openset {

enum class KnownAssignment { first_half, explicit_list };

struct SplitOptions {
  KnownAssignment assignment = KnownAssignment::first_half;
  double fraction_known = 0.5;     // first_half: ceil(fraction * |classes|)
  std::vector<int> known_labels;   // explicit_list
  double train_fraction = 0.5;     // of each known class
  double observed_fraction = 0.5;  // of the non-train remainder, per class
  std::uint64_t seed = 0;
};

namespace detail {

// round(fraction * n) clamped to [0, n].
inline std::size_t take_count(double fraction, std::size_t n) {
  const auto t = static_cast<long long>(
      std::llround(fraction * static_cast<double>(n)));
  if (t < 0) return 0;
  return std::min<std::size_t>(static_cast<std::size_t>(t), n);
}

}  // namespace detail

// Known/novel class split protocol: the first ceil(fraction * |classes|)
// classes in sorted label order become the known set (or an explicit list);
// train receives only known-class examples, observed and test receive both.
// Per-class membership comes from a seeded shuffle followed by the
// configured proportions, with a deterministic fixup so observed and test
// each hold at least one known and one novel member whenever the data
// permits.
inline DatasetSplit split_known_novel(const std::vector<LabeledEmbedding>& data,
                                      const SplitOptions& opt) {
  require_data(!data.empty(), "empty dataset");
  require(opt.fraction_known > 0.0 && opt.fraction_known <= 1.0,
          "fraction_known must be in (0, 1]");
  require(opt.train_fraction >= 0.0 && opt.train_fraction <= 1.0,
          "train_fraction must be in [0, 1]");
  require(opt.observed_fraction >= 0.0 && opt.observed_fraction <= 1.0,
          "observed_fraction must be in [0, 1]");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < data.size(); ++i) {
    by_class[data[i].label].push_back(i);
  }

  std::set<int> known;
  std::set<int> novel;
  if (opt.assignment == KnownAssignment::first_half) {
    require(by_class.size() >= 2, "first_half split needs at least 2 classes");
    const std::size_t n_known = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::ceil(opt.fraction_known * static_cast<double>(by_class.size()))));
    std::size_t i = 0;
    for (const auto& [label, members] : by_class) {
      (i < n_known ? known : novel).insert(label);
      ++i;
    }
  } else {
    for (int label : opt.known_labels) {
      require(by_class.count(label) != 0,
              "known label " + std::to_string(label) + " not in the vocabulary");
      known.insert(label);
    }
    require(!known.empty(), "explicit known-label list is empty");
    for (const auto& [label, members] : by_class) {
      if (known.count(label) == 0) novel.insert(label);
    }
  }

  std::vector<std::size_t> train_idx, observed_idx, test_idx;
  for (const auto& [label, members] : by_class) {
    auto shuffled = members;
    auto rng = make_rng(opt.seed, "split-class", static_cast<std::uint64_t>(
                                                     static_cast<std::int64_t>(label)));
    for (std::size_t i = shuffled.size(); i > 1; --i) {
      std::swap(shuffled[i - 1], shuffled[uniform_below(rng, i)]);
    }
    std::size_t pos = 0;
    if (known.count(label)) {
      const std::size_t n_train = detail::take_count(opt.train_fraction, shuffled.size());
      for (; pos < n_train; ++pos) train_idx.push_back(shuffled[pos]);
    }
    const std::size_t rest = shuffled.size() - pos;
    const std::size_t n_obs = detail::take_count(opt.observed_fraction, rest);
    for (std::size_t t = 0; t < rest; ++t, ++pos) {
      (t < n_obs ? observed_idx : test_idx).push_back(shuffled[pos]);
    }
  }

  // Fixup: each pool should see each side when the data makes it possible.
  const auto side_of = [&](std::size_t i) { return known.count(data[i].label) != 0; };
  const auto fixup = [&](std::vector<std::size_t>& lacking,
                         std::vector<std::size_t>& donor, bool want_known) {
    for (std::size_t i : lacking) {
      if (side_of(i) == want_known) return;  // already present
    }
    std::size_t count = 0;
    for (std::size_t i : donor) {
      if (side_of(i) == want_known) ++count;
    }
    if (count < 2) return;  // donor cannot spare one
    for (auto it = donor.rbegin(); it != donor.rend(); ++it) {
      if (side_of(*it) == want_known) {
        lacking.push_back(*it);
        donor.erase(std::next(it).base());
        return;
      }
    }
  };
  for (bool want_known : {false, true}) {
    fixup(observed_idx, test_idx, want_known);
    fixup(test_idx, observed_idx, want_known);
  }

  std::sort(train_idx.begin(), train_idx.end());
  std::sort(observed_idx.begin(), observed_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  DatasetSplit split;
  split.known_classes = std::move(known);
  split.novel_classes = std::move(novel);
  for (std::size_t i : train_idx) split.train.append(data[i]);
  const auto make_pool = [&data](const std::vector<std::size_t>& idx) {
    std::vector<Embedding> members;
    std::vector<std::optional<int>> truth;
    members.reserve(idx.size());
    truth.reserve(idx.size());
    for (std::size_t i : idx) {
      members.push_back(data[i].embedding);
      truth.emplace_back(data[i].label);
    }
    return UnlabeledPool(std::move(members), std::move(truth));
  };
  split.observed = make_pool(observed_idx);
  split.test = make_pool(test_idx);
  split.validate();
  return split;
}

}  // namespace openset
