#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "openset/error.hpp"
#include "openset/numeric.hpp"

namespace openset {

using Vec = std::vector<double>;

// A point in the metric space: an opaque id plus a fixed-dimension vector of
// finite coordinates.
struct Embedding {
  std::string id;
  Vec vector;

  std::size_t dim() const { return vector.size(); }
};

struct LabeledEmbedding {
  Embedding embedding;
  int label = 0;
};

inline void check_embedding(const Embedding& e) {
  require_data(!e.vector.empty(), "embedding '" + e.id + "' has no coordinates");
  require_data(all_finite(e.vector),
               "embedding '" + e.id + "' has a non-finite coordinate");
}

inline double squared_distance(std::span<const double> a,
                               std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

inline double euclidean_distance(const Embedding& a, const Embedding& b) {
  require_data(a.dim() == b.dim(),
               "dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                   std::to_string(b.dim()));
  return std::sqrt(squared_distance(a.vector, b.vector));
}

// The labeled kernel-center set. Immutable except for append, which follows a
// single-writer contract: appends must not race with concurrent readers.
class LabeledSet {
 public:
  LabeledSet() = default;

  explicit LabeledSet(std::vector<LabeledEmbedding> members) {
    for (auto& m : members) append(std::move(m));
  }

  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  std::size_t dim() const { return dim_; }
  const LabeledEmbedding& operator[](std::size_t i) const { return members_[i]; }
  const std::vector<LabeledEmbedding>& members() const { return members_; }
  const std::set<int>& classes() const { return classes_; }

  bool contains_id(const std::string& id) const {
    return id_index_.count(id) != 0;
  }

  std::optional<std::size_t> index_of(const std::string& id) const {
    auto it = id_index_.find(id);
    if (it == id_index_.end()) return std::nullopt;
    return it->second;
  }

  void append(LabeledEmbedding item) {
    check_embedding(item.embedding);
    if (!members_.empty()) {
      require_data(item.embedding.dim() == dim_,
                   "dimension mismatch appending '" + item.embedding.id + "'");
    } else {
      dim_ = item.embedding.dim();
    }
    require_data(!contains_id(item.embedding.id),
                 "duplicate id '" + item.embedding.id + "'");
    id_index_.emplace(item.embedding.id, members_.size());
    classes_.insert(item.label);
    members_.push_back(std::move(item));
  }

 private:
  std::vector<LabeledEmbedding> members_;
  std::unordered_map<std::string, std::size_t> id_index_;
  std::set<int> classes_;
  std::size_t dim_ = 0;
};

// Unlabeled observations. Per-member ground truth, when present, is meant for
// the label oracle and the evaluator only; selection strategies see just the
// embeddings.
class UnlabeledPool {
 public:
  UnlabeledPool() = default;

  UnlabeledPool(std::vector<Embedding> members,
                std::vector<std::optional<int>> truth_labels)
      : members_(std::move(members)), truth_(std::move(truth_labels)) {
    require_data(members_.size() == truth_.size(),
                 "pool members and truth labels differ in count");
    for (std::size_t i = 0; i < members_.size(); ++i) {
      check_embedding(members_[i]);
      if (i == 0) {
        dim_ = members_[0].dim();
      } else {
        require_data(members_[i].dim() == dim_,
                     "dimension mismatch at pool member '" + members_[i].id + "'");
      }
      auto [it, fresh] = id_index_.emplace(members_[i].id, i);
      (void)it;
      require_data(fresh, "duplicate id '" + members_[i].id + "'");
    }
  }

  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  std::size_t dim() const { return dim_; }
  const Embedding& operator[](std::size_t i) const { return members_[i]; }
  const std::vector<Embedding>& members() const { return members_; }

  const std::optional<int>& truth_label(std::size_t i) const {
    return truth_[i];
  }

  std::optional<std::size_t> index_of(const std::string& id) const {
    auto it = id_index_.find(id);
    if (it == id_index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<Embedding> members_;
  std::vector<std::optional<int>> truth_;
  std::unordered_map<std::string, std::size_t> id_index_;
  std::size_t dim_ = 0;
};

// True when pool member i belongs to a class outside `known`. Requires ground
// truth; callers without evaluator access have no business asking.
inline bool is_novel_truth(const UnlabeledPool& pool, std::size_t i,
                           const std::set<int>& known) {
  const auto& label = pool.truth_label(i);
  require_data(label.has_value(),
               "no ground-truth label for pool member '" + pool[i].id + "'");
  return known.count(*label) == 0;
}

struct DatasetSplit {
  LabeledSet train;
  UnlabeledPool observed;
  UnlabeledPool test;
  std::set<int> known_classes;
  std::set<int> novel_classes;

  bool observed_is_novel(std::size_t i) const {
    return is_novel_truth(observed, i, known_classes);
  }
  bool test_is_novel(std::size_t i) const {
    return is_novel_truth(test, i, known_classes);
  }

  void validate() const {
    const std::size_t d = train.dim();
    require_data(observed.empty() || observed.dim() == d,
                 "observed pool dimension differs from train");
    require_data(test.empty() || test.dim() == d,
                 "test pool dimension differs from train");
    for (const auto& m : train.members()) {
      require_data(novel_classes.count(m.label) == 0,
                   "train contains novel-class label " + std::to_string(m.label));
      require_data(known_classes.count(m.label) != 0,
                   "train label " + std::to_string(m.label) +
                       " missing from known_classes");
    }
    for (int c : known_classes) {
      require_data(novel_classes.count(c) == 0,
                   "class " + std::to_string(c) + " is both known and novel");
    }
    std::set<std::string> ids;
    auto add_id = [&ids](const std::string& id) {
      require_data(ids.insert(id).second, "id '" + id + "' appears in two sets");
    };
    for (const auto& m : train.members()) add_id(m.embedding.id);
    for (const auto& e : observed.members()) add_id(e.id);
    for (const auto& e : test.members()) add_id(e.id);
  }
};

struct Neighbor {
  std::size_t index;
  double distance;
};

// Exact k-nearest-neighbor search, ascending distance, ties broken by
// ascending member index.
inline std::vector<Neighbor> nearest_neighbors(const Embedding& query,
                                               const LabeledSet& set,
                                               std::size_t k) {
  require(k >= 1, "k must be positive");
  require(k <= set.size(), "k exceeds set size");
  require_data(query.dim() == set.dim(), "query dimension mismatch");
  std::vector<Neighbor> all(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    all[i] = {i, std::sqrt(squared_distance(query.vector,
                                            set[i].embedding.vector))};
  }
  const auto cmp = [](const Neighbor& a, const Neighbor& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.index < b.index;
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k),
                    all.end(), cmp);
  all.resize(k);
  return all;
}

}  // namespace openset
