#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "openset/active_learning.hpp"
#include "openset/error.hpp"
#include "openset/io.hpp"
#include "openset/kernel.hpp"
#include "openset/novelty.hpp"
#include "openset/rng.hpp"
#include "openset/split.hpp"
#include "openset/synthetic.hpp"

namespace openset {

enum class DataMode { synthetic, files, split };

inline DataMode parse_data_mode(std::string_view s) {
  if (s == "synthetic") return DataMode::synthetic;
  if (s == "files") return DataMode::files;
  if (s == "split") return DataMode::split;
  throw ConfigError("unknown data mode '" + std::string(s) + "'");
}

inline std::string to_string(DataMode m) {
  switch (m) {
    case DataMode::synthetic: return "synthetic";
    case DataMode::files: return "files";
    case DataMode::split: return "split";
  }
  throw InternalError("unreachable data mode");
}

// Flat key = value text. '#' starts a comment, blank lines are ignored,
// whitespace around keys and values is trimmed. Unknown keys are errors.
// Precedence: file < environment (OPENSET_<KEY>) < command-line --set.
class KeyValueConfig {
 public:
  static KeyValueConfig from_text(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
      ++ln;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      const auto trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      require(eq != std::string::npos,
              "config line " + std::to_string(ln) + " is not key = value");
      const std::string key = std::string(trim(trimmed.substr(0, eq)));
      const std::string value = std::string(trim(trimmed.substr(eq + 1)));
      require(!key.empty(), "empty key on config line " + std::to_string(ln));
      cfg.values_[key] = value;
    }
    return cfg;
  }

  void apply_environment(std::span<const std::string> known_keys) {
    for (const auto& key : known_keys) {
      std::string env_name = "OPENSET_";
      for (char c : key) {
        env_name.push_back(
            static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
      }
      if (const char* v = std::getenv(env_name.c_str())) values_[key] = v;
    }
  }

  void apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    require(eq != std::string::npos,
            "--set expects key=value, got '" + assignment + "'");
    values_[std::string(trim(assignment.substr(0, eq)))] =
        std::string(trim(assignment.substr(eq + 1)));
  }

  std::optional<std::string> get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    consumed_.insert(key);
    return it->second;
  }

  // Keys present in the config but never consumed by a typed getter.
  std::vector<std::string> unconsumed() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
      if (!consumed_.count(k)) out.push_back(k);
    }
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
      s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
      s.remove_suffix(1);
    }
    return s;
  }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
};

namespace detail {

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = s.substr(
        start, comma == std::string_view::npos ? std::string_view::npos
                                               : comma - start);
    std::size_t a = 0, b = piece.size();
    while (a < b && std::isspace(static_cast<unsigned char>(piece[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(piece[b - 1]))) --b;
    if (b > a) out.emplace_back(piece.substr(a, b - a));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

// Everything one experiment run needs, resolved from config + environment +
// flag overrides.
struct ExperimentConfig {
  DataMode data = DataMode::synthetic;
  FileFormat format = FileFormat::csv;
  std::string train_file, observed_file, test_file, data_file;

  MixtureConfig mixture;  // synthetic mode (seed filled per run seed)
  SplitOptions split_options;  // split mode (seed filled per run seed)

  double sigma = 0.0;  // required
  std::optional<std::size_t> neighbor_limit;

  std::vector<NoveltyMeasure> measures{NoveltyMeasure::nn_distance,
                                       NoveltyMeasure::density,
                                       NoveltyMeasure::entropy};
  double calibration_fraction = 0.2;

  std::vector<StrategyKind> strategies{StrategyKind::uldr, StrategyKind::random,
                                       StrategyKind::fnn, StrategyKind::kde};
  std::vector<double> budgets{0.02, 0.05, 0.1};
  std::size_t eval_every = 0;

  std::size_t kmeans_k_min = 2;
  std::size_t kmeans_k_max = 0;  // 0 = min(25, pool size / 2)
  std::size_t kmeans_restarts = 5;
  std::size_t kmeans_max_iter = 100;
  double kmeans_tol = 1e-10;
  std::vector<std::size_t> recall_ms{1, 2, 4, 8};

  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string out = "out";

  static const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "data", "format", "train_file", "observed_file", "test_file",
        "data_file", "n_classes", "per_class", "dim", "spread", "std",
        "fraction_known", "known_labels", "train_fraction", "observed_fraction",
        "sigma", "neighbor_limit", "measures", "calibration_fraction",
        "strategies", "budgets", "eval_every", "kmeans_k_min", "kmeans_k_max",
        "kmeans_restarts", "kmeans_max_iter", "kmeans_tol", "recall_ms",
        "seeds", "out"};
    return keys;
  }

  static ExperimentConfig from_kv(const KeyValueConfig& kv) {
    ExperimentConfig cfg;
    const auto get_double = [&kv](const std::string& key, double& target) {
      if (auto v = kv.get(key)) target = parse_double(*v, "config key " + key);
    };
    const auto get_size = [&kv](const std::string& key, std::size_t& target) {
      if (auto v = kv.get(key)) {
        const double d = parse_double(*v, "config key " + key);
        require(d >= 0 && d == std::floor(d),
                "config key " + key + " must be a non-negative integer");
        target = static_cast<std::size_t>(d);
      }
    };

    if (auto v = kv.get("data")) cfg.data = parse_data_mode(*v);
    if (auto v = kv.get("format")) cfg.format = parse_file_format(*v);
    if (auto v = kv.get("train_file")) cfg.train_file = *v;
    if (auto v = kv.get("observed_file")) cfg.observed_file = *v;
    if (auto v = kv.get("test_file")) cfg.test_file = *v;
    if (auto v = kv.get("data_file")) cfg.data_file = *v;

    get_size("n_classes", cfg.mixture.n_classes);
    get_size("per_class", cfg.mixture.per_class_count);
    get_size("dim", cfg.mixture.dim);
    get_double("spread", cfg.mixture.class_center_spread);
    get_double("std", cfg.mixture.within_class_std);
    if (auto v = kv.get("fraction_known")) {
      const double f = parse_double(*v, "config key fraction_known");
      cfg.mixture.fraction_known = f;
      cfg.split_options.fraction_known = f;
    }
    if (auto v = kv.get("known_labels")) {
      cfg.split_options.assignment = KnownAssignment::explicit_list;
      for (const auto& s : detail::split_list(*v)) {
        cfg.split_options.known_labels.push_back(parse_int(s, "known_labels"));
      }
    }
    get_double("train_fraction", cfg.split_options.train_fraction);
    get_double("observed_fraction", cfg.split_options.observed_fraction);

    get_double("sigma", cfg.sigma);
    if (auto v = kv.get("neighbor_limit")) {
      if (*v != "all") {
        const double d = parse_double(*v, "config key neighbor_limit");
        require(d >= 1 && d == std::floor(d),
                "neighbor_limit must be 'all' or a positive integer");
        cfg.neighbor_limit = static_cast<std::size_t>(d);
      }
    }

    if (auto v = kv.get("measures")) {
      cfg.measures.clear();
      for (const auto& s : detail::split_list(*v)) {
        cfg.measures.push_back(parse_novelty_measure(s));
      }
      require(!cfg.measures.empty(), "measures list is empty");
    }
    get_double("calibration_fraction", cfg.calibration_fraction);

    if (auto v = kv.get("strategies")) {
      cfg.strategies.clear();
      for (const auto& s : detail::split_list(*v)) {
        cfg.strategies.push_back(parse_strategy(s));
      }
      require(!cfg.strategies.empty(), "strategies list is empty");
    }
    if (auto v = kv.get("budgets")) {
      cfg.budgets.clear();
      for (const auto& s : detail::split_list(*v)) {
        cfg.budgets.push_back(parse_double(s, "budgets"));
      }
      require(!cfg.budgets.empty(), "budgets list is empty");
    }
    get_size("eval_every", cfg.eval_every);

    get_size("kmeans_k_min", cfg.kmeans_k_min);
    get_size("kmeans_k_max", cfg.kmeans_k_max);
    get_size("kmeans_restarts", cfg.kmeans_restarts);
    get_size("kmeans_max_iter", cfg.kmeans_max_iter);
    get_double("kmeans_tol", cfg.kmeans_tol);
    if (auto v = kv.get("recall_ms")) {
      cfg.recall_ms.clear();
      for (const auto& s : detail::split_list(*v)) {
        const int m = parse_int(s, "recall_ms");
        require(m >= 1, "recall_ms entries must be positive");
        cfg.recall_ms.push_back(static_cast<std::size_t>(m));
      }
      require(!cfg.recall_ms.empty(), "recall_ms list is empty");
    }

    if (auto v = kv.get("seeds")) {
      cfg.seeds.clear();
      for (const auto& s : detail::split_list(*v)) {
        const double d = parse_double(s, "seeds");
        require(d >= 0 && d == std::floor(d), "seeds must be non-negative integers");
        cfg.seeds.push_back(static_cast<std::uint64_t>(d));
      }
      require(!cfg.seeds.empty(), "seeds list is empty");
    }
    if (auto v = kv.get("out")) cfg.out = *v;

    const auto leftover = kv.unconsumed();
    require(leftover.empty(), "unknown config key '" + (leftover.empty()
                                                            ? std::string()
                                                            : leftover.front()) +
                                  "'");
    cfg.validate();
    return cfg;
  }

  void validate() const {
    require(sigma > 0.0, "config requires sigma > 0");
    require(calibration_fraction > 0.0 && calibration_fraction < 1.0,
            "calibration_fraction must be in (0, 1)");
    for (double b : budgets) {
      require(b >= 0.0 && b <= 1.0, "budgets must be fractions in [0, 1]");
    }
    require(kmeans_k_min >= 2, "kmeans_k_min must be at least 2");
    require(kmeans_restarts >= 1, "kmeans_restarts must be positive");
    if (data == DataMode::synthetic) mixture.validate();
    if (data == DataMode::files) {
      require(!data_file.empty() ||
                  (!train_file.empty() && !observed_file.empty() &&
                   !test_file.empty()),
              "files mode needs data_file or train/observed/test files");
    }
    if (data == DataMode::split) {
      require(!data_file.empty(), "split mode needs data_file");
    }
  }

  KernelParams kernel_params() const { return {sigma, neighbor_limit}; }

  // Canonical key=value rendering of every effective setting; the manifest
  // hash is derived from this plus the run seed.
  std::string canonical_string() const {
    std::ostringstream out_ss;
    out_ss << "calibration_fraction=" << format_double(calibration_fraction)
           << "\nbudgets=";
    for (std::size_t i = 0; i < budgets.size(); ++i) {
      out_ss << (i ? "," : "") << format_double(budgets[i]);
    }
    out_ss << "\ndata=" << to_string(data) << "\ndata_file=" << data_file
           << "\ndim=" << mixture.dim << "\neval_every=" << eval_every
           << "\nformat=" << (format == FileFormat::csv ? "csv" : "jsonl")
           << "\nfraction_known=" << format_double(mixture.fraction_known)
           << "\nkmeans_k_max=" << kmeans_k_max
           << "\nkmeans_k_min=" << kmeans_k_min
           << "\nkmeans_max_iter=" << kmeans_max_iter
           << "\nkmeans_restarts=" << kmeans_restarts
           << "\nkmeans_tol=" << format_double(kmeans_tol) << "\nknown_labels=";
    for (std::size_t i = 0; i < split_options.known_labels.size(); ++i) {
      out_ss << (i ? "," : "") << split_options.known_labels[i];
    }
    out_ss << "\nmeasures=";
    for (std::size_t i = 0; i < measures.size(); ++i) {
      out_ss << (i ? "," : "") << to_string(measures[i]);
    }
    out_ss << "\nn_classes=" << mixture.n_classes << "\nneighbor_limit="
           << (neighbor_limit ? std::to_string(*neighbor_limit) : "all")
           << "\nobserved_file=" << observed_file << "\nobserved_fraction="
           << format_double(split_options.observed_fraction)
           << "\nper_class=" << mixture.per_class_count << "\nrecall_ms=";
    for (std::size_t i = 0; i < recall_ms.size(); ++i) {
      out_ss << (i ? "," : "") << recall_ms[i];
    }
    out_ss << "\nseeds=";
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      out_ss << (i ? "," : "") << seeds[i];
    }
    out_ss << "\nsigma=" << format_double(sigma)
           << "\nspread=" << format_double(mixture.class_center_spread)
           << "\nstd=" << format_double(mixture.within_class_std)
           << "\nstrategies=";
    for (std::size_t i = 0; i < strategies.size(); ++i) {
      out_ss << (i ? "," : "") << to_string(strategies[i]);
    }
    out_ss << "\ntest_file=" << test_file
           << "\ntrain_file=" << train_file << "\ntrain_fraction="
           << format_double(split_options.train_fraction) << "\n";
    return out_ss.str();
  }

  std::string manifest_hash(std::string_view command, std::uint64_t seed) const {
    std::uint64_t h = fnv1a64(canonical_string());
    h ^= fnv1a64(command);
    h = h * 0x100000001b3ULL + seed;
    std::ostringstream ss;
    ss << std::hex << h;
    return ss.str();
  }
};

}  // namespace openset
