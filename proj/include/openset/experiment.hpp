#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "openset/active_learning.hpp"
#include "openset/config.hpp"
#include "openset/embedding.hpp"
#include "openset/io.hpp"
#include "openset/kmeans.hpp"
#include "openset/metrics.hpp"
#include "openset/novelty.hpp"
#include "openset/split.hpp"
#include "openset/synthetic.hpp"

namespace openset {

// Resolves the configured data source into a DatasetSplit. Synthetic data is
// generated per run seed; file-backed data is identical across seeds (the
// seed then only drives calibration subsampling and strategy streams).
inline DatasetSplit load_dataset(const ExperimentConfig& cfg,
                                 std::uint64_t seed) {
  switch (cfg.data) {
    case DataMode::synthetic: {
      MixtureConfig m = cfg.mixture;
      m.seed = seed;
      return generate_mixture(m);
    }
    case DataMode::files: {
      if (!cfg.data_file.empty()) {
        return split_from_records(load_records(cfg.data_file, cfg.format));
      }
      DatasetSplit split;
      split.train = to_labeled_set(load_records(cfg.train_file, cfg.format));
      split.known_classes = split.train.classes();
      split.observed = to_pool(load_records(cfg.observed_file, cfg.format));
      split.test = to_pool(load_records(cfg.test_file, cfg.format));
      const auto collect_novel = [&split](const UnlabeledPool& pool) {
        for (std::size_t i = 0; i < pool.size(); ++i) {
          const auto& label = pool.truth_label(i);
          if (label && split.known_classes.count(*label) == 0) {
            split.novel_classes.insert(*label);
          }
        }
      };
      collect_novel(split.observed);
      collect_novel(split.test);
      split.validate();
      return split;
    }
    case DataMode::split: {
      const auto records = load_records(cfg.data_file, cfg.format);
      std::vector<LabeledEmbedding> data;
      data.reserve(records.size());
      for (const auto& r : records) {
        require_data(r.label.has_value(),
                     "split mode needs labels; record '" + r.id + "' has none");
        data.push_back({{r.id, r.vector}, *r.label});
      }
      SplitOptions opt = cfg.split_options;
      opt.seed = seed;
      return split_known_novel(data, opt);
    }
  }
  throw InternalError("unreachable data mode");
}

// ---- novelty pipeline ----

struct NoveltyMeasureResult {
  NoveltyMeasure measure = NoveltyMeasure::nn_distance;
  double delta = 0.0;
  double auroc = 0.0;
  double aupr = 0.0;
  double f1 = 0.0;
  double open_set_accuracy = 0.0;
  std::vector<ScoreRow> scores;  // every observed member, pool order
  std::vector<CurvePoint> roc;   // evaluation remainder
  std::vector<CurvePoint> pr;
};

struct NoveltyRunResult {
  std::uint64_t seed = 0;
  std::size_t calibration_size = 0;
  std::size_t evaluation_size = 0;
  std::vector<NoveltyMeasureResult> rows;
};

namespace detail {

// Seeded subsample of size ceil(fraction * n): the first entries of a partial
// Fisher-Yates pass, returned sorted.
inline std::vector<std::size_t> calibration_indices(std::size_t n,
                                                    double fraction,
                                                    std::uint64_t seed) {
  std::size_t m = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(n)));
  m = std::min(m, n);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  auto rng = make_rng(seed, "calibration");
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + uniform_below(rng, n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

// Scores the observed pool with each configured measure, calibrates the
// threshold on the withheld fraction, and evaluates every metric on the
// remainder.
inline NoveltyRunResult run_novelty(const DatasetSplit& split,
                                    const ExperimentConfig& cfg,
                                    std::uint64_t seed) {
  const UnlabeledPool& pool = split.observed;
  require_data(pool.size() >= 2, "observed pool too small for calibration");
  const KernelParams params = cfg.kernel_params();

  const auto calib_idx =
      detail::calibration_indices(pool.size(), cfg.calibration_fraction, seed);
  require(calib_idx.size() < pool.size(),
          "calibration fraction leaves no evaluation examples");
  std::vector<bool> in_calib(pool.size(), false);
  for (std::size_t i : calib_idx) in_calib[i] = true;

  NoveltyRunResult result;
  result.seed = seed;
  result.calibration_size = calib_idx.size();
  result.evaluation_size = pool.size() - calib_idx.size();

  for (const auto measure : cfg.measures) {
    NoveltyMeasureResult row;
    row.measure = measure;
    row.scores.reserve(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
      row.scores.push_back({pool[i].id,
                            novelty_score(pool[i], split.train, params, measure),
                            split.observed_is_novel(i)});
    }

    std::vector<BinaryScore> calib_scores, eval_scores;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      (in_calib[i] ? calib_scores : eval_scores)
          .push_back({row.scores[i].score, row.scores[i].is_novel});
    }
    row.delta = calibrate_threshold(calib_scores);

    row.auroc = auroc(eval_scores);
    row.aupr = aupr(eval_scores);
    row.f1 = f1_at_threshold(eval_scores, row.delta);
    row.roc = roc_curve(eval_scores);
    row.pr = pr_curve(eval_scores);

    std::vector<OpenSetOutcome> outcomes;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (in_calib[i]) continue;
      const auto pred =
          open_set_predict(pool[i], split.train, params, measure, row.delta);
      const auto& truth = pool.truth_label(i);
      outcomes.push_back(
          {pred.label, truth ? *truth : 0, row.scores[i].is_novel});
    }
    row.open_set_accuracy = open_set_accuracy(outcomes);
    result.rows.push_back(std::move(row));
  }
  return result;
}

// ---- active-learning pipeline ----

struct BudgetEval {
  double fraction = 0.0;
  std::size_t b = 0;
  double novel_acc = 0.0;
  double combined_acc = 0.0;
  bool novel_degenerate = false;
  bool combined_degenerate = false;
};

struct ALCellResult {
  StrategyKind strategy = StrategyKind::uldr;
  std::uint64_t seed = 0;
  ALTrace trace;
  std::vector<BudgetEval> budget_evals;
  std::optional<std::string> abort_reason;
};

inline std::size_t budget_count(double fraction, std::size_t pool_size) {
  const auto b = static_cast<long long>(
      std::llround(fraction * static_cast<double>(pool_size)));
  return std::min<std::size_t>(static_cast<std::size_t>(std::max(0LL, b)),
                               pool_size);
}

// One (strategy, seed) cell: a single run at the largest configured budget
// with snapshots at every budget checkpoint. Greedy selection makes each
// smaller budget's trace a prefix of the larger one, so the checkpoint
// accuracies equal what separate runs would produce.
inline ALCellResult run_al_cell(const DatasetSplit& split,
                                const ExperimentConfig& cfg,
                                StrategyKind strategy, std::uint64_t seed) {
  ALCellResult cell;
  cell.strategy = strategy;
  cell.seed = seed;

  std::vector<std::size_t> checkpoints;
  for (double f : cfg.budgets) {
    checkpoints.push_back(budget_count(f, split.observed.size()));
  }

  ALConfig al_cfg;
  al_cfg.budget = checkpoints.empty()
                      ? 0
                      : *std::max_element(checkpoints.begin(), checkpoints.end());
  al_cfg.strategy = {strategy, derive_seed(seed, "strategy-stream",
                                           static_cast<std::uint64_t>(strategy))};
  al_cfg.params = cfg.kernel_params();
  al_cfg.eval_every = cfg.eval_every;
  al_cfg.snapshot_at = checkpoints;

  LabelOracle oracle(split.observed);
  auto run = run_active_learning(split, al_cfg, oracle);
  cell.trace = std::move(run.trace);
  cell.abort_reason = run.abort_reason;

  for (std::size_t i = 0; i < cfg.budgets.size(); ++i) {
    const std::size_t b = checkpoints[i];
    for (const auto& snap : cell.trace.snapshots) {
      if (snap.step == b) {
        cell.budget_evals.push_back({cfg.budgets[i], b, snap.novel_acc,
                                     snap.combined_acc, snap.novel_degenerate,
                                     snap.combined_degenerate});
        break;
      }
    }
  }
  return cell;
}

// ---- pseudo-label pipeline ----

struct PseudoRunResult {
  std::uint64_t seed = 0;
  PseudoLabels labels;
  std::map<std::size_t, double> novel_recall;  // m -> Recall@m on test novels
};

inline std::vector<std::size_t> kmeans_candidates(const ExperimentConfig& cfg,
                                                  std::size_t pool_size) {
  std::size_t k_max = cfg.kmeans_k_max;
  if (k_max == 0) k_max = std::min<std::size_t>(25, pool_size / 2);
  require(k_max >= cfg.kmeans_k_min,
          "kmeans candidate grid is empty for this pool size");
  std::vector<std::size_t> out;
  for (std::size_t k = cfg.kmeans_k_min; k <= k_max; ++k) out.push_back(k);
  return out;
}

inline PseudoRunResult run_pseudo(const DatasetSplit& split,
                                  const ExperimentConfig& cfg,
                                  std::uint64_t seed) {
  PseudoRunResult result;
  result.seed = seed;

  std::set<int> reserved = split.known_classes;
  reserved.insert(split.novel_classes.begin(), split.novel_classes.end());
  const auto candidates = kmeans_candidates(cfg, split.observed.size());
  result.labels = generate_pseudo_labels(
      split.observed, candidates, seed, reserved, cfg.kmeans_restarts,
      cfg.kmeans_max_iter, cfg.kmeans_tol);

  // Recall@m of the (frozen) embedding on the novel test subset.
  std::vector<Vec> points;
  std::vector<int> labels;
  for (std::size_t i = 0; i < split.test.size(); ++i) {
    if (!split.test_is_novel(i)) continue;
    points.push_back(split.test[i].vector);
    labels.push_back(*split.test.truth_label(i));
  }
  for (std::size_t m : cfg.recall_ms) {
    result.novel_recall[m] = recall_at_m(points, labels, m);
  }
  return result;
}

// ---- output emission ----

namespace detail {

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require_data(!ec, "cannot create directory '" + dir.string() + "'");
}

inline std::string seed_tag(std::uint64_t seed) {
  return "seed" + std::to_string(seed);
}

}  // namespace detail

// gen: per-seed dataset directory with the three embedding files plus a
// manifest describing counts and the class split.
inline void emit_gen(const std::filesystem::path& out_dir,
                     const ExperimentConfig& cfg, std::uint64_t seed,
                     const DatasetSplit& split) {
  const auto dir = out_dir / detail::seed_tag(seed);
  detail::ensure_dir(dir);
  const std::string manifest = cfg.manifest_hash("gen", seed);

  const auto write_set = [&](const std::string& name,
                             std::vector<EmbeddingRecord> records) {
    std::ostringstream ss;
    write_records(ss, records, cfg.format, manifest);
    const std::string ext = cfg.format == FileFormat::csv ? ".csv" : ".jsonl";
    write_file((dir / (name + ext)).string(), ss.str());
  };
  write_set("train", records_of(split.train, SplitTag::train));
  write_set("observed", records_of(split.observed, SplitTag::observed));
  write_set("test", records_of(split.test, SplitTag::test));

  nlohmann::json j;
  j["manifest"] = manifest;
  j["seed"] = seed;
  j["dim"] = split.train.dim();
  j["counts"] = {{"train", split.train.size()},
                 {"observed", split.observed.size()},
                 {"test", split.test.size()}};
  j["known_classes"] = split.known_classes;
  j["novel_classes"] = split.novel_classes;
  write_file((dir / "manifest.json").string(), j.dump(2) + "\n");
}

inline void emit_novelty(const std::filesystem::path& out_dir,
                         const ExperimentConfig& cfg,
                         const NoveltyRunResult& result) {
  detail::ensure_dir(out_dir);
  const std::string manifest = cfg.manifest_hash("novelty", result.seed);
  const std::string tag = detail::seed_tag(result.seed);

  nlohmann::json j;
  j["manifest"] = manifest;
  j["seed"] = result.seed;
  j["calibration_size"] = result.calibration_size;
  j["evaluation_size"] = result.evaluation_size;
  j["metrics"] = nlohmann::json::object();
  j["delta"] = nlohmann::json::object();
  for (const auto& row : result.rows) {
    const std::string name = to_string(row.measure);
    j["metrics"][name] = {{"auroc", row.auroc},
                          {"aupr", row.aupr},
                          {"f1", row.f1},
                          {"open_set_accuracy", row.open_set_accuracy}};
    j["delta"][name] = json_double(row.delta);

    std::ostringstream scores_ss;
    write_score_csv(scores_ss, row.scores, manifest);
    write_file((out_dir / ("scores_" + name + "_" + tag + ".csv")).string(),
               scores_ss.str());
    std::ostringstream roc_ss, pr_ss;
    write_curve_csv(roc_ss, row.roc, manifest);
    write_curve_csv(pr_ss, row.pr, manifest);
    write_file((out_dir / ("roc_" + name + "_" + tag + ".csv")).string(),
               roc_ss.str());
    write_file((out_dir / ("pr_" + name + "_" + tag + ".csv")).string(),
               pr_ss.str());
  }
  write_file((out_dir / ("novelty_" + tag + ".json")).string(),
             j.dump(2) + "\n");
}

inline void emit_al_traces(const std::filesystem::path& out_dir,
                           const ExperimentConfig& cfg,
                           const ALCellResult& cell) {
  detail::ensure_dir(out_dir);
  const std::string manifest = cfg.manifest_hash("al", cell.seed);
  std::ostringstream ss;
  write_trace_jsonl(ss, cell.trace, manifest);
  write_file((out_dir / ("al_trace_" + to_string(cell.strategy) + "_" +
                         detail::seed_tag(cell.seed) + ".jsonl"))
                 .string(),
             ss.str());
}

// Mean accuracy across seeds per (strategy, budget), plus a JSON summary with
// the per-seed values.
inline void emit_al_summary(const std::filesystem::path& out_dir,
                            const ExperimentConfig& cfg,
                            const std::vector<ALCellResult>& cells) {
  detail::ensure_dir(out_dir);
  const std::string manifest = cfg.manifest_hash("al", 0);

  std::ostringstream csv;
  csv << "# manifest=" << manifest << "\n";
  csv << "strategy,budget,b,novel_acc_mean,combined_acc_mean\n";
  nlohmann::json j;
  j["manifest"] = manifest;
  j["cells"] = nlohmann::json::array();
  for (const auto& cell : cells) {
    nlohmann::json c;
    c["strategy"] = to_string(cell.strategy);
    c["seed"] = cell.seed;
    if (cell.abort_reason) c["abort_reason"] = *cell.abort_reason;
    c["budgets"] = nlohmann::json::array();
    for (const auto& be : cell.budget_evals) {
      c["budgets"].push_back({{"fraction", be.fraction},
                              {"b", be.b},
                              {"novel_acc", be.novel_acc},
                              {"combined_acc", be.combined_acc},
                              {"novel_degenerate", be.novel_degenerate},
                              {"combined_degenerate", be.combined_degenerate}});
    }
    j["cells"].push_back(std::move(c));
  }

  for (const auto strategy : cfg.strategies) {
    for (std::size_t bi = 0; bi < cfg.budgets.size(); ++bi) {
      double novel_sum = 0.0, combined_sum = 0.0;
      std::size_t n = 0, b = 0;
      for (const auto& cell : cells) {
        if (cell.strategy != strategy) continue;
        if (bi >= cell.budget_evals.size()) continue;
        novel_sum += cell.budget_evals[bi].novel_acc;
        combined_sum += cell.budget_evals[bi].combined_acc;
        b = cell.budget_evals[bi].b;
        ++n;
      }
      if (n == 0) continue;
      csv << to_string(strategy) << ',' << format_double(cfg.budgets[bi]) << ','
          << b << ',' << format_double(novel_sum / static_cast<double>(n))
          << ',' << format_double(combined_sum / static_cast<double>(n))
          << "\n";
    }
  }
  write_file((out_dir / "al_curves.csv").string(), csv.str());
  write_file((out_dir / "al_summary.json").string(), j.dump(2) + "\n");
}

inline void emit_pseudo(const std::filesystem::path& out_dir,
                        const ExperimentConfig& cfg, const DatasetSplit& split,
                        const PseudoRunResult& result) {
  detail::ensure_dir(out_dir);
  const std::string manifest = cfg.manifest_hash("pseudo", result.seed);
  const std::string tag = detail::seed_tag(result.seed);

  std::ostringstream ss;
  write_pseudo_csv(ss, split.observed, result.labels.labels, manifest);
  write_file((out_dir / ("pseudo_labels_" + tag + ".csv")).string(), ss.str());

  nlohmann::json j;
  j["manifest"] = manifest;
  j["seed"] = result.seed;
  j["k"] = result.labels.k;
  j["silhouette"] = result.labels.silhouette;
  j["label_offset"] = result.labels.offset;
  j["novel_recall"] = nlohmann::json::object();
  for (const auto& [m, r] : result.novel_recall) {
    j["novel_recall"][std::to_string(m)] = r;
  }
  write_file((out_dir / ("pseudo_report_" + tag + ".json")).string(),
             j.dump(2) + "\n");
}

inline void emit_pseudo_summary(const std::filesystem::path& out_dir,
                                const ExperimentConfig& cfg,
                                const std::vector<PseudoRunResult>& runs) {
  detail::ensure_dir(out_dir);
  nlohmann::json j;
  j["manifest"] = cfg.manifest_hash("pseudo", 0);
  j["seeds"] = nlohmann::json::array();
  j["k_per_seed"] = nlohmann::json::array();
  double sil_sum = 0.0;
  std::map<std::size_t, double> recall_sums;
  for (const auto& r : runs) {
    j["seeds"].push_back(r.seed);
    j["k_per_seed"].push_back(r.labels.k);
    sil_sum += r.labels.silhouette;
    for (const auto& [m, v] : r.novel_recall) recall_sums[m] += v;
  }
  const double n = static_cast<double>(runs.size());
  j["silhouette_mean"] = sil_sum / n;
  j["novel_recall_mean"] = nlohmann::json::object();
  for (const auto& [m, v] : recall_sums) {
    j["novel_recall_mean"][std::to_string(m)] = v / n;
  }
  write_file((out_dir / "pseudo_summary.json").string(), j.dump(2) + "\n");
}

}  // namespace openset
