// openset: experiment harness for metric-space open-set recognition and
// active learning over embedding files or synthetic mixtures.
//
// Subcommands:
//   gen      write synthetic dataset files (one directory per seed)
//   novelty  novelty detection metrics + ROC/PR curves on the observed set
//   al       budgeted active-learning runs with per-budget test accuracy
//   pseudo   unsupervised pseudo-labels + Recall@m report
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal
// invariant violation.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "openset/openset.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out_override;
  bool force = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config file")
      ->required();
  cmd->add_option("--set", args.overrides,
                  "override a config key, e.g. --set sigma=10 (repeatable)");
  cmd->add_option("--seed", args.seed, "run a single seed instead of the list");
  cmd->add_option("--out", args.out_override, "output directory override");
  cmd->add_flag("--force", args.force, "allow writing into a non-empty directory");
}

openset::ExperimentConfig load_config(const CommonArgs& args) {
  auto kv = openset::KeyValueConfig::from_text(openset::read_file(args.config_path));
  kv.apply_environment(openset::ExperimentConfig::known_keys());
  for (const auto& o : args.overrides) kv.apply_override(o);
  auto cfg = openset::ExperimentConfig::from_kv(kv);
  if (args.seed) cfg.seeds = {*args.seed};
  if (!args.out_override.empty()) cfg.out = args.out_override;
  return cfg;
}

void check_out_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && fs::is_directory(dir) && !fs::is_empty(dir) && !force) {
    throw openset::ConfigError("output directory '" + dir.string() +
                               "' is not empty (use --force to overwrite)");
  }
}

int cmd_gen(const CommonArgs& args) {
  const auto cfg = load_config(args);
  openset::require(cfg.data == openset::DataMode::synthetic,
                   "gen requires data = synthetic");
  check_out_dir(cfg.out, args.force);
  for (const auto seed : cfg.seeds) {
    const auto split = openset::load_dataset(cfg, seed);
    openset::emit_gen(cfg.out, cfg, seed, split);
    std::cout << "gen: seed " << seed << " -> " << (fs::path(cfg.out) / ("seed" + std::to_string(seed))).string()
              << " (train " << split.train.size() << ", observed "
              << split.observed.size() << ", test " << split.test.size() << ")\n";
  }
  return 0;
}

int cmd_novelty(const CommonArgs& args) {
  const auto cfg = load_config(args);
  check_out_dir(cfg.out, args.force);
  for (const auto seed : cfg.seeds) {
    const auto split = openset::load_dataset(cfg, seed);
    const auto result = openset::run_novelty(split, cfg, seed);
    openset::emit_novelty(cfg.out, cfg, result);
    for (const auto& row : result.rows) {
      std::cout << "novelty: seed " << seed << ' '
                << openset::to_string(row.measure) << " auroc="
                << openset::format_double(row.auroc) << " aupr="
                << openset::format_double(row.aupr) << " f1="
                << openset::format_double(row.f1) << " acc="
                << openset::format_double(row.open_set_accuracy) << "\n";
    }
  }
  return 0;
}

int cmd_al(const CommonArgs& args) {
  const auto cfg = load_config(args);
  check_out_dir(cfg.out, args.force);
  std::vector<openset::ALCellResult> cells;
  for (const auto seed : cfg.seeds) {
    const auto split = openset::load_dataset(cfg, seed);
    for (const auto strategy : cfg.strategies) {
      auto cell = openset::run_al_cell(split, cfg, strategy, seed);
      openset::emit_al_traces(cfg.out, cfg, cell);
      std::cout << "al: " << openset::to_string(strategy) << " seed " << seed
                << " queries=" << cell.trace.steps.size();
      if (cell.abort_reason) std::cout << " aborted: " << *cell.abort_reason;
      std::cout << "\n";
      cells.push_back(std::move(cell));
    }
  }
  openset::emit_al_summary(cfg.out, cfg, cells);
  return 0;
}

int cmd_pseudo(const CommonArgs& args) {
  const auto cfg = load_config(args);
  check_out_dir(cfg.out, args.force);
  std::vector<openset::PseudoRunResult> runs;
  for (const auto seed : cfg.seeds) {
    const auto split = openset::load_dataset(cfg, seed);
    auto run = openset::run_pseudo(split, cfg, seed);
    openset::emit_pseudo(cfg.out, cfg, split, run);
    std::cout << "pseudo: seed " << seed << " k=" << run.labels.k
              << " silhouette=" << openset::format_double(run.labels.silhouette)
              << "\n";
    runs.push_back(std::move(run));
  }
  openset::emit_pseudo_summary(cfg.out, cfg, runs);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "metric-space open-set recognition and active-learning toolkit"};
  app.require_subcommand(1);

  CommonArgs gen_args, novelty_args, al_args, pseudo_args;
  auto* gen = app.add_subcommand("gen", "generate synthetic dataset files");
  add_common(gen, gen_args);
  auto* novelty =
      app.add_subcommand("novelty", "novelty detection and open-set metrics");
  add_common(novelty, novelty_args);
  auto* al = app.add_subcommand("al", "active-learning query-strategy runs");
  add_common(al, al_args);
  auto* pseudo =
      app.add_subcommand("pseudo", "k-means pseudo-labels and Recall@m");
  add_common(pseudo, pseudo_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_args);
    if (novelty->parsed()) return cmd_novelty(novelty_args);
    if (al->parsed()) return cmd_al(al_args);
    if (pseudo->parsed()) return cmd_pseudo(pseudo_args);
    std::cerr << "no subcommand given\n";
    return 1;
  } catch (const openset::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const openset::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
