#pragma once

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rankup/dataset.hpp"
#include "rankup/trainer.hpp"

namespace rankup {

// Where a dataset comes from. "synthetic" draws one of the built-in tasks,
// "csv" ingests a file. Either way a deterministic train/test split is made
// with data_seed, which stays fixed across protocol seeds so every method and
// seed sees the same test set.
struct DatasetConfig {
  std::string kind = "synthetic";
  SyntheticTask task = SyntheticTask::Sine;
  int n_samples = 1000;
  double noise_sigma = 0.1;
  std::string path;           // csv only
  std::string target_column;  // csv only
  std::uint64_t data_seed = 42;
  double test_fraction = 0.2;
};

struct OutputConfig {
  std::string dir;  // empty: resolved from --out / $RANKUP_OUT / ./out
  bool save_checkpoints = true;
  bool dump_pseudo_table = false;
};

struct SweepConfig {
  std::vector<std::string> methods;
  std::vector<int> label_budgets;
};

struct ExperimentConfig {
  int format_version = 1;
  std::string experiment = "experiment";
  DatasetConfig dataset;
  int n_labeled = 50;
  TrainConfig method;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  OutputConfig output;
  std::optional<SweepConfig> sweep;
};

/// Strict parse: unknown keys anywhere raise config_error naming the full
/// field path, as do type or range violations. Absent keys take the
/// documented defaults (docs/config.md).
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);

/// Canonical form with every default materialized; parse(to_json(c)) is the
/// identity on canonical configs.
nlohmann::json to_json(const ExperimentConfig& cfg);

Dataset make_dataset(const DatasetConfig& cfg);

/// Output directory precedence: --out flag, then config output.dir, then
/// $RANKUP_OUT/<experiment>, then ./out/<experiment>.
std::string resolve_experiment_dir(const std::string& cli_out, const ExperimentConfig& cfg);

/// Trains cfg.method over cfg.seeds and writes
///   <experiment_dir>/<method>/seed_<s>/{log.jsonl, model.ckpt[, pseudo_table.json]}
///   <experiment_dir>/<method>/summary.json
/// Refuses an existing method directory unless force. Partial per-seed
/// artifacts survive a later seed's failure. Returns the summary document.
nlohmann::json run_experiment(const ExperimentConfig& cfg, const std::string& experiment_dir,
                              bool force);

struct SweepCellResult {
  std::string method;
  int n_labeled = 0;
  bool ok = false;
  bool skipped = false;  // --resume found an existing summary
  std::string error;
  nlohmann::json summary;
};

struct SweepResult {
  std::vector<SweepCellResult> cells;
  bool all_ok() const;
};

/// Runs the methods x label_budgets grid under
/// <experiment_dir>/L<budget>/<method>/, skipping completed cells when resume
/// is set, with up to `workers` cells in flight. Failures are recorded per
/// cell and do not stop the sweep. Writes <experiment_dir>/sweep.csv and
/// <experiment_dir>/sweep_summary.json.
SweepResult sweep_experiment(const ExperimentConfig& cfg, const std::string& experiment_dir,
                             bool force, bool resume, int workers);

struct ReportTable {
  std::string text;
  std::string csv;
};

/// "mean±std" with two decimals, three when |mean| < 1; both parts share the
/// precision.
std::string format_mean_std(double mean, double stddev);

/// Scans results_dir recursively for summary.json files and renders one row
/// per (method, label budget) with mean±std cells; the best value per metric
/// column is flagged with '*'. MAE is lower-better, R2/SRCC higher-better.
ReportTable report_results(const std::string& results_dir);

}  // namespace rankup
