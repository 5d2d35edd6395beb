#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace deeprec {

struct GridPoint {
  std::string label;  // optional; derived from the other fields when empty
  std::string architecture = "n,128,128,128,n";
  std::string activation = "selu";
  std::optional<double> dropout;  // overrides the dp(p) token when set
  double learning_rate = 0.001;
  int refeed = 0;
  bool tied = false;

  /// Canonical key used in summary tables.
  std::string key() const;
};

struct AblationPlan {
  std::string name;
  std::vector<GridPoint> grid;
  std::string train_data;
  std::string eval_data;  // may be empty
  std::vector<std::uint64_t> seeds;
  std::string output_dir;
  int epochs = 30;
  std::size_t batch_size = 128;
  double momentum = 0.9;
  int eval_every = 1;
  int workers = 1;

  void validate() const;
};

/// Plan file: {"name", "dataset": "<split dir>" | {"train", "eval"}, "seeds",
/// "output_dir", "grid": [{"arch", "activation", "dropout", "lr", "refeed",
/// "tied", "label"}], plus optional "epochs", "batch_size", "momentum",
/// "eval_every", "workers"}. Relative paths resolve against the plan file.
AblationPlan load_ablation_plan(const std::string& path);
AblationPlan parse_ablation_plan(const std::string& json_text, const std::string& base_dir = ".");

/// Arguments (after the program name) for one `train` child run.
std::vector<std::string> train_arguments(const AblationPlan& plan, const GridPoint& point,
                                         std::uint64_t seed, const std::string& metrics_path);

struct RunOutcome {
  std::string config;
  std::uint64_t seed = 0;
  int exit_code = 0;
  std::string metrics_path;
  std::string log_path;
};

struct AblationSummary {
  std::vector<RunOutcome> runs;
  std::string summary_csv;  // plan,config,seed,epoch,train_rmse,valid_rmse
  std::string long_csv;     // plan,config,seed,epoch,metric,value
  std::string runs_csv;     // plan,config,seed,status,exit_code,best_valid_rmse
};

/// Runs every (grid point, seed) as a child `train` process of `executable`,
/// at most plan.workers at a time, and writes summary.csv, long.csv and
/// runs.csv into plan.output_dir. Failed children are recorded, not fatal.
AblationSummary run_ablation(const AblationPlan& plan, const std::string& executable);

/// Aggregation step alone, from finished runs' metric files.
AblationSummary summarize_runs(const AblationPlan& plan, std::vector<RunOutcome> runs);

}  // namespace deeprec
