#pragma once

#include <optional>
#include <string>
#include <vector>

#include "adaptmix/tasks.hpp"
#include "adaptmix/trainer.hpp"

namespace adaptmix {

// Configuration error located by JSON pointer into the config document.
struct ConfigError : std::runtime_error {
  ConfigError(std::string pointer_, const std::string& message)
      : std::runtime_error(pointer_ + ": " + message), pointer(std::move(pointer_)) {}
  std::string pointer;
};

// Full experiment description: suite source, model shape, the
// method x budget x seed grid and every exposed hyperparameter.
struct ExperimentConfig {
  int schema_version = 1;
  // exactly one of the two suite sources
  std::optional<SuiteConfig> synthetic_suite;
  std::optional<std::string> manifest_path;
  std::string suite_id;  // defaults to "synthetic-<seed>" or the manifest id

  TinyLMConfig model;
  std::vector<Method> methods;
  std::vector<double> budget_fractions;
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "out";

  MetaHyper hyper;
  AdamWConfig adamw;
  double peak_lr = 0.05;
  long warmup_steps = 200;
  double floor_fraction = 0.1;
  double grad_clip = 1.0;
  std::size_t tasks_per_step = 6;
  std::size_t adapt_batch_size = 1;
  std::size_t adapt_accumulation_steps = 4;
  std::size_t sft_batch_size = 8;
  std::size_t sft_accumulation_steps = 8;
  std::size_t val_batch_size = 0;
  long log_interval_tokens = 0;
  bool adopt_probe = false;
  bool iid_sampling = false;
  long max_epochs = 0;
  std::vector<double> ablation_lambdas = {0.0, 1e-4, 1e-3};
};

// Parses and validates; the first problem is reported as a ConfigError
// with a JSON pointer to the offending field.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

// Materializes the suite named by the config (generated or loaded).
std::vector<TaskDataset> build_suite(const ExperimentConfig& config);

// One grid cell and what happened to it.
struct CellResult {
  Method method = Method::adapt;
  double budget_fraction = 0.0;
  std::uint64_t seed = 0;
  long budget_tokens = 0;
  std::string record_path;
  bool ok = false;
  std::string error;
};

struct GridOutcome {
  std::string suite_id;
  std::vector<CellResult> cells;
  std::string summary_csv_path;
  bool all_ok() const;
};

RunConfig cell_run_config(const ExperimentConfig& config, const std::vector<TaskDataset>& suite,
                          Method method, double budget_fraction, std::uint64_t seed);

// Executes every (method, budget, seed) cell, writing one record file per
// cell plus <out>/summary.csv. Failing cells are recorded and the rest of
// the grid continues. Cells may run on up to `workers` threads.
GridOutcome run_experiment_grid(const ExperimentConfig& config, unsigned workers = 1);

// Post-hoc analysis over a directory of record files: per-suite metrics
// CSV, loss-vs-tokens SVG per budget, mixture-trajectory SVG per adaptive
// run and a tokens-to-match bar chart CSV. Optionally a win-rate CSV for
// a user-supplied score table.
struct ReportOutcome {
  std::vector<std::string> csv_paths;
  std::vector<std::string> svg_paths;
};

ReportOutcome write_report(const std::string& records_dir, const std::string& out_dir,
                           const std::optional<std::string>& score_table_csv = std::nullopt);

// Entropy-weight ablation at fixed budget and seed: one adaptive run per
// lambda, a table-shaped CSV (lambda, n_eff, tokens_used_pct, entropy)
// and the validation-loss comparison SVG.
struct AblationRow {
  double lambda = 0.0;
  double final_n_eff = 0.0;
  double tokens_used_pct = 0.0;
  double final_entropy = 0.0;
  double final_mean_val_loss = 0.0;
  std::string record_path;
};

struct AblationOutcome {
  std::vector<AblationRow> rows;
  std::string csv_path;
  std::string svg_path;
};

AblationOutcome run_entropy_ablation(const ExperimentConfig& config);

// Applies the ADAPTMIX_SEED override, when set, to the seeds list.
void apply_seed_override_from_env(ExperimentConfig& config);

}  // namespace adaptmix
