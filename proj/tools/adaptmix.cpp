#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "adaptmix/experiment.hpp"

namespace {

int cmd_run(const std::string& config_path, unsigned workers, long log_interval,
            const std::string& out_override) {
  adaptmix::ExperimentConfig cfg = adaptmix::load_experiment_config(config_path);
  adaptmix::apply_seed_override_from_env(cfg);
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (log_interval > 0) cfg.log_interval_tokens = log_interval;

  const adaptmix::GridOutcome outcome = adaptmix::run_experiment_grid(cfg, workers);
  for (const adaptmix::CellResult& cell : outcome.cells) {
    if (cell.ok) {
      std::cout << "ok    " << adaptmix::method_name(cell.method) << " budget=" << cell.budget_fraction
                << " seed=" << cell.seed << " tokens=" << cell.budget_tokens << " -> "
                << cell.record_path << "\n";
    } else {
      std::cout << "fail  " << adaptmix::method_name(cell.method) << " budget=" << cell.budget_fraction
                << " seed=" << cell.seed << ": " << cell.error << "\n";
    }
  }
  std::cout << "summary: " << outcome.summary_csv_path << "\n";
  return outcome.all_ok() ? 0 : 1;
}

int cmd_report(const std::string& records_dir, const std::string& out_override,
               const std::string& scores_path) {
  const std::string out_dir = out_override.empty() ? records_dir : out_override;
  const std::optional<std::string> scores =
      scores_path.empty() ? std::nullopt : std::optional<std::string>(scores_path);
  const adaptmix::ReportOutcome outcome = adaptmix::write_report(records_dir, out_dir, scores);
  for (const std::string& p : outcome.csv_paths) std::cout << "csv: " << p << "\n";
  for (const std::string& p : outcome.svg_paths) std::cout << "svg: " << p << "\n";
  return 0;
}

int cmd_ablate(const std::string& config_path, long log_interval, const std::string& out_override) {
  adaptmix::ExperimentConfig cfg = adaptmix::load_experiment_config(config_path);
  adaptmix::apply_seed_override_from_env(cfg);
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (log_interval > 0) cfg.log_interval_tokens = log_interval;

  const adaptmix::AblationOutcome outcome = adaptmix::run_entropy_ablation(cfg);
  std::printf("%-10s %-10s %-16s %-10s %-10s\n", "lambda", "n_eff", "tokens_used_pct", "entropy",
              "val_loss");
  for (const adaptmix::AblationRow& row : outcome.rows) {
    std::printf("%-10g %-10.4f %-16.1f %-10.4f %-10.4f\n", row.lambda, row.final_n_eff,
                row.tokens_used_pct, row.final_entropy, row.final_mean_val_loss);
  }
  std::cout << "csv: " << outcome.csv_path << "\nsvg: " << outcome.svg_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budget-constrained multi-task training with learned task mixtures"};
  app.require_subcommand(1);

  unsigned workers = 1;
  long log_interval = 0;
  std::string out_dir;
  app.add_option("--workers", workers, "Concurrent grid cells")->capture_default_str();
  app.add_option("--log-interval-tokens", log_interval, "Curve-point cadence in tokens");
  app.add_option("--out", out_dir, "Output directory override");

  std::string run_config;
  CLI::App* run = app.add_subcommand("run", "Execute a method x budget x seed grid");
  run->fallthrough();
  run->add_option("config", run_config, "Experiment config (JSON)")->required();

  std::string report_dir;
  std::string scores_path;
  CLI::App* report = app.add_subcommand("report", "Summarize a directory of run records");
  report->fallthrough();
  report->add_option("records", report_dir, "Directory containing .runlog files")->required();
  report->add_option("--scores", scores_path, "Score table CSV for win-rate analysis");

  std::string ablate_config;
  CLI::App* ablate = app.add_subcommand("ablate-entropy", "Entropy-weight ablation runs");
  ablate->fallthrough();
  ablate->add_option("config", ablate_config, "Experiment config (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_config, workers, log_interval, out_dir);
    if (report->parsed()) return cmd_report(report_dir, out_dir, scores_path);
    if (ablate->parsed()) return cmd_ablate(ablate_config, log_interval, out_dir);
  } catch (const adaptmix::ConfigError& e) {
    std::cerr << "config error at " << (e.pointer.empty() ? "/" : e.pointer) << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
