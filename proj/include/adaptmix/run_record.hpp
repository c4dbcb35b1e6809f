#pragma once

#include <string>

#include "adaptmix/trainer.hpp"

namespace adaptmix {

// Run-record files are JSON lines:
//   line 1   header  {"format_version": .., "config": {..}}
//   lines 2+ curve points {"tokens", "mean_val_loss", "val_losses",
//            "p", "entropy", "n_eff", "lr"}
//   last     footer {"total_tokens", "params_digest", "wall_seconds",
//            "iterations", "epoch_limit_hit"}
void write_run_record(const BudgetedRunRecord& record, const std::string& path);
BudgetedRunRecord read_run_record(const std::string& path);

std::string run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const std::string& json_text);

// Byte comparison of two record files with the footer's wall-clock field
// masked out.
bool records_identical_modulo_wallclock(const std::string& path_a, const std::string& path_b);

}  // namespace adaptmix
