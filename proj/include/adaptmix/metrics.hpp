#pragma once

#include <optional>
#include <string>
#include <vector>

#include "adaptmix/trainer.hpp"

namespace adaptmix {

// Sorted (tokens, loss) pairs extracted from a run record.
struct LossCurve {
  std::vector<std::pair<long, double>> points;

  void validate() const;  // strictly increasing tokens, >= 2 points
  static LossCurve from_record(const BudgetedRunRecord& record);
};

// Token-normalized trapezoidal area (average height) over the curve span.
double auc(const LossCurve& curve);

// auc(sft) / auc(adaptive); > 1 means the adaptive run is more efficient.
double auc_ratio(const LossCurve& sft, const LossCurve& aft);

// Smallest logged token count whose loss is <= threshold. No
// interpolation between log points anywhere: step-function reading.
std::optional<long> tokens_to_match(const LossCurve& aft, double best_supervised_loss);

double best_loss(const LossCurve& curve);

// Loss at the last logged point with tokens <= budget/2. Rejects curves
// that do not span half the budget.
double mid_budget_loss(const LossCurve& curve, long budget);

// method x benchmark score matrix, higher is better.
struct ScoreTable {
  std::vector<std::string> methods;
  std::vector<std::string> benchmarks;
  std::vector<std::vector<double>> scores;  // [method][benchmark]

  void validate() const;
  std::size_t method_index(const std::string& name) const;

  static ScoreTable from_csv_file(const std::string& path);
};

// Fraction of benchmarks where a matches or exceeds b (ties count for a).
double win_rate(const ScoreTable& table, const std::string& method_a, const std::string& method_b);
// Strict variant: only counts benchmarks where a is strictly ahead.
double win_rate_strict(const ScoreTable& table, const std::string& method_a, const std::string& method_b);

struct MixtureSummary {
  double final_n_eff = 0.0;
  double final_entropy = 0.0;
  // Trajectories of the k tasks with the highest final probability,
  // highest first: (task index, per-log-point p values).
  std::vector<std::pair<std::size_t, std::vector<double>>> top_trajectories;
};

MixtureSummary mixture_summary(const BudgetedRunRecord& record, std::size_t top_k = 10);

// Per-run analysis row emitted by the report command.
struct RunMetricsRow {
  std::string run_id;
  std::string method;
  long budget = 0;
  double auc_value = 0.0;
  std::optional<double> auc_ratio_vs_best_sft;
  std::optional<long> tokens_to_match_value;
  std::optional<double> mid_budget_loss_value;
  double final_n_eff = 0.0;
  double final_entropy = 0.0;
};

std::string metrics_csv(const std::vector<RunMetricsRow>& rows);
std::string win_rate_csv(const ScoreTable& table);

}  // namespace adaptmix
