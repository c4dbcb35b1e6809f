#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adaptmix/mixture.hpp"
#include "adaptmix/model.hpp"
#include "adaptmix/optim.hpp"
#include "adaptmix/tasks.hpp"

namespace adaptmix {

enum class Method { adapt, sft_uniform, sft_proportional };

const char* method_name(Method m);
std::optional<Method> method_from_name(const std::string& name);

struct RunConfig {
  Method method = Method::adapt;
  long budget_tokens = 0;
  std::string suite_id;
  TinyLMConfig model;
  MetaHyper hyper;  // adapt only
  AdamWConfig adamw;
  double peak_lr = 0.05;
  long warmup_steps = 200;
  double floor_fraction = 0.1;
  double grad_clip = 1.0;          // model parameters; logits clip lives in hyper
  std::size_t tasks_per_step = 6;  // adapt only
  std::size_t batch_size = 1;
  std::size_t val_batch_size = 0;  // 0 -> batch_size
  std::size_t accumulation_steps = 4;
  long log_interval_tokens = 0;  // 0 -> max(budget/200, one iteration)
  bool adopt_probe = false;      // literal theta <- theta' instead of the AdamW path
  bool iid_sampling = false;
  long max_epochs = 0;  // 0 -> unlimited; exceeding it only sets a flag
  std::uint64_t seed = 0;

  void validate(std::size_t num_tasks) const;
};

// Monotone counter of non-padding training tokens against the budget.
struct BudgetCounter {
  long tokens_used = 0;
  long budget = 0;

  void add(long n);
  bool exhausted() const { return tokens_used >= budget; }
};

struct CurvePoint {
  long tokens = 0;
  double mean_val_loss = 0.0;        // uniform mean over all T tasks
  std::vector<double> val_losses;    // per task
  std::vector<double> p;             // mixture snapshot (static q for SFT)
  double entropy = 0.0;
  double n_eff = 0.0;
  double lr = 0.0;
};

struct BudgetedRunRecord {
  int format_version = 1;
  RunConfig config;
  std::vector<CurvePoint> points;
  long total_tokens = 0;
  std::uint64_t params_digest = 0;
  double wall_seconds = 0.0;
  long iterations = 0;
  bool epoch_limit_hit = false;
  // Per-iteration train-token increments; an independent recount path for
  // the budget-accounting checks. Not serialized.
  std::vector<long> iteration_train_tokens;
};

// theta' = theta - gamma * sum_i p_i g_i ; theta is left untouched.
std::vector<double> probe_step(std::span<const double> theta, const std::vector<double>& p,
                               const std::vector<std::vector<double>>& grads, double gamma);

// The one-step bilevel loop: per meta-iteration, an active task subset is
// drawn, per-task train gradients feed a differentiable probe step, the
// validation losses under the probed parameters drive the logits update,
// and the durable parameter update runs through AdamW on the mixed loss.
// Stops once the token budget is spent.
BudgetedRunRecord run_adapt(const RunConfig& config, const std::vector<TaskDataset>& suite);

// Static-mixture baselines: each micro-step samples a task from the fixed
// distribution, gradients accumulate over accumulation_steps, AdamW steps
// with the shared schedule. Same budget accounting and logging cadence.
BudgetedRunRecord run_sft(const RunConfig& config, const std::vector<TaskDataset>& suite);

BudgetedRunRecord run_method(const RunConfig& config, const std::vector<TaskDataset>& suite);

// Iteration-bounded mirror of the adapt loop over the analytic quadratic
// task family: exact gradients, no token accounting. Used to pin the
// mixture dynamics against closed-form oracles.
struct QuadraticAdaptResult {
  MixtureState mixture;
  std::vector<double> theta;
  std::vector<std::vector<double>> p_history;
};

QuadraticAdaptResult adapt_quadratic(const std::vector<QuadraticTaskSpec>& tasks, const MetaHyper& hyper,
                                     std::size_t iterations, double model_lr, std::uint64_t seed);

std::uint64_t digest_params(std::span<const double> theta);

}  // namespace adaptmix
