#include "adaptmix/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace adaptmix {

const char* method_name(Method m) {
  switch (m) {
    case Method::adapt: return "adapt";
    case Method::sft_uniform: return "sft_uniform";
    case Method::sft_proportional: return "sft_proportional";
  }
  return "?";
}

std::optional<Method> method_from_name(const std::string& name) {
  if (name == "adapt") return Method::adapt;
  if (name == "sft_uniform") return Method::sft_uniform;
  if (name == "sft_proportional") return Method::sft_proportional;
  return std::nullopt;
}

void RunConfig::validate(std::size_t num_tasks) const {
  if (budget_tokens <= 0) throw std::invalid_argument("RunConfig: budget_tokens must be positive");
  model.validate();
  adamw.validate();
  if (method == Method::adapt) {
    hyper.validate();
    if (tasks_per_step == 0 || tasks_per_step > num_tasks) {
      throw std::invalid_argument("RunConfig: tasks_per_step " + std::to_string(tasks_per_step) +
                                  " for a suite of " + std::to_string(num_tasks) + " tasks");
    }
  }
  if (!(peak_lr > 0.0)) throw std::invalid_argument("RunConfig: peak_lr must be positive");
  if (warmup_steps < 0) throw std::invalid_argument("RunConfig: warmup_steps must be >= 0");
  if (!(floor_fraction > 0.0 && floor_fraction <= 1.0)) {
    throw std::invalid_argument("RunConfig: floor_fraction must be in (0, 1]");
  }
  if (grad_clip < 0.0) throw std::invalid_argument("RunConfig: grad_clip must be >= 0");
  if (batch_size == 0) throw std::invalid_argument("RunConfig: batch_size must be positive");
  if (accumulation_steps == 0) throw std::invalid_argument("RunConfig: accumulation_steps must be positive");
  if (log_interval_tokens < 0) throw std::invalid_argument("RunConfig: log_interval_tokens must be >= 0");
  if (max_epochs < 0) throw std::invalid_argument("RunConfig: max_epochs must be >= 0");
}

void BudgetCounter::add(long n) {
  if (n < 0) throw std::invalid_argument("BudgetCounter: negative token increment");
  tokens_used += n;
}

std::vector<double> probe_step(std::span<const double> theta, const std::vector<double>& p,
                               const std::vector<std::vector<double>>& grads, double gamma) {
  if (p.size() != grads.size()) throw std::invalid_argument("probe_step: p/grads size mismatch");
  std::vector<double> out(theta.begin(), theta.end());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (grads[i].size() != theta.size()) {
      throw std::invalid_argument("probe_step: gradient dimension mismatch at task " + std::to_string(i));
    }
    const double w = gamma * p[i];
    for (std::size_t d = 0; d < theta.size(); ++d) out[d] -= w * grads[i][d];
  }
  return out;
}

std::uint64_t digest_params(std::span<const double> theta) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const double x : theta) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(x));
    std::memcpy(&bits, &x, sizeof(bits));
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffULL;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

namespace {

// Shared machinery of the budgeted loops: model state, AdamW with the
// token-bridged cosine schedule, per-task samplers and the logging sweep.
class BudgetedLoop {
 public:
  BudgetedLoop(const RunConfig& cfg, const std::vector<TaskDataset>& suite)
      : cfg_(cfg), suite_(suite), layout_(lm_init(cfg.model)), opt_(OptimState::init(0)) {
    cfg.validate(suite.size());
    if (suite.size() < 2) throw std::invalid_argument("run: suite must have at least 2 tasks");
    for (const TaskDataset& ds : suite) ds.validate();

    theta_ = layout_.flatten();
    opt_ = OptimState::init(theta_.size());
    counter_.budget = cfg.budget_tokens;

    const bool iid = cfg.iid_sampling;
    for (const TaskDataset& ds : suite) {
      train_samplers_.emplace_back(ds, Split::train, derive_stream(cfg.seed, "train/" + ds.task_id), iid);
      metaval_samplers_.emplace_back(ds, Split::val, derive_stream(cfg.seed, "metaval/" + ds.task_id), iid);
      logval_samplers_.emplace_back(ds, Split::val, derive_stream(cfg.seed, "logval/" + ds.task_id), iid);
    }

    record_.config = cfg;
    log_interval_ = cfg.log_interval_tokens > 0 ? cfg.log_interval_tokens
                                                : std::max<long>(cfg.budget_tokens / 200, 1);
  }

  std::size_t val_batch_size(std::size_t task) const {
    const std::size_t wanted = cfg_.val_batch_size > 0 ? cfg_.val_batch_size : cfg_.batch_size;
    (void)task;
    return wanted;
  }

  LossGrad train_loss_grad(std::size_t task, long* iteration_tokens) {
    const TokenBatch batch = sample_batch(suite_[task], Split::train, cfg_.batch_size, train_samplers_[task]);
    LossGrad lg = lm_loss_and_grad(layout_, theta_, cfg_.model, batch);
    if (!std::isfinite(lg.loss)) {
      throw std::runtime_error("run: non-finite training loss on task '" + suite_[task].task_id +
                               "' at iteration " + std::to_string(record_.iterations));
    }
    *iteration_tokens += lg.nonpad_tokens;
    return lg;
  }

  // Validation evaluations are free: their tokens never touch the counter.
  LossGrad val_loss_grad(std::size_t task, std::span<const double> at) {
    const TokenBatch batch =
        sample_batch(suite_[task], Split::val, val_batch_size(task), metaval_samplers_[task]);
    LossGrad lg = lm_loss_and_grad(layout_, at, cfg_.model, batch);
    if (!std::isfinite(lg.loss)) {
      throw std::runtime_error("run: non-finite validation loss on task '" + suite_[task].task_id +
                               "' at iteration " + std::to_string(record_.iterations));
    }
    return lg;
  }

  // One AdamW step with the schedule bridged from tokens to steps: the
  // expected tokens per optimizer step is measured over the first 10
  // steps, then total_steps is frozen at budget / average.
  void optimizer_update(std::vector<double> grad, long tokens_this_step) {
    clip_global_norm(grad, cfg_.grad_clip);
    const long step = opt_.step + 1;
    if (!sched_frozen_) {
      measured_tokens_ += tokens_this_step;
      ++measured_steps_;
      if (measured_steps_ >= 10 || step > cfg_.warmup_steps) freeze_schedule();
    }
    last_lr_ = lr_for_step(step);
    optimizer_step(theta_, grad, opt_, cfg_.adamw, last_lr_);
  }

  void log_if_due(const std::vector<double>& p_snapshot, bool force = false) {
    if (!force && counter_.tokens_used < next_log_tokens_) return;
    if (!record_.points.empty() && record_.points.back().tokens == counter_.tokens_used) return;
    CurvePoint pt;
    pt.tokens = counter_.tokens_used;
    pt.val_losses.reserve(suite_.size());
    for (std::size_t i = 0; i < suite_.size(); ++i) {
      const TokenBatch batch = sample_batch(suite_[i], Split::val, val_batch_size(i), logval_samplers_[i]);
      pt.val_losses.push_back(lm_loss_value(layout_, theta_, cfg_.model, batch));
    }
    double sum = 0.0;
    for (const double v : pt.val_losses) sum += v;
    pt.mean_val_loss = sum / static_cast<double>(suite_.size());
    pt.p = p_snapshot;
    pt.entropy = entropy(p_snapshot);
    pt.n_eff = n_eff(p_snapshot);
    pt.lr = last_lr_;
    record_.points.push_back(std::move(pt));
    next_log_tokens_ = counter_.tokens_used + log_interval_;
  }

  void finish() {
    record_.total_tokens = counter_.tokens_used;
    record_.params_digest = digest_params(theta_);
    if (cfg_.max_epochs > 0) {
      for (const SamplerState& s : train_samplers_) {
        if (s.epochs_completed() > cfg_.max_epochs) record_.epoch_limit_hit = true;
      }
    }
  }

  const RunConfig& cfg_;
  const std::vector<TaskDataset>& suite_;
  ParamSet layout_;
  std::vector<double> theta_;
  OptimState opt_;
  BudgetCounter counter_;
  std::vector<SamplerState> train_samplers_;
  std::vector<SamplerState> metaval_samplers_;
  std::vector<SamplerState> logval_samplers_;
  BudgetedRunRecord record_;
  long log_interval_ = 1;
  long next_log_tokens_ = 0;
  double last_lr_ = 0.0;

 private:
  void freeze_schedule() {
    const double avg = measured_steps_ > 0
                           ? static_cast<double>(measured_tokens_) / static_cast<double>(measured_steps_)
                           : 1.0;
    const long estimated = avg > 0.0 ? std::lround(static_cast<double>(cfg_.budget_tokens) / avg) : 1;
    sched_.warmup_steps = cfg_.warmup_steps;
    sched_.total_steps = std::max(cfg_.warmup_steps + 1, estimated);
    sched_.peak_lr = cfg_.peak_lr;
    sched_.floor_fraction = cfg_.floor_fraction;
    sched_frozen_ = true;
  }

  double lr_for_step(long step) {
    if (!sched_frozen_) {
      // Still measuring; within the warmup ramp by construction.
      if (cfg_.warmup_steps == 0) return cfg_.peak_lr;
      return cfg_.peak_lr * static_cast<double>(std::min(step, cfg_.warmup_steps)) /
             static_cast<double>(cfg_.warmup_steps);
    }
    return lr_at(std::min(step, sched_.total_steps), sched_);
  }

  ScheduleConfig sched_;
  bool sched_frozen_ = false;
  long measured_steps_ = 0;
  long measured_tokens_ = 0;
};

std::vector<double> gather(const std::vector<double>& full, const std::vector<std::size_t>& idx) {
  std::vector<double> out;
  out.reserve(idx.size());
  for (const std::size_t i : idx) out.push_back(full[i]);
  return out;
}

}  // namespace

BudgetedRunRecord run_adapt(const RunConfig& config, const std::vector<TaskDataset>& suite) {
  if (config.method != Method::adapt) throw std::invalid_argument("run_adapt: config method is not adapt");
  const auto start = std::chrono::steady_clock::now();

  BudgetedLoop loop(config, suite);
  const std::size_t t = suite.size();
  MixtureState mix = MixtureState::init(t);
  Rng subset_rng(derive_stream(config.seed, "subset"));

  loop.log_if_due(mix.p, /*force=*/true);  // starting point of the curve

  while (!loop.counter_.exhausted()) {
    long iter_tokens = 0;

    std::vector<std::size_t> active = subset_rng.sample_without_replacement(t, config.tasks_per_step);
    std::sort(active.begin(), active.end());
    const std::vector<double> p_active = softmax_mixture(gather(mix.logits, active));

    // Micro-iteration 0 doubles as the probe: its per-task gradients feed
    // both the inner step and the first slice of the accumulated update.
    std::vector<std::vector<double>> train_grads;
    std::vector<double> mixed_grad(loop.theta_.size(), 0.0);
    train_grads.reserve(active.size());
    for (std::size_t s = 0; s < active.size(); ++s) {
      LossGrad lg = loop.train_loss_grad(active[s], &iter_tokens);
      for (std::size_t d = 0; d < mixed_grad.size(); ++d) mixed_grad[d] += p_active[s] * lg.grad[d];
      train_grads.push_back(std::move(lg.grad));
    }

    const std::vector<double> theta_probe =
        probe_step(loop.theta_, p_active, train_grads, config.hyper.probe_lr);

    MetaGradInputs mg_inputs;
    mg_inputs.p = p_active;
    mg_inputs.train_grads = std::move(train_grads);
    for (const std::size_t task : active) {
      LossGrad vg = loop.val_loss_grad(task, theta_probe);
      mg_inputs.val_losses.push_back(vg.loss);
      mg_inputs.val_grads.push_back(std::move(vg.grad));
    }

    const std::vector<double> subset_grad = meta_gradient(mg_inputs, config.hyper);
    std::vector<double> full_grad(t, 0.0);
    for (std::size_t s = 0; s < active.size(); ++s) full_grad[active[s]] = subset_grad[s];
    mix = update_logits(mix, full_grad, config.hyper);

    if (config.adopt_probe) {
      // Literal adoption of the probe parameters; no AdamW path.
      loop.theta_ = theta_probe;
    } else {
      for (std::size_t a = 1; a < config.accumulation_steps; ++a) {
        for (std::size_t s = 0; s < active.size(); ++s) {
          const LossGrad lg = loop.train_loss_grad(active[s], &iter_tokens);
          for (std::size_t d = 0; d < mixed_grad.size(); ++d) mixed_grad[d] += p_active[s] * lg.grad[d];
        }
      }
      const double inv = 1.0 / static_cast<double>(config.accumulation_steps);
      for (double& g : mixed_grad) g *= inv;
      loop.optimizer_update(std::move(mixed_grad), iter_tokens);
    }

    loop.counter_.add(iter_tokens);
    loop.record_.iteration_train_tokens.push_back(iter_tokens);
    ++loop.record_.iterations;
    loop.log_if_due(mix.p);
  }

  loop.log_if_due(mix.p, /*force=*/true);
  loop.finish();
  loop.record_.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return std::move(loop.record_);
}

BudgetedRunRecord run_sft(const RunConfig& config, const std::vector<TaskDataset>& suite) {
  if (config.method != Method::sft_uniform && config.method != Method::sft_proportional) {
    throw std::invalid_argument("run_sft: config method is not an sft variant");
  }
  const auto start = std::chrono::steady_clock::now();

  BudgetedLoop loop(config, suite);
  const std::vector<double> q = static_weights(
      suite, config.method == Method::sft_uniform ? WeightMode::uniform : WeightMode::proportional);
  Rng pick_rng(derive_stream(config.seed, "taskpick"));

  loop.log_if_due(q, /*force=*/true);

  while (!loop.counter_.exhausted()) {
    long iter_tokens = 0;
    std::vector<double> grad_acc(loop.theta_.size(), 0.0);
    for (std::size_t a = 0; a < config.accumulation_steps; ++a) {
      const std::size_t task = pick_rng.sample_categorical(q);
      const LossGrad lg = loop.train_loss_grad(task, &iter_tokens);
      for (std::size_t d = 0; d < grad_acc.size(); ++d) grad_acc[d] += lg.grad[d];
    }
    const double inv = 1.0 / static_cast<double>(config.accumulation_steps);
    for (double& g : grad_acc) g *= inv;
    loop.optimizer_update(std::move(grad_acc), iter_tokens);

    loop.counter_.add(iter_tokens);
    loop.record_.iteration_train_tokens.push_back(iter_tokens);
    ++loop.record_.iterations;
    loop.log_if_due(q);
  }

  loop.log_if_due(q, /*force=*/true);
  loop.finish();
  loop.record_.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return std::move(loop.record_);
}

BudgetedRunRecord run_method(const RunConfig& config, const std::vector<TaskDataset>& suite) {
  return config.method == Method::adapt ? run_adapt(config, suite) : run_sft(config, suite);
}

QuadraticAdaptResult adapt_quadratic(const std::vector<QuadraticTaskSpec>& tasks, const MetaHyper& hyper,
                                     std::size_t iterations, double model_lr, std::uint64_t seed) {
  if (tasks.size() < 2) throw std::invalid_argument("adapt_quadratic: need at least 2 tasks");
  hyper.validate();
  const std::size_t dim = tasks[0].dim;
  for (const QuadraticTaskSpec& spec : tasks) {
    spec.validate();
    if (spec.dim != dim) throw std::invalid_argument("adapt_quadratic: mixed task dimensions");
  }

  Rng noise_rng(derive_stream(seed, "quadnoise"));
  QuadraticAdaptResult out;
  out.mixture = MixtureState::init(tasks.size());
  out.theta.assign(dim, 0.0);

  for (std::size_t it = 0; it < iterations; ++it) {
    MetaGradInputs inputs;
    inputs.p = out.mixture.p;
    for (const QuadraticTaskSpec& spec : tasks) {
      inputs.train_grads.push_back(quadratic_loss(out.theta, spec, &noise_rng).gradient);
    }
    const std::vector<double> theta_probe = probe_step(out.theta, inputs.p, inputs.train_grads, hyper.probe_lr);
    for (const QuadraticTaskSpec& spec : tasks) {
      QuadraticEval eval = quadratic_loss(theta_probe, spec, &noise_rng);
      inputs.val_losses.push_back(eval.loss);
      inputs.val_grads.push_back(std::move(eval.gradient));
    }
    const std::vector<double> grad = meta_gradient(inputs, hyper);
    out.mixture = update_logits(out.mixture, grad, hyper);

    for (std::size_t d = 0; d < dim; ++d) {
      double g = 0.0;
      for (std::size_t i = 0; i < tasks.size(); ++i) g += inputs.p[i] * inputs.train_grads[i][d];
      out.theta[d] -= model_lr * g;
    }
    out.p_history.push_back(out.mixture.p);
  }
  return out;
}

}  // namespace adaptmix
