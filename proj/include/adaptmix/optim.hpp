#pragma once

#include <span>
#include <vector>

namespace adaptmix {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  void validate() const;
};

// Moment accumulators over the flat parameter layout.
struct OptimState {
  long step = 0;
  std::vector<double> m;
  std::vector<double> v;

  static OptimState init(std::size_t num_params);
};

// Linear warmup 0 -> peak over warmup_steps, then cosine decay from peak
// to floor_fraction * peak at total_steps.
struct ScheduleConfig {
  long warmup_steps = 200;
  long total_steps = 0;
  double peak_lr = 0.0;
  double floor_fraction = 0.1;

  void validate() const;
};

// Rejects steps outside [0, total_steps].
double lr_at(long step, const ScheduleConfig& config);

// Scales all entries by max_norm/||g|| when the global norm exceeds
// max_norm; 0 disables. Returns the pre-clip norm.
double clip_global_norm(std::vector<double>& grads, double max_norm);

// One bias-corrected adaptive moment step. Decoupled weight decay is
// applied as params -= lr * weight_decay * params, independent of the
// moment-based delta.
void optimizer_step(std::vector<double>& params, std::span<const double> grads, OptimState& state,
                    const AdamWConfig& config, double lr);

}  // namespace adaptmix
