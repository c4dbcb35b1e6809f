#include "adaptmix/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace adaptmix {

void AdamWConfig::validate() const {
  if (beta1 <= 0.0 || beta1 >= 1.0) throw std::invalid_argument("AdamWConfig: beta1 out of range");
  if (beta2 <= 0.0 || beta2 >= 1.0) throw std::invalid_argument("AdamWConfig: beta2 out of range");
  if (eps <= 0.0) throw std::invalid_argument("AdamWConfig: eps must be positive");
  if (weight_decay < 0.0) throw std::invalid_argument("AdamWConfig: weight_decay must be >= 0");
}

OptimState OptimState::init(std::size_t num_params) {
  OptimState s;
  s.m.assign(num_params, 0.0);
  s.v.assign(num_params, 0.0);
  return s;
}

void ScheduleConfig::validate() const {
  if (warmup_steps < 0) throw std::invalid_argument("ScheduleConfig: warmup_steps must be >= 0");
  if (total_steps <= warmup_steps) {
    throw std::invalid_argument("ScheduleConfig: total_steps must exceed warmup_steps");
  }
  if (!(peak_lr > 0.0)) throw std::invalid_argument("ScheduleConfig: peak_lr must be positive");
  if (!(floor_fraction > 0.0 && floor_fraction <= 1.0)) {
    throw std::invalid_argument("ScheduleConfig: floor_fraction must be in (0, 1]");
  }
}

double lr_at(long step, const ScheduleConfig& config) {
  config.validate();
  if (step < 0 || step > config.total_steps) {
    throw std::invalid_argument("lr_at: step " + std::to_string(step) + " outside [0, " +
                                std::to_string(config.total_steps) + "]");
  }
  if (step <= config.warmup_steps) {
    if (config.warmup_steps == 0) return config.peak_lr;
    return config.peak_lr * static_cast<double>(step) / static_cast<double>(config.warmup_steps);
  }
  const double t = static_cast<double>(step - config.warmup_steps) /
                   static_cast<double>(config.total_steps - config.warmup_steps);
  const double floor = config.floor_fraction;
  return config.peak_lr * (floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(3.141592653589793238462643 * t)));
}

double clip_global_norm(std::vector<double>& grads, double max_norm) {
  if (max_norm < 0.0) throw std::invalid_argument("clip_global_norm: max_norm must be >= 0");
  double norm_sq = 0.0;
  for (const double g : grads) norm_sq += g * g;
  const double norm = std::sqrt(norm_sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : grads) g *= scale;
  }
  return norm;
}

void optimizer_step(std::vector<double>& params, std::span<const double> grads, OptimState& state,
                    const AdamWConfig& config, double lr) {
  config.validate();
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("optimizer_step: parameter/gradient/state size mismatch");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));

  for (std::size_t i = 0; i < params.size(); ++i) {
    // Decoupled decay, then the moment-based delta:
    //   m = b1 m + (1-b1) g ; v = b2 v + (1-b2) g^2
    //   theta -= lr * ( wd*theta + mhat / (sqrt(vhat) + eps) )
    const double g = grads[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= lr * (config.weight_decay * params[i] + mhat / (std::sqrt(vhat) + config.eps));
  }
}

}  // namespace adaptmix
