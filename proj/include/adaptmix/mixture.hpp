#pragma once

#include <vector>

namespace adaptmix {

// Task logits and the mixture they induce. p is always the softmax of w.
struct MixtureState {
  std::vector<double> logits;
  std::vector<double> p;

  static MixtureState init(std::size_t num_tasks);  // zero logits, uniform p
};

struct MetaHyper {
  double tau = 0.3;            // smooth-max temperature
  double entropy_weight = 1e-3;  // lambda
  double probe_lr = 1e-4;      // gamma, the differentiable inner step
  double meta_lr = 5e-3;       // beta, applied to the logits
  double logit_clip = 1.0;     // global-norm clip on the meta-gradient; 0 disables

  void validate() const;
};

// Max-subtracted softmax; sums to 1, strictly positive, shift invariant.
std::vector<double> softmax_mixture(const std::vector<double>& logits);

// Natural-log entropy with 0*log(0) := 0. Range [0, ln T].
double entropy(const std::vector<double>& p);

// Effective number of tasks 1/sum(p_i^2). Range [1, T].
double n_eff(const std::vector<double>& p);

// tau * log sum exp(v_i / tau), max-subtracted. Bounds:
// max(v) <= result <= max(v) + tau ln T.
double smooth_max(const std::vector<double>& v, double tau);

// d smooth_max / d v = softmax(v / tau).
std::vector<double> smooth_max_weights(const std::vector<double>& v, double tau);

// Inputs to the closed-form meta-gradient over the active task subset:
// mixture p, per-task training gradients g_i at theta, validation
// gradients h_i at theta', and validation losses v_i at theta'.
struct MetaGradInputs {
  std::vector<double> p;
  std::vector<std::vector<double>> train_grads;
  std::vector<std::vector<double>> val_grads;
  std::vector<double> val_losses;

  void validate() const;
};

// Exact gradient of  J_tau(v(w)) - lambda H(p(w))  through the one-step
// probe theta' = theta - gamma * sum_j p_j g_j with the g_j held fixed:
//
//   d/dw_k = -gamma * p_k * ((g_k - gbar) . hbar)
//            + lambda * p_k * (log p_k + H(p)),
//
// where gbar = sum_j p_j g_j and hbar = sum_i a_i h_i with
// a = smooth_max_weights(v, tau). No tape through the probe is needed;
// the finite-difference suite holds this equivalence to 1e-5.
std::vector<double> meta_gradient(const MetaGradInputs& inputs, const MetaHyper& hyper);

// Clips the gradient to hyper.logit_clip (global norm, 0 disables), takes
// one descent step of size hyper.meta_lr and recomputes p.
MixtureState update_logits(const MixtureState& state, const std::vector<double>& grad,
                           const MetaHyper& hyper);

}  // namespace adaptmix
