#include "adaptmix/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace adaptmix {

MixtureState MixtureState::init(std::size_t num_tasks) {
  if (num_tasks == 0) throw std::invalid_argument("MixtureState: need at least one task");
  MixtureState s;
  s.logits.assign(num_tasks, 0.0);
  s.p = softmax_mixture(s.logits);
  return s;
}

void MetaHyper::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("MetaHyper: tau must be positive");
  if (entropy_weight < 0.0) throw std::invalid_argument("MetaHyper: entropy_weight must be >= 0");
  if (!(probe_lr > 0.0)) throw std::invalid_argument("MetaHyper: probe_lr must be positive");
  if (!(meta_lr > 0.0)) throw std::invalid_argument("MetaHyper: meta_lr must be positive");
  if (logit_clip < 0.0) throw std::invalid_argument("MetaHyper: logit_clip must be >= 0");
  for (const double x : {tau, entropy_weight, probe_lr, meta_lr, logit_clip}) {
    if (!std::isfinite(x)) throw std::invalid_argument("MetaHyper: non-finite hyperparameter");
  }
}

std::vector<double> softmax_mixture(const std::vector<double>& logits) {
  if (logits.empty()) throw std::invalid_argument("softmax_mixture: empty logits");
  double m = logits[0];
  for (const double w : logits) {
    if (!std::isfinite(w)) throw std::invalid_argument("softmax_mixture: non-finite logit");
    m = std::max(m, w);
  }
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (const double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

double n_eff(const std::vector<double>& p) {
  double s = 0.0;
  for (const double x : p) s += x * x;
  if (s <= 0.0) throw std::invalid_argument("n_eff: degenerate mixture");
  return 1.0 / s;
}

double smooth_max(const std::vector<double>& v, double tau) {
  if (v.empty()) throw std::invalid_argument("smooth_max: empty input");
  if (!(tau > 0.0)) throw std::invalid_argument("smooth_max: tau must be positive");
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (const double x : v) s += std::exp((x - m) / tau);
  return m + tau * std::log(s);
}

std::vector<double> smooth_max_weights(const std::vector<double>& v, double tau) {
  if (v.empty()) throw std::invalid_argument("smooth_max_weights: empty input");
  if (!(tau > 0.0)) throw std::invalid_argument("smooth_max_weights: tau must be positive");
  std::vector<double> scaled(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) scaled[i] = v[i] / tau;
  return softmax_mixture(scaled);
}

void MetaGradInputs::validate() const {
  const std::size_t t = p.size();
  if (t == 0) throw std::invalid_argument("MetaGradInputs: empty mixture");
  if (train_grads.size() != t || val_grads.size() != t || val_losses.size() != t) {
    throw std::invalid_argument("MetaGradInputs: mixture, gradients and losses must have equal task counts");
  }
  const std::size_t dim = train_grads[0].size();
  if (dim == 0) throw std::invalid_argument("MetaGradInputs: zero-dimensional gradients");
  for (std::size_t i = 0; i < t; ++i) {
    if (train_grads[i].size() != dim || val_grads[i].size() != dim) {
      throw std::invalid_argument("MetaGradInputs: gradient dimension mismatch at task " + std::to_string(i));
    }
  }
}

std::vector<double> meta_gradient(const MetaGradInputs& inputs, const MetaHyper& hyper) {
  inputs.validate();
  hyper.validate();

  const std::size_t t = inputs.p.size();
  const std::size_t dim = inputs.train_grads[0].size();

  std::vector<double> gbar(dim, 0.0);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t d = 0; d < dim; ++d) gbar[d] += inputs.p[i] * inputs.train_grads[i][d];
  }

  const std::vector<double> a = smooth_max_weights(inputs.val_losses, hyper.tau);
  std::vector<double> hbar(dim, 0.0);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t d = 0; d < dim; ++d) hbar[d] += a[i] * inputs.val_grads[i][d];
  }

  const double h = entropy(inputs.p);
  std::vector<double> grad(t, 0.0);
  for (std::size_t k = 0; k < t; ++k) {
    double dot = 0.0;
    for (std::size_t d = 0; d < dim; ++d) dot += (inputs.train_grads[k][d] - gbar[d]) * hbar[d];
    grad[k] = -hyper.probe_lr * inputs.p[k] * dot;
    if (hyper.entropy_weight > 0.0) {
      grad[k] += hyper.entropy_weight * inputs.p[k] * (std::log(inputs.p[k]) + h);
    }
  }
  return grad;
}

MixtureState update_logits(const MixtureState& state, const std::vector<double>& grad,
                           const MetaHyper& hyper) {
  hyper.validate();
  if (grad.size() != state.logits.size()) {
    throw std::invalid_argument("update_logits: gradient dimension mismatch");
  }
  double norm_sq = 0.0;
  for (const double g : grad) {
    if (!std::isfinite(g)) throw std::invalid_argument("update_logits: non-finite gradient");
    norm_sq += g * g;
  }
  double scale = 1.0;
  if (hyper.logit_clip > 0.0) {
    const double norm = std::sqrt(norm_sq);
    if (norm > hyper.logit_clip) scale = hyper.logit_clip / norm;
  }
  MixtureState out;
  out.logits.resize(state.logits.size());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    out.logits[i] = state.logits[i] - hyper.meta_lr * scale * grad[i];
  }
  out.p = softmax_mixture(out.logits);
  return out;
}

}  // namespace adaptmix
