#include "adaptmix/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace adaptmix {

void TinyLMConfig::validate() const {
  if (vocab_size < 2) throw std::invalid_argument("TinyLMConfig: vocab_size must be >= 2");
  if (context_len < 2) throw std::invalid_argument("TinyLMConfig: context_len must be >= 2");
  if (embed_dim < 1 || hidden_dim < 1) throw std::invalid_argument("TinyLMConfig: dims must be positive");
}

std::size_t TinyLMConfig::param_count() const {
  const std::size_t v = static_cast<std::size_t>(vocab_size);
  const std::size_t e = static_cast<std::size_t>(embed_dim);
  const std::size_t h = static_cast<std::size_t>(hidden_dim);
  return v * e + e * h + h * h + h * v + h + h + v;
}

long TokenBatch::nonpad_tokens() const {
  long n = 0;
  for (const int id : ids) {
    if (id != kPadId) ++n;
  }
  return n;
}

TokenBatch TokenBatch::from_rows(const std::vector<std::vector<int>>& rows) {
  if (rows.empty()) throw std::invalid_argument("TokenBatch: no rows");
  std::size_t max_len = 0;
  for (const auto& row : rows) {
    if (row.empty()) throw std::invalid_argument("TokenBatch: empty row");
    for (const int id : row) {
      if (id == kPadId) throw std::invalid_argument("TokenBatch: pad id 0 in row data");
      if (id < 0) throw std::invalid_argument("TokenBatch: negative token id");
    }
    max_len = std::max(max_len, row.size());
  }
  TokenBatch b;
  b.batch = rows.size();
  b.len = max_len;
  b.ids.assign(b.batch * b.len, kPadId);
  b.mask.assign(b.batch * b.len, 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t pad = max_len - rows[r].size();
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      b.ids[r * max_len + pad + c] = rows[r][c];
      b.mask[r * max_len + pad + c] = 1.0;
    }
  }
  return b;
}

void TokenBatch::validate() const {
  if (batch == 0 || len == 0 || ids.size() != batch * len || mask.size() != batch * len) {
    throw std::invalid_argument("TokenBatch: inconsistent dimensions");
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const bool pad = ids[i] == kPadId;
    if (mask[i] != (pad ? 0.0 : 1.0)) {
      throw std::invalid_argument("TokenBatch: mask disagrees with pad ids at index " + std::to_string(i));
    }
  }
  for (std::size_t r = 0; r < batch; ++r) {
    double row_sum = 0.0;
    for (std::size_t c = 0; c < len; ++c) row_sum += mask_at(r, c);
    if (row_sum < 1.0) throw std::invalid_argument("TokenBatch: all-pad row " + std::to_string(r));
  }
}

ParamSet lm_init(const TinyLMConfig& config) {
  config.validate();
  Rng rng(derive_stream(config.seed, "lm_init"));
  const std::size_t v = static_cast<std::size_t>(config.vocab_size);
  const std::size_t e = static_cast<std::size_t>(config.embed_dim);
  const std::size_t h = static_cast<std::size_t>(config.hidden_dim);

  const auto uniform_tensor = [&rng](std::vector<std::size_t> shape, double scale) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& x : t.data) x = rng.uniform(-scale, scale);
    return t;
  };

  ParamSet p;
  p.add("embed", uniform_tensor({v, e}, 1.0 / std::sqrt(static_cast<double>(e))));
  p.add("w1", uniform_tensor({e, h}, 1.0 / std::sqrt(static_cast<double>(e))));
  p.add("b1", Tensor::zeros({1, h}));
  p.add("w2", uniform_tensor({h, h}, 1.0 / std::sqrt(static_cast<double>(h))));
  p.add("b2", Tensor::zeros({1, h}));
  p.add("w_out", uniform_tensor({h, v}, 1.0 / std::sqrt(static_cast<double>(h))));
  p.add("b_out", Tensor::zeros({1, v}));
  return p;
}

namespace {

// Block-diagonal causal cumulative-mean operator over non-pad positions.
// Row n = b*len + t mixes embeddings of positions s <= t of the same batch
// row, each weighted by mask/count, so added left padding leaves the
// summaries of real positions unchanged.
Tensor causal_context_matrix(const TokenBatch& batch) {
  const std::size_t n = batch.batch * batch.len;
  Tensor m = Tensor::zeros({n, n});
  for (std::size_t b = 0; b < batch.batch; ++b) {
    double count = 0.0;
    for (std::size_t t = 0; t < batch.len; ++t) {
      count += batch.mask_at(b, t);
      if (count == 0.0) continue;
      const std::size_t row = b * batch.len + t;
      for (std::size_t s = 0; s <= t; ++s) {
        if (batch.mask_at(b, s) != 0.0) m.at(row, b * batch.len + s) = 1.0 / count;
      }
    }
  }
  return m;
}

}  // namespace

LmLoss lm_loss(const ParamSet& params, const TinyLMConfig& config, const TokenBatch& batch,
               GradientTape& tape) {
  config.validate();
  batch.validate();
  for (const int id : batch.ids) {
    if (id >= config.vocab_size) {
      throw std::invalid_argument("lm_loss: token id " + std::to_string(id) + " >= vocab_size");
    }
  }
  if (batch.len > static_cast<std::size_t>(config.context_len)) {
    throw std::invalid_argument("lm_loss: batch length " + std::to_string(batch.len) +
                                " exceeds context_len " + std::to_string(config.context_len));
  }

  const std::size_t n = batch.batch * batch.len;

  std::vector<GradientTape::ValueId> param_ids;
  param_ids.reserve(params.count());
  for (std::size_t i = 0; i < params.count(); ++i) param_ids.push_back(tape.leaf(params.tensor_at(i)));
  const auto id_of = [&](const char* name) {
    for (std::size_t i = 0; i < params.count(); ++i) {
      if (params.name_at(i) == name) return param_ids[i];
    }
    throw std::invalid_argument(std::string("lm_loss: parameter set lacks '") + name + "'");
  };

  const auto x = tape.embedding_lookup(id_of("embed"), batch.ids);      // [n, e]
  const auto ctx_op = tape.leaf(causal_context_matrix(batch));          // constant mixer
  const auto ctx = tape.apply(PrimOp::matmul, {ctx_op, x});             // [n, e]

  // Bias broadcast via ones-column outer product.
  const auto ones_col = tape.leaf(Tensor({n, 1}, std::vector<double>(n, 1.0)));
  const auto broadcast = [&](GradientTape::ValueId bias_row) {
    return tape.apply(PrimOp::matmul, {ones_col, bias_row});
  };

  const auto h1 = tape.apply(
      PrimOp::tanh_fn,
      {tape.apply(PrimOp::add, {tape.apply(PrimOp::matmul, {ctx, id_of("w1")}), broadcast(id_of("b1"))})});
  const auto h2 = tape.apply(
      PrimOp::tanh_fn,
      {tape.apply(PrimOp::add, {tape.apply(PrimOp::matmul, {h1, id_of("w2")}), broadcast(id_of("b2"))})});
  const auto logits = tape.apply(
      PrimOp::add, {tape.apply(PrimOp::matmul, {h2, id_of("w_out")}), broadcast(id_of("b_out"))});

  // Next-token targets: position t predicts t+1; valid only where both the
  // input and the target position are non-pad.
  std::vector<int> targets(n, 0);
  std::vector<double> target_mask(n, 0.0);
  for (std::size_t b = 0; b < batch.batch; ++b) {
    for (std::size_t t = 0; t + 1 < batch.len; ++t) {
      if (batch.mask_at(b, t) != 0.0 && batch.mask_at(b, t + 1) != 0.0) {
        targets[b * batch.len + t] = batch.id_at(b, t + 1);
        target_mask[b * batch.len + t] = 1.0;
      }
    }
  }

  const auto row_losses = tape.softmax_xent(logits, targets);
  const auto loss_node = tape.mean_over_mask(row_losses, target_mask);

  LmLoss out;
  out.loss_id = loss_node;
  out.loss = tape.value(loss_node).data[0];
  out.nonpad_tokens = batch.nonpad_tokens();
  out.param_ids = std::move(param_ids);
  return out;
}

LossGrad lm_loss_and_grad(const ParamSet& layout, std::span<const double> theta,
                          const TinyLMConfig& config, const TokenBatch& batch) {
  const ParamSet params = layout.with_values(theta);
  GradientTape tape;
  const LmLoss l = lm_loss(params, config, batch, tape);
  const std::vector<Tensor> grads = tape.backward(l.loss_id);

  LossGrad out;
  out.loss = l.loss;
  out.nonpad_tokens = l.nonpad_tokens;
  out.grad.reserve(theta.size());
  // Leaves 0..count-1 are the parameters, in ParamSet order.
  for (std::size_t i = 0; i < params.count(); ++i) {
    out.grad.insert(out.grad.end(), grads[i].data.begin(), grads[i].data.end());
  }
  return out;
}

double lm_loss_value(const ParamSet& layout, std::span<const double> theta, const TinyLMConfig& config,
                     const TokenBatch& batch) {
  const ParamSet params = layout.with_values(theta);
  GradientTape tape;
  return lm_loss(params, config, batch, tape).loss;
}

namespace {

// Cholesky factorization; returns false if the matrix is not positive
// definite. Sizes here are tiny, no pivoting needed.
bool cholesky_ok(const std::vector<double>& a, std::size_t n) {
  std::vector<double> l(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
      if (i == j) {
        if (s <= 0.0) return false;
        l[i * n + i] = std::sqrt(s);
      } else {
        l[i * n + j] = s / l[j * n + j];
      }
    }
  }
  return true;
}

}  // namespace

void QuadraticTaskSpec::validate() const {
  if (dim == 0) throw std::invalid_argument("QuadraticTaskSpec: dim must be positive");
  if (matrix.size() != dim * dim || center.size() != dim) {
    throw std::invalid_argument("QuadraticTaskSpec: matrix/center sizes do not match dim");
  }
  if (noise_scale < 0.0) throw std::invalid_argument("QuadraticTaskSpec: negative noise_scale");
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i + 1; j < dim; ++j) {
      if (std::fabs(matrix[i * dim + j] - matrix[j * dim + i]) > 1e-12) {
        throw std::invalid_argument("QuadraticTaskSpec: matrix not symmetric within 1e-12");
      }
    }
  }
  if (!cholesky_ok(matrix, dim)) {
    throw std::invalid_argument("QuadraticTaskSpec: matrix not positive definite");
  }
}

QuadraticTaskSpec random_quadratic(std::size_t dim, Rng& rng, double center_scale, double eig_lo,
                                   double eig_hi, double offset, double noise_scale) {
  if (dim == 0) throw std::invalid_argument("random_quadratic: dim must be positive");
  if (!(0.0 < eig_lo && eig_lo <= eig_hi)) {
    throw std::invalid_argument("random_quadratic: need 0 < eig_lo <= eig_hi");
  }

  // Orthogonal basis from Gram-Schmidt on a Gaussian matrix, then
  // A = Q diag(eig) Q^T with eigenvalues in [eig_lo, eig_hi].
  std::vector<double> q(dim * dim);
  for (std::size_t col = 0; col < dim; ++col) {
    for (std::size_t i = 0; i < dim; ++i) q[i * dim + col] = rng.gaussian();
    for (std::size_t prev = 0; prev < col; ++prev) {
      double dot = 0.0;
      for (std::size_t i = 0; i < dim; ++i) dot += q[i * dim + col] * q[i * dim + prev];
      for (std::size_t i = 0; i < dim; ++i) q[i * dim + col] -= dot * q[i * dim + prev];
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < dim; ++i) norm += q[i * dim + col] * q[i * dim + col];
    norm = std::sqrt(norm);
    if (norm < 1e-9) {
      // Degenerate draw; fall back to a standard basis vector.
      for (std::size_t i = 0; i < dim; ++i) q[i * dim + col] = (i == col) ? 1.0 : 0.0;
    } else {
      for (std::size_t i = 0; i < dim; ++i) q[i * dim + col] /= norm;
    }
  }

  std::vector<double> eig(dim);
  for (double& e : eig) e = rng.uniform(eig_lo, eig_hi);

  QuadraticTaskSpec spec;
  spec.dim = dim;
  spec.matrix.assign(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) s += q[i * dim + k] * eig[k] * q[j * dim + k];
      spec.matrix[i * dim + j] = s;
    }
  }
  // Symmetrize away the last bits of roundoff.
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i + 1; j < dim; ++j) {
      const double s = 0.5 * (spec.matrix[i * dim + j] + spec.matrix[j * dim + i]);
      spec.matrix[i * dim + j] = s;
      spec.matrix[j * dim + i] = s;
    }
  }

  spec.center.resize(dim);
  for (double& c : spec.center) c = center_scale * rng.gaussian();
  spec.offset = offset;
  spec.noise_scale = noise_scale;
  spec.validate();
  return spec;
}

QuadraticEval quadratic_loss(std::span<const double> theta, const QuadraticTaskSpec& spec, Rng* rng) {
  if (theta.size() != spec.dim) {
    throw std::invalid_argument("quadratic_loss: theta has dim " + std::to_string(theta.size()) +
                                ", spec expects " + std::to_string(spec.dim));
  }
  const std::size_t n = spec.dim;
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = theta[i] - spec.center[i];

  QuadraticEval out;
  out.gradient.assign(n, 0.0);
  double quad = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += spec.matrix[i * n + j] * diff[j];
    out.gradient[i] = row;
    quad += diff[i] * row;
  }
  out.loss = 0.5 * quad + spec.offset;
  if (spec.noise_scale > 0.0) {
    if (rng == nullptr) throw std::invalid_argument("quadratic_loss: noisy spec requires an rng");
    out.loss += spec.noise_scale * rng->gaussian();
  }
  return out;
}

}  // namespace adaptmix
