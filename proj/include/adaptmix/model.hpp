#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "adaptmix/param_set.hpp"
#include "adaptmix/rng.hpp"
#include "adaptmix/tape.hpp"

namespace adaptmix {

inline constexpr int kPadId = 0;

struct TinyLMConfig {
  int vocab_size = 32;  // includes pad id 0
  int embed_dim = 12;
  int hidden_dim = 16;
  int context_len = 24;
  std::uint64_t seed = 0;

  void validate() const;
  // vocab*embed + embed*hidden + hidden*hidden + hidden*vocab + biases
  std::size_t param_count() const;
};

// Left-padded token matrix with its non-pad mask. Row-major [batch, len].
struct TokenBatch {
  std::size_t batch = 0;
  std::size_t len = 0;
  std::vector<int> ids;
  std::vector<double> mask;

  int id_at(std::size_t r, std::size_t c) const { return ids[r * len + c]; }
  double mask_at(std::size_t r, std::size_t c) const { return mask[r * len + c]; }
  long nonpad_tokens() const;

  // Left-pads rows to the batch maximum length. Rejects empty rows and
  // rows containing the pad id.
  static TokenBatch from_rows(const std::vector<std::vector<int>>& rows);
  void validate() const;
};

// Deterministic-by-seed initialization; embedding and linear weights drawn
// from a scaled uniform, biases zero.
ParamSet lm_init(const TinyLMConfig& config);

struct LmLoss {
  GradientTape::ValueId loss_id;  // scalar node on the caller's tape
  double loss;
  long nonpad_tokens;                            // non-pad input tokens (budget accounting)
  std::vector<GradientTape::ValueId> param_ids;  // leaves in ParamSet order
};

// Mean masked next-token cross-entropy over non-pad target positions,
// recorded on the tape. Rejects all-pad batches and ids outside the vocab.
//
// Architecture: embedding -> causal cumulative-mean context summary
// (pad positions excluded, so loss is invariant to added left padding)
// -> position-wise two-layer MLP -> output projection.
LmLoss lm_loss(const ParamSet& params, const TinyLMConfig& config, const TokenBatch& batch,
               GradientTape& tape);

struct LossGrad {
  double loss;
  long nonpad_tokens;
  std::vector<double> grad;  // flat, ParamSet layout
};

// Convenience wrapper: builds a local tape and returns the flat gradient.
LossGrad lm_loss_and_grad(const ParamSet& layout, std::span<const double> theta,
                          const TinyLMConfig& config, const TokenBatch& batch);

// Loss value only (logging / validation sweeps).
double lm_loss_value(const ParamSet& layout, std::span<const double> theta, const TinyLMConfig& config,
                     const TokenBatch& batch);

// Analytic quadratic task: loss = 0.5 (theta-c)^T A (theta-c) + b + noise,
// gradient = A (theta-c). The exact-oracle counterpart of the tiny LM.
struct QuadraticTaskSpec {
  std::size_t dim = 0;
  std::vector<double> matrix;  // dim*dim, symmetric positive-definite
  std::vector<double> center;
  double offset = 0.0;
  double noise_scale = 0.0;

  // Symmetry within 1e-12 and positive-definiteness (Cholesky succeeds).
  void validate() const;
};

QuadraticTaskSpec random_quadratic(std::size_t dim, Rng& rng, double center_scale, double eig_lo,
                                   double eig_hi, double offset, double noise_scale);

struct QuadraticEval {
  double loss;
  std::vector<double> gradient;  // noiseless
};

// rng may be null when noise_scale is zero.
QuadraticEval quadratic_loss(std::span<const double> theta, const QuadraticTaskSpec& spec,
                             Rng* rng = nullptr);

}  // namespace adaptmix
