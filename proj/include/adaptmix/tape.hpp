#pragma once

#include <string>
#include <vector>

#include "adaptmix/tensor.hpp"

namespace adaptmix {

// Fixed primitive set. New model architectures compose from these.
enum class PrimOp {
  add,
  subtract,
  multiply,         // elementwise
  scalar_multiply,  // by an attached constant
  matmul,
  embedding_lookup,
  relu,
  tanh_fn,
  log_sum_exp,   // over the last axis of a 2-d input, keeps [m,1]
  softmax_xent,  // per-row cross-entropy against attached index targets
  mean_over_mask
};

const char* prim_op_name(PrimOp op);

// Reverse-mode tape. Forward values are computed eagerly as ops are
// recorded; backward replays adjoints over the fixed topological order.
// Entries are immutable once recorded, so backward is const and
// re-runnable with bit-identical results.
class GradientTape {
 public:
  using ValueId = int;

  // Registers an input tensor. Gradients are reported for every leaf in
  // registration order.
  ValueId leaf(Tensor t);

  // Shape-uniform ops: add/subtract/multiply/matmul/relu/tanh/log_sum_exp.
  // Shape mismatches are rejected with the op name and offending shapes.
  ValueId apply(PrimOp op, const std::vector<ValueId>& inputs);

  ValueId scalar_multiply(ValueId x, double c);
  // table [V,E] gathered by token ids -> [n, E]; ids are not differentiated.
  ValueId embedding_lookup(ValueId table, const std::vector<int>& ids);
  // logits [n, V] vs integer targets -> per-row losses [n, 1].
  ValueId softmax_xent(ValueId logits, const std::vector<int>& targets);
  // sum(values*mask)/sum(mask) -> scalar. mask entries are weights >= 0.
  ValueId mean_over_mask(ValueId values, const std::vector<double>& mask);

  const Tensor& value(ValueId id) const;
  std::size_t num_leaves() const { return leaves_.size(); }
  std::size_t num_nodes() const { return nodes_.size(); }

  // Gradient of a scalar output with respect to every leaf, in leaf
  // registration order. Rejects non-scalar outputs.
  std::vector<Tensor> backward(ValueId output) const;

 private:
  struct Node {
    PrimOp op;
    bool is_leaf = false;
    std::vector<ValueId> inputs;
    Tensor value;
    // op-specific constants (not differentiated)
    double scalar = 0.0;
    std::vector<int> indices;
    std::vector<double> mask;
    double mask_total = 0.0;
  };

  ValueId push(Node node);
  const Node& node(ValueId id) const;
  void check_id(ValueId id, const char* where) const;

  std::vector<Node> nodes_;
  std::vector<ValueId> leaves_;
};

}  // namespace adaptmix
