#include "adaptmix/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace adaptmix {

namespace {

[[noreturn]] void shape_error(PrimOp op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(prim_op_name(op)) + ": incompatible shapes " +
                              shape_to_string(a.shape) + " and " + shape_to_string(b.shape));
}

void require_rank2(PrimOp op, const Tensor& t) {
  if (t.rank() != 2) {
    throw std::invalid_argument(std::string(prim_op_name(op)) + ": expected a 2-d tensor, got shape " +
                                shape_to_string(t.shape));
  }
}

// Stable log(sum(exp(row))) used by both forward passes that need it.
double stable_lse_row(const double* row, std::size_t n) {
  double m = row[0];
  for (std::size_t j = 1; j < n; ++j) m = std::max(m, row[j]);
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) s += std::exp(row[j] - m);
  return m + std::log(s);
}

}  // namespace

const char* prim_op_name(PrimOp op) {
  switch (op) {
    case PrimOp::add: return "add";
    case PrimOp::subtract: return "subtract";
    case PrimOp::multiply: return "multiply";
    case PrimOp::scalar_multiply: return "scalar_multiply";
    case PrimOp::matmul: return "matmul";
    case PrimOp::embedding_lookup: return "embedding_lookup";
    case PrimOp::relu: return "relu";
    case PrimOp::tanh_fn: return "tanh";
    case PrimOp::log_sum_exp: return "log_sum_exp";
    case PrimOp::softmax_xent: return "softmax_xent";
    case PrimOp::mean_over_mask: return "mean_over_mask";
  }
  return "?";
}

GradientTape::ValueId GradientTape::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<ValueId>(nodes_.size()) - 1;
}

const GradientTape::Node& GradientTape::node(ValueId id) const {
  check_id(id, "GradientTape");
  return nodes_[static_cast<std::size_t>(id)];
}

void GradientTape::check_id(ValueId id, const char* where) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    throw std::invalid_argument(std::string(where) + ": unknown value id " + std::to_string(id));
  }
}

GradientTape::ValueId GradientTape::leaf(Tensor t) {
  Node n;
  n.op = PrimOp::add;  // unused for leaves
  n.is_leaf = true;
  n.value = std::move(t);
  const ValueId id = push(std::move(n));
  leaves_.push_back(id);
  return id;
}

const Tensor& GradientTape::value(ValueId id) const { return node(id).value; }

GradientTape::ValueId GradientTape::apply(PrimOp op, const std::vector<ValueId>& inputs) {
  for (const ValueId id : inputs) check_id(id, prim_op_name(op));

  Node n;
  n.op = op;
  n.inputs = inputs;

  switch (op) {
    case PrimOp::add:
    case PrimOp::subtract:
    case PrimOp::multiply: {
      if (inputs.size() != 2) throw std::invalid_argument(std::string(prim_op_name(op)) + ": expects 2 inputs");
      const Tensor& a = value(inputs[0]);
      const Tensor& b = value(inputs[1]);
      if (!a.same_shape(b)) shape_error(op, a, b);
      Tensor out = Tensor::zeros(a.shape);
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (op == PrimOp::add) out.data[i] = a.data[i] + b.data[i];
        else if (op == PrimOp::subtract) out.data[i] = a.data[i] - b.data[i];
        else out.data[i] = a.data[i] * b.data[i];
      }
      n.value = std::move(out);
      break;
    }
    case PrimOp::matmul: {
      if (inputs.size() != 2) throw std::invalid_argument("matmul: expects 2 inputs");
      const Tensor& a = value(inputs[0]);
      const Tensor& b = value(inputs[1]);
      require_rank2(op, a);
      require_rank2(op, b);
      if (a.cols() != b.rows()) shape_error(op, a, b);
      const std::size_t m = a.rows(), k = a.cols(), p = b.cols();
      Tensor out = Tensor::zeros({m, p});
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t l = 0; l < k; ++l) {
          const double av = a.at(i, l);
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < p; ++j) out.at(i, j) += av * b.at(l, j);
        }
      }
      n.value = std::move(out);
      break;
    }
    case PrimOp::relu:
    case PrimOp::tanh_fn: {
      if (inputs.size() != 1) throw std::invalid_argument(std::string(prim_op_name(op)) + ": expects 1 input");
      const Tensor& a = value(inputs[0]);
      Tensor out = Tensor::zeros(a.shape);
      for (std::size_t i = 0; i < a.size(); ++i) {
        out.data[i] = (op == PrimOp::relu) ? std::max(0.0, a.data[i]) : std::tanh(a.data[i]);
      }
      n.value = std::move(out);
      break;
    }
    case PrimOp::log_sum_exp: {
      if (inputs.size() != 1) throw std::invalid_argument("log_sum_exp: expects 1 input");
      const Tensor& a = value(inputs[0]);
      require_rank2(op, a);
      Tensor out = Tensor::zeros({a.rows(), 1});
      for (std::size_t i = 0; i < a.rows(); ++i) {
        out.data[i] = stable_lse_row(a.data.data() + i * a.cols(), a.cols());
      }
      n.value = std::move(out);
      break;
    }
    default:
      throw std::invalid_argument(std::string(prim_op_name(op)) + ": use the dedicated recording method");
  }
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::scalar_multiply(ValueId x, double c) {
  check_id(x, "scalar_multiply");
  if (!std::isfinite(c)) throw std::invalid_argument("scalar_multiply: non-finite constant");
  const Tensor& a = value(x);
  Node n;
  n.op = PrimOp::scalar_multiply;
  n.inputs = {x};
  n.scalar = c;
  Tensor out = Tensor::zeros(a.shape);
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] * c;
  n.value = std::move(out);
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::embedding_lookup(ValueId table, const std::vector<int>& ids) {
  check_id(table, "embedding_lookup");
  const Tensor& t = value(table);
  require_rank2(PrimOp::embedding_lookup, t);
  if (ids.empty()) throw std::invalid_argument("embedding_lookup: empty id list");
  const std::size_t v = t.rows(), e = t.cols();
  for (const int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= v) {
      throw std::invalid_argument("embedding_lookup: id " + std::to_string(id) + " outside table " +
                                  shape_to_string(t.shape));
    }
  }
  Node n;
  n.op = PrimOp::embedding_lookup;
  n.inputs = {table};
  n.indices = ids;
  Tensor out = Tensor::zeros({ids.size(), e});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const double* src = t.data.data() + static_cast<std::size_t>(ids[i]) * e;
    std::copy(src, src + e, out.data.begin() + static_cast<std::ptrdiff_t>(i * e));
  }
  n.value = std::move(out);
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::softmax_xent(ValueId logits, const std::vector<int>& targets) {
  check_id(logits, "softmax_xent");
  const Tensor& z = value(logits);
  require_rank2(PrimOp::softmax_xent, z);
  if (targets.size() != z.rows()) {
    throw std::invalid_argument("softmax_xent: " + std::to_string(targets.size()) + " targets for logits " +
                                shape_to_string(z.shape));
  }
  for (const int t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= z.cols()) {
      throw std::invalid_argument("softmax_xent: target " + std::to_string(t) + " outside class range");
    }
  }
  Node n;
  n.op = PrimOp::softmax_xent;
  n.inputs = {logits};
  n.indices = targets;
  Tensor out = Tensor::zeros({z.rows(), 1});
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const double* row = z.data.data() + i * z.cols();
    out.data[i] = stable_lse_row(row, z.cols()) - row[targets[i]];
  }
  n.value = std::move(out);
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::mean_over_mask(ValueId values, const std::vector<double>& mask) {
  check_id(values, "mean_over_mask");
  const Tensor& v = value(values);
  if (mask.size() != v.size()) {
    throw std::invalid_argument("mean_over_mask: mask length " + std::to_string(mask.size()) +
                                " for values " + shape_to_string(v.shape));
  }
  double total = 0.0;
  for (const double m : mask) {
    if (m < 0.0) throw std::invalid_argument("mean_over_mask: negative mask entry");
    total += m;
  }
  if (total <= 0.0) throw std::invalid_argument("mean_over_mask: mask sums to zero");
  Node n;
  n.op = PrimOp::mean_over_mask;
  n.inputs = {values};
  n.mask = mask;
  n.mask_total = total;
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) acc += v.data[i] * mask[i];
  n.value = Tensor::scalar(acc / total);
  return push(std::move(n));
}

std::vector<Tensor> GradientTape::backward(ValueId output) const {
  check_id(output, "backward");
  const Node& out_node = node(output);
  if (!out_node.value.is_scalar()) {
    throw std::invalid_argument("backward: output has shape " + shape_to_string(out_node.value.shape) +
                                ", expected a scalar");
  }

  std::vector<Tensor> adj(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) adj[i] = Tensor::zeros(nodes_[i].value.shape);
  adj[static_cast<std::size_t>(output)].data[0] = 1.0;

  for (ValueId id = output; id >= 0; --id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.is_leaf) continue;
    const Tensor& up = adj[static_cast<std::size_t>(id)];

    switch (n.op) {
      case PrimOp::add: {
        Tensor& da = adj[n.inputs[0]];
        Tensor& db = adj[n.inputs[1]];
        for (std::size_t i = 0; i < up.size(); ++i) {
          da.data[i] += up.data[i];
          db.data[i] += up.data[i];
        }
        break;
      }
      case PrimOp::subtract: {
        Tensor& da = adj[n.inputs[0]];
        Tensor& db = adj[n.inputs[1]];
        for (std::size_t i = 0; i < up.size(); ++i) {
          da.data[i] += up.data[i];
          db.data[i] -= up.data[i];
        }
        break;
      }
      case PrimOp::multiply: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        const Tensor& b = nodes_[n.inputs[1]].value;
        Tensor& da = adj[n.inputs[0]];
        Tensor& db = adj[n.inputs[1]];
        for (std::size_t i = 0; i < up.size(); ++i) {
          da.data[i] += up.data[i] * b.data[i];
          db.data[i] += up.data[i] * a.data[i];
        }
        break;
      }
      case PrimOp::scalar_multiply: {
        Tensor& da = adj[n.inputs[0]];
        for (std::size_t i = 0; i < up.size(); ++i) da.data[i] += up.data[i] * n.scalar;
        break;
      }
      case PrimOp::matmul: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        const Tensor& b = nodes_[n.inputs[1]].value;
        Tensor& da = adj[n.inputs[0]];
        Tensor& db = adj[n.inputs[1]];
        const std::size_t m = a.rows(), k = a.cols(), p = b.cols();
        // dA += up . B^T ; dB += A^T . up
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < p; ++j) {
            const double u = up.at(i, j);
            if (u == 0.0) continue;
            for (std::size_t l = 0; l < k; ++l) {
              da.at(i, l) += u * b.at(l, j);
              db.at(l, j) += u * a.at(i, l);
            }
          }
        }
        break;
      }
      case PrimOp::embedding_lookup: {
        const std::size_t e = n.value.cols();
        Tensor& dt = adj[n.inputs[0]];
        for (std::size_t i = 0; i < n.indices.size(); ++i) {
          double* dst = dt.data.data() + static_cast<std::size_t>(n.indices[i]) * e;
          const double* src = up.data.data() + i * e;
          for (std::size_t j = 0; j < e; ++j) dst[j] += src[j];
        }
        break;
      }
      case PrimOp::relu: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        Tensor& da = adj[n.inputs[0]];
        for (std::size_t i = 0; i < up.size(); ++i) {
          if (a.data[i] > 0.0) da.data[i] += up.data[i];
        }
        break;
      }
      case PrimOp::tanh_fn: {
        Tensor& da = adj[n.inputs[0]];
        for (std::size_t i = 0; i < up.size(); ++i) {
          const double t = n.value.data[i];
          da.data[i] += up.data[i] * (1.0 - t * t);
        }
        break;
      }
      case PrimOp::log_sum_exp: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        Tensor& da = adj[n.inputs[0]];
        for (std::size_t i = 0; i < a.rows(); ++i) {
          const double u = up.data[i];
          if (u == 0.0) continue;
          const double lse = n.value.data[i];
          for (std::size_t j = 0; j < a.cols(); ++j) {
            da.at(i, j) += u * std::exp(a.at(i, j) - lse);
          }
        }
        break;
      }
      case PrimOp::softmax_xent: {
        const Tensor& z = nodes_[n.inputs[0]].value;
        Tensor& dz = adj[n.inputs[0]];
        for (std::size_t i = 0; i < z.rows(); ++i) {
          const double u = up.data[i];
          if (u == 0.0) continue;
          const double* row = z.data.data() + i * z.cols();
          const double lse = stable_lse_row(row, z.cols());
          for (std::size_t j = 0; j < z.cols(); ++j) {
            const double p = std::exp(row[j] - lse);
            const double onehot = (static_cast<std::size_t>(n.indices[i]) == j) ? 1.0 : 0.0;
            dz.at(i, j) += u * (p - onehot);
          }
        }
        break;
      }
      case PrimOp::mean_over_mask: {
        Tensor& dv = adj[n.inputs[0]];
        const double u = up.data[0];
        for (std::size_t i = 0; i < dv.size(); ++i) dv.data[i] += u * n.mask[i] / n.mask_total;
        break;
      }
    }
  }

  std::vector<Tensor> grads;
  grads.reserve(leaves_.size());
  for (const ValueId id : leaves_) grads.push_back(adj[static_cast<std::size_t>(id)]);
  return grads;
}

}  // namespace adaptmix
