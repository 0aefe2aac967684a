#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "dssddi/numkit/tensor.hpp"

namespace dssddi::numkit {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while
/// the owning tape is alive.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recording of one forward pass. Nodes are appended in
/// evaluation order and backward() walks them in exactly the reverse order.
/// Leaves that no gradient reaches report all-zero gradients.
class Tape {
 public:
  /// Receives the gradient flowing into a node and accumulates into the
  /// node's inputs through Tape::accumulate.
  using BackwardFn = std::function<void(Tape&, const Tensor&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Non-differentiable input.
  Var constant(Tensor value);
  /// Differentiable input owned by the tape.
  Var leaf(Tensor value);
  /// Differentiable view of an external parameter. Repeated calls with the
  /// same tensor return the same Var.
  Var parameter(Tensor& param);

  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  const Tensor& value_at(std::size_t id) const { return nodes_[id].value; }
  /// Gradient of the last backward() target with respect to v.
  Tensor grad(Var v) const;
  /// Gradient for a tensor registered with parameter(); zeros if the
  /// parameter was never bound on this tape.
  Tensor parameter_grad(const Tensor& param) const;

  void backward(Var loss);

  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  void accumulate(std::size_t id, const Tensor& g);
  /// Mutable gradient buffer for ops that scatter into an input.
  Tensor& grad_buffer(std::size_t id);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    bool needs_grad = false;
  };
  Var push(Node node);

  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, std::size_t> params_;
};

// Differentiable primitives. Shapes follow the row-per-node convention:
// an n x d matrix holds d features for each of n nodes.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// x + b with b a 1 x d row broadcast over the rows of x.
Var add_row(Var x, Var b);
Var scale(Var x, double c);
/// s * x with s a learnable 1 x 1 scalar.
Var scalar_mul(Var s, Var x);
/// s + c for a 1 x 1 scalar s.
Var add_const(Var x, double c);
Var relu(Var x);
Var leaky_relu(Var x, double slope);
Var tanh(Var x);
Var sigmoid(Var x);
Var concat_cols(std::span<const Var> parts);
Var gather_rows(Var x, std::vector<std::size_t> index);
/// A x for a fixed sparse operator A.
Var spmm(std::shared_ptr<const SparseMatrix> a, Var x);
/// Row-wise inner products: out(i) = a.row(i) . b.row(i); shape n x 1.
Var row_dot(Var a, Var b);
Var sum(Var x);
Var mean(Var x);

/// Batch normalization over the row dimension in training mode:
/// (x - mean) / sqrt(var + eps) * gamma + beta with biased variance.
/// Writes the batch statistics to mean_out / var_out when non-null.
Var batch_norm_train(Var x, Var gamma, Var beta, double eps, Tensor* mean_out = nullptr,
                     Tensor* var_out = nullptr);
/// Inference-mode batch normalization with fixed statistics.
Var batch_norm_eval(Var x, Var gamma, Var beta, const Tensor& running_mean,
                    const Tensor& running_var, double eps);

/// Mean of squared differences against a fixed target.
Var mse_loss(Var pred, const Tensor& target);
/// Mean binary cross-entropy of sigmoid(logits) against fixed 0/1 targets,
/// computed in the numerically stable log-sum-exp form.
Var bce_with_logits(Var logits, const Tensor& target);

}  // namespace dssddi::numkit
