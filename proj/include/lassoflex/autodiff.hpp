#pragma once

// Reverse-mode gradient engine for the fixed set of operations the
// LassoFlexNet and LassoNet graphs need. Nodes are appended in evaluation
// order, so replaying the tape back to front is a reverse topological walk.

#include <cstddef>
#include <deque>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "lassoflex/tensor.hpp"

namespace lfn::nd {

/// A learnable tensor plus its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad = Tensor(value.shape()); }
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; only valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor t);
  /// Leaf bound to a parameter; backward() accumulates into p.grad.
  Var param(Parameter& p);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Adds `g` into the gradient slot of `v` (allocating it on first use).
  void accumulate(Var v, const Tensor& g);
  void accumulate(std::size_t id, std::span<const double> g);
  Tensor& grad_slot(Var v);

  /// Records a computed node. `backward` receives the output gradient and
  /// must accumulate into the parents it captured.
  Var record(Tensor value, bool requires_grad, Backward backward);

  /// Seeds d(loss)/d(loss) = 1 and replays the tape backward once.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    Backward backward;
    Parameter* param = nullptr;
  };
  std::deque<Node> nodes_;  // stable references across record()
};

// ---- operations -----------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// x + b where b's extents equal the trailing extents of x (row broadcast).
Var add_trailing(Var x, Var b);
Var scale(Var x, double s);
Var relu(Var x);

/// tanh-approximated GELU:
///   0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
Var gelu(Var x);
inline constexpr double kGeluCubic = 0.044715;

/// Normalizes over the last axis; gamma/offset extents equal the trailing
/// extents of x (either [d] or [tokens, d]).
Var layernorm(Var x, Var gamma, Var offset, double eps = 1e-5);

/// Running statistics tracked by batchnorm_fixed between calls.
struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;
  bool initialized = false;

  explicit BatchNormState(std::size_t columns = 0)
      : running_mean({columns}, 0.0), running_var({columns}, 1.0) {}
};

/// Parameter-free batch normalization over the first axis of a 2-D input.
/// Training mode uses batch statistics and updates `state`; evaluation mode
/// uses the tracked statistics. The denominator is sqrt(var + eps^2), so a
/// constant column maps to 0 and non-degenerate columns come out with unit
/// variance to within eps^2 / var.
Var batchnorm_fixed(Var x, BatchNormState& state, bool training);

/// Inverted dropout. Identity when !training or p == 0.
Var dropout(Var x, double p, bool training, std::mt19937_64& rng);

Var reshape(Var x, Shape shape);
/// [B, a, b] -> [B, b, a]
Var transpose12(Var x);
/// Mean over the last axis: [..., e] -> [...]
Var mean_last(Var x);
/// Mean over axis 1 of a 3-D tensor: [B, d, e] -> [B, e]
Var mean_axis1(Var x);
/// Per-feature linear map: x [B, d, p] times w [d, p, q] -> [B, d, q].
/// Feature i only ever touches w[i].
Var featurewise_matmul(Var x, Var w);

/// Mean squared error against a target of the same numel; returns [1].
Var mse_loss(Var pred, const Tensor& target);
/// Mean softmax cross-entropy of logits [B, C] against class ids.
Var softmax_xent(Var logits, const std::vector<int>& labels);
Var sum_all(Var x);

}  // namespace lfn::nd
