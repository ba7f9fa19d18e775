#ifndef TIDE_TAPE_HPP
#define TIDE_TAPE_HPP

#include <functional>
#include <limits>
#include <vector>

#include "tide/rng.hpp"
#include "tide/tensor.hpp"

namespace tide {

/// Whether stochastic layers (dropout) are active.
enum class Mode { train, eval };

class Tape;
class Gradients;

/// Handle to a node on a tape. Valid only for the tape that produced it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape: nodes are appended in evaluation order, so creation
/// order is already a topological order and the backward pass is a single
/// reverse sweep. One tape records one forward computation.
class Tape {
 public:
  using BackwardFn = std::function<void(const Tape&, const Tensor&, Gradients&)>;

  /// Put a tensor on the tape. Gradients flow into it only when
  /// requires_grad is set.
  Var leaf(Tensor value, bool requires_grad = false);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;

  /// Reverse sweep from a scalar loss node. Nodes that do not lead to the
  /// loss keep a zero gradient (Gradients::get fills zeros on demand).
  Gradients backward(Var loss) const;

  int size() const { return static_cast<int>(nodes_.size()); }

  /// Smallest |x| seen by any relu input element on this tape; infinity
  /// before the first relu. Lets gradient-check fixtures verify that all
  /// pre-activations stay clear of the kink.
  double min_abs_relu_input() const { return min_abs_relu_input_; }
  void note_relu_input(double abs_value) {
    if (abs_value < min_abs_relu_input_) min_abs_relu_input_ = abs_value;
  }

  /// Internal: append a computed node. Used by the op free functions.
  Var emplace(Tensor value, std::vector<int> inputs, BackwardFn backward);

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    BackwardFn backward;  // empty for leaves and constant subgraphs
  };

  std::vector<Node> nodes_;
  double min_abs_relu_input_ = std::numeric_limits<double>::infinity();
};

/// Gradient buffers keyed by tape node. Absent entries read as zeros.
class Gradients {
 public:
  explicit Gradients(const Tape& tape) : tape_(&tape), grads_(tape.size()) {}

  /// Accumulation slot shaped like the node's value.
  Tensor& slot(Var v);
  Tensor& slot(int id);

  bool has(int id) const { return !grads_[static_cast<std::size_t>(id)].empty; }

  /// Gradient of the node, zeros if the node never received one.
  Tensor get(Var v) const;

 private:
  friend class Tape;
  struct Entry {
    Tensor grad;
    bool empty = true;
  };
  const Tape* tape_;
  std::vector<Entry> grads_;
};

// ---- differentiable ops ---------------------------------------------------

/// Matrix product a[m,k] * b[k,n].
Var matmul(Tape& t, Var a, Var b);

/// x[m,in] * w[in,out] + row-broadcast bias[out].
Var affine(Tape& t, Var x, Var w, Var b);

/// Elementwise sum of same-shape tensors.
Var add(Tape& t, Var a, Var b);

/// Elementwise max(x, 0).
Var relu(Tape& t, Var x);

/// Row-wise layer normalisation of x[m,d] with learnable gain[d], bias[d].
/// Uses population variance and the given epsilon inside the square root.
Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps = 1e-6);

/// Inverted dropout: in train mode zeroes entries with probability p and
/// scales survivors by 1/(1-p); identity in eval mode or at p == 0.
/// Requires p in [0, 1).
Var dropout(Tape& t, Var x, double p, Mode mode, Rng& rng);

/// Dropout with a caller-supplied 0/1 mask; fixes the stochastic choice so
/// finite-difference probes see a deterministic function.
Var dropout_with_mask(Tape& t, Var x, Tensor mask, double p);

/// Horizontal concatenation of rank-2 tensors with equal row counts.
Var concat_cols(Tape& t, const std::vector<Var>& parts);

/// Columns [start, start+count) of a rank-2 tensor.
Var slice_cols(Tape& t, Var x, Index start, Index count);

/// Same elements, new shape.
Var reshape(Tape& t, Var x, std::vector<Index> shape);

/// Mean squared error against a constant target: mean over all entries of
/// (pred - target)^2. Returns a scalar node.
Var mse_loss(Tape& t, Var pred, Tensor target);

/// Per-row constant affine map: out(i,j) = x(i,j) * scale(i) + shift(i).
/// scale and shift carry no gradient (window statistics).
Var row_affine_const(Tape& t, Var x, Eigen::VectorXd scale, Eigen::VectorXd shift);

/// Per-row learnable affine with shared parameters selected by index:
/// out(i,j) = x(i,j) * gain(index[i]) + bias(index[i]).
Var series_affine(Tape& t, Var x, Var gain, Var bias, std::vector<int> index);

/// Inverse of series_affine: out(i,j) = (x(i,j) - bias(index[i])) / gain(index[i]).
/// Gains with magnitude below 1e-8 are clamped away from zero.
Var series_affine_inverse(Tape& t, Var x, Var gain, Var bias, std::vector<int> index);

}  // namespace tide

#endif  // TIDE_TAPE_HPP
