#include "tide/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "tide/errors.hpp"

namespace tide {

namespace {

void check_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected rank 2, shape is " + t.shape_str());
  }
}

void check_rank1(const Tensor& t, const char* op) {
  if (t.rank() != 1) {
    throw ShapeError(std::string(op) + ": expected rank 1, shape is " + t.shape_str());
  }
}

}  // namespace

// ---- Tape -----------------------------------------------------------------

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Tape::value(Var v) const {
  if (v.id < 0 || v.id >= size()) {
    throw std::out_of_range("Tape::value: invalid node id " + std::to_string(v.id));
  }
  return nodes_[static_cast<std::size_t>(v.id)].value;
}

bool Tape::requires_grad(Var v) const {
  return nodes_[static_cast<std::size_t>(v.id)].requires_grad;
}

Var Tape::emplace(Tensor value, std::vector<int> inputs, BackwardFn backward) {
  bool needs_grad = false;
  for (int id : inputs) {
    needs_grad = needs_grad || nodes_[static_cast<std::size_t>(id)].requires_grad;
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = needs_grad;
  if (needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Gradients Tape::backward(Var loss) const {
  const Tensor& lv = value(loss);
  if (lv.numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, shape is " + lv.shape_str());
  }
  Gradients g(*this);
  g.slot(loss)[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.backward || !g.has(id)) continue;
    n.backward(*this, g.grads_[static_cast<std::size_t>(id)].grad, g);
  }
  return g;
}

// ---- Gradients ------------------------------------------------------------

Tensor& Gradients::slot(int id) {
  Entry& e = grads_[static_cast<std::size_t>(id)];
  if (e.empty) {
    e.grad = Tensor(tape_->value(Var{id}).shape());
    e.empty = false;
  }
  return e.grad;
}

Tensor& Gradients::slot(Var v) { return slot(v.id); }

Tensor Gradients::get(Var v) const {
  const Entry& e = grads_.at(static_cast<std::size_t>(v.id));
  if (e.empty) return Tensor(tape_->value(v).shape());
  return e.grad;
}

// ---- ops ------------------------------------------------------------------

Var matmul(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  check_rank2(av, "matmul lhs");
  check_rank2(bv, "matmul rhs");
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + av.shape_str() + " vs " +
                     bv.shape_str());
  }
  Tensor out({av.rows(), bv.cols()});
  out.mat().noalias() = av.mat() * bv.mat();
  return t.emplace(std::move(out), {a.id, b.id},
                   [a, b](const Tape& tp, const Tensor& gout, Gradients& g) {
                     const Tensor& A = tp.value(a);
                     const Tensor& B = tp.value(b);
                     ConstMatMap G = gout.as_mat(A.rows(), B.cols());
                     g.slot(a).mat().noalias() += G * B.mat().transpose();
                     g.slot(b).mat().noalias() += A.mat().transpose() * G;
                   });
}

Var affine(Tape& t, Var x, Var w, Var b) {
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(w);
  const Tensor& bv = t.value(b);
  check_rank2(xv, "affine input");
  check_rank2(wv, "affine weight");
  check_rank1(bv, "affine bias");
  if (xv.cols() != wv.rows()) {
    throw ShapeError("affine: input " + xv.shape_str() + " does not match weight " +
                     wv.shape_str());
  }
  if (bv.dim(0) != wv.cols()) {
    throw ShapeError("affine: bias " + bv.shape_str() + " does not match weight " +
                     wv.shape_str());
  }
  Tensor out({xv.rows(), wv.cols()});
  out.mat().noalias() = xv.mat() * wv.mat();
  out.mat().rowwise() += bv.flat().transpose();
  return t.emplace(std::move(out), {x.id, w.id, b.id},
                   [x, w, b](const Tape& tp, const Tensor& gout, Gradients& g) {
                     const Tensor& X = tp.value(x);
                     const Tensor& W = tp.value(w);
                     ConstMatMap G = gout.as_mat(X.rows(), W.cols());
                     g.slot(x).mat().noalias() += G * W.mat().transpose();
                     g.slot(w).mat().noalias() += X.mat().transpose() * G;
                     g.slot(b).flat() += G.colwise().sum().transpose();
                   });
}

Var add(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  check_same_shape(av, bv, "add");
  Tensor out = av;
  out.flat() += bv.flat();
  return t.emplace(std::move(out), {a.id, b.id},
                   [a, b](const Tape&, const Tensor& gout, Gradients& g) {
                     g.slot(a).flat() += gout.flat();
                     g.slot(b).flat() += gout.flat();
                   });
}

Var relu(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  for (Index i = 0; i < xv.numel(); ++i) t.note_relu_input(std::abs(xv[i]));
  Tensor out = xv;
  out.flat() = out.flat().cwiseMax(0.0);
  return t.emplace(std::move(out), {x.id},
                   [x](const Tape& tp, const Tensor& gout, Gradients& g) {
                     const Tensor& X = tp.value(x);
                     g.slot(x).flat().array() +=
                         gout.flat().array() * (X.flat().array() > 0.0).cast<double>();
                   });
}

Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps) {
  const Tensor& xv = t.value(x);
  const Tensor& gv = t.value(gain);
  const Tensor& bv = t.value(bias);
  check_rank2(xv, "layer_norm input");
  check_rank1(gv, "layer_norm gain");
  check_rank1(bv, "layer_norm bias");
  const Index m = xv.rows();
  const Index d = xv.cols();
  if (gv.dim(0) != d || bv.dim(0) != d) {
    throw ShapeError("layer_norm: input " + xv.shape_str() + " needs gain/bias of size " +
                     std::to_string(d) + ", got " + gv.shape_str() + " and " +
                     bv.shape_str());
  }
  if (eps <= 0.0) throw std::invalid_argument("layer_norm: eps must be positive");

  // Normalise each row with its own mean and population variance, then
  // apply the learnable per-feature affine.
  Tensor xhat({m, d});
  Eigen::VectorXd inv_std(m);
  {
    ConstMatMap X = xv.mat();
    MatMap H = xhat.mat();
    for (Index i = 0; i < m; ++i) {
      const double mu = X.row(i).mean();
      const double var = (X.row(i).array() - mu).square().mean();
      const double inv = 1.0 / std::sqrt(var + eps);
      inv_std(i) = inv;
      H.row(i) = (X.row(i).array() - mu) * inv;
    }
  }
  Tensor out({m, d});
  out.mat() = (xhat.mat().array().rowwise() * gv.flat().transpose().array()).matrix();
  out.mat().rowwise() += bv.flat().transpose();

  return t.emplace(
      std::move(out), {x.id, gain.id, bias.id},
      [x, gain, bias, xhat, inv_std, m, d](const Tape& tp, const Tensor& gout,
                                           Gradients& g) {
        const Tensor& gv2 = tp.value(gain);
        ConstMatMap G = gout.as_mat(m, d);
        ConstMatMap H = xhat.mat();
        g.slot(gain).flat() +=
            (G.array() * H.array()).colwise().sum().matrix().transpose();
        g.slot(bias).flat() += G.colwise().sum().transpose();
        MatMap dX = g.slot(x).mat();
        for (Index i = 0; i < m; ++i) {
          Eigen::ArrayXd gh = G.row(i).transpose().array() * gv2.flat().array();
          const double sum_gh = gh.sum();
          const double sum_gh_h = (gh * H.row(i).transpose().array()).sum();
          dX.row(i).array() += (inv_std(i) / static_cast<double>(d)) *
                               (static_cast<double>(d) * gh.transpose() - sum_gh -
                                H.row(i).array() * sum_gh_h);
        }
      });
}

Var dropout(Tape& t, Var x, double p, Mode mode, Rng& rng) {
  if (p < 0.0 || p >= 1.0) {
    throw std::invalid_argument("dropout: p must lie in [0, 1), got " + std::to_string(p));
  }
  if (mode == Mode::eval || p == 0.0) return x;
  const Tensor& xv = t.value(x);
  Tensor mask(xv.shape());
  for (Index i = 0; i < mask.numel(); ++i) mask[i] = rng.uniform() >= p ? 1.0 : 0.0;
  return dropout_with_mask(t, x, std::move(mask), p);
}

Var dropout_with_mask(Tape& t, Var x, Tensor mask, double p) {
  if (p < 0.0 || p >= 1.0) {
    throw std::invalid_argument("dropout: p must lie in [0, 1), got " + std::to_string(p));
  }
  const Tensor& xv = t.value(x);
  check_same_shape(xv, mask, "dropout mask");
  const double scale = 1.0 / (1.0 - p);
  Tensor out = xv;
  out.flat().array() *= mask.flat().array() * scale;
  return t.emplace(std::move(out), {x.id},
                   [x, mask = std::move(mask), scale](const Tape&, const Tensor& gout,
                                                      Gradients& g) {
                     g.slot(x).flat().array() +=
                         gout.flat().array() * mask.flat().array() * scale;
                   });
}

Var concat_cols(Tape& t, const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const Index m = t.value(parts[0]).rows();
  Index total = 0;
  for (Var p : parts) {
    const Tensor& pv = t.value(p);
    check_rank2(pv, "concat_cols input");
    if (pv.rows() != m) {
      throw ShapeError("concat_cols: row counts differ, " + t.value(parts[0]).shape_str() +
                       " vs " + pv.shape_str());
    }
    total += pv.cols();
  }
  Tensor out({m, total});
  Index off = 0;
  for (Var p : parts) {
    const Tensor& pv = t.value(p);
    out.mat().middleCols(off, pv.cols()) = pv.mat();
    off += pv.cols();
  }
  std::vector<int> ids;
  ids.reserve(parts.size());
  for (Var p : parts) ids.push_back(p.id);
  return t.emplace(std::move(out), ids,
                   [parts](const Tape& tp, const Tensor& gout, Gradients& g) {
                     const Index rows = tp.value(parts[0]).rows();
                     Index off2 = 0;
                     for (Var p : parts) {
                       const Index c = tp.value(p).cols();
                       if (tp.requires_grad(p)) {
                         g.slot(p).mat() +=
                             gout.as_mat(rows, gout.numel() / rows).middleCols(off2, c);
                       }
                       off2 += c;
                     }
                   });
}

Var slice_cols(Tape& t, Var x, Index start, Index count) {
  const Tensor& xv = t.value(x);
  check_rank2(xv, "slice_cols input");
  if (start < 0 || count < 0 || start + count > xv.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") exceeds shape " + xv.shape_str());
  }
  Tensor out({xv.rows(), count});
  out.mat() = xv.mat().middleCols(start, count);
  return t.emplace(std::move(out), {x.id},
                   [x, start, count](const Tape& tp, const Tensor& gout, Gradients& g) {
                     const Index rows = tp.value(x).rows();
                     g.slot(x).mat().middleCols(start, count) += gout.as_mat(rows, count);
                   });
}

Var reshape(Tape& t, Var x, std::vector<Index> shape) {
  const Tensor& xv = t.value(x);
  Tensor out = xv.reshaped(std::move(shape));
  return t.emplace(std::move(out), {x.id},
                   [x](const Tape&, const Tensor& gout, Gradients& g) {
                     g.slot(x).flat() += gout.flat();
                   });
}

Var mse_loss(Tape& t, Var pred, Tensor target) {
  const Tensor& pv = t.value(pred);
  check_same_shape(pv, target, "mse_loss");
  if (pv.numel() == 0) throw ShapeError("mse_loss: empty prediction");
  const double n = static_cast<double>(pv.numel());
  Tensor out({1});
  out[0] = (pv.flat() - target.flat()).squaredNorm() / n;
  return t.emplace(std::move(out), {pred.id},
                   [pred, target = std::move(target), n](const Tape& tp, const Tensor& gout,
                                                         Gradients& g) {
                     const Tensor& P = tp.value(pred);
                     g.slot(pred).flat() +=
                         (2.0 / n) * gout[0] * (P.flat() - target.flat());
                   });
}

Var row_affine_const(Tape& t, Var x, Eigen::VectorXd scale, Eigen::VectorXd shift) {
  const Tensor& xv = t.value(x);
  check_rank2(xv, "row_affine_const input");
  if (scale.size() != xv.rows() || shift.size() != xv.rows()) {
    throw ShapeError("row_affine_const: " + std::to_string(scale.size()) + " scales and " +
                     std::to_string(shift.size()) + " shifts for input " + xv.shape_str());
  }
  Tensor out({xv.rows(), xv.cols()});
  out.mat() =
      ((xv.mat().array().colwise() * scale.array()).colwise() + shift.array()).matrix();
  return t.emplace(std::move(out), {x.id},
                   [x, scale = std::move(scale)](const Tape& tp, const Tensor& gout,
                                                 Gradients& g) {
                     const Tensor& X = tp.value(x);
                     g.slot(x).mat().array() +=
                         gout.as_mat(X.rows(), X.cols()).array().colwise() * scale.array();
                   });
}

namespace {

void check_series_affine(const Tensor& xv, const Tensor& gv, const Tensor& bv,
                         const std::vector<int>& index, const char* op) {
  check_rank2(xv, op);
  check_rank1(gv, op);
  check_rank1(bv, op);
  if (gv.dim(0) != bv.dim(0)) {
    throw ShapeError(std::string(op) + ": gain " + gv.shape_str() + " does not match bias " +
                     bv.shape_str());
  }
  if (static_cast<Index>(index.size()) != xv.rows()) {
    throw ShapeError(std::string(op) + ": " + std::to_string(index.size()) +
                     " row indices for input " + xv.shape_str());
  }
  for (int s : index) {
    if (s < 0 || s >= gv.dim(0)) {
      throw std::out_of_range(std::string(op) + ": series index " + std::to_string(s) +
                              " outside [0, " + std::to_string(gv.dim(0)) + ")");
    }
  }
}

double guarded(double gain) {
  if (std::abs(gain) < 1e-8) return gain < 0.0 ? -1e-8 : 1e-8;
  return gain;
}

}  // namespace

Var series_affine(Tape& t, Var x, Var gain, Var bias, std::vector<int> index) {
  const Tensor& xv = t.value(x);
  const Tensor& gv = t.value(gain);
  const Tensor& bv = t.value(bias);
  check_series_affine(xv, gv, bv, index, "series_affine");
  Tensor out({xv.rows(), xv.cols()});
  for (Index i = 0; i < xv.rows(); ++i) {
    const int s = index[static_cast<std::size_t>(i)];
    out.mat().row(i) = (xv.mat().row(i).array() * gv[s] + bv[s]).matrix();
  }
  return t.emplace(
      std::move(out), {x.id, gain.id, bias.id},
      [x, gain, bias, index = std::move(index)](const Tape& tp, const Tensor& gout,
                                                Gradients& g) {
        const Tensor& X = tp.value(x);
        const Tensor& G = tp.value(gain);
        ConstMatMap Go = gout.as_mat(X.rows(), X.cols());
        for (Index i = 0; i < X.rows(); ++i) {
          const int s = index[static_cast<std::size_t>(i)];
          g.slot(x).mat().row(i) += Go.row(i) * G[s];
          g.slot(gain)[s] += (Go.row(i).array() * X.mat().row(i).array()).sum();
          g.slot(bias)[s] += Go.row(i).sum();
        }
      });
}

Var series_affine_inverse(Tape& t, Var x, Var gain, Var bias, std::vector<int> index) {
  const Tensor& xv = t.value(x);
  const Tensor& gv = t.value(gain);
  const Tensor& bv = t.value(bias);
  check_series_affine(xv, gv, bv, index, "series_affine_inverse");
  Tensor out({xv.rows(), xv.cols()});
  for (Index i = 0; i < xv.rows(); ++i) {
    const int s = index[static_cast<std::size_t>(i)];
    out.mat().row(i) = ((xv.mat().row(i).array() - bv[s]) / guarded(gv[s])).matrix();
  }
  return t.emplace(
      std::move(out), {x.id, gain.id, bias.id},
      [x, gain, bias, index = std::move(index)](const Tape& tp, const Tensor& gout,
                                                Gradients& g) {
        const Tensor& X = tp.value(x);
        const Tensor& G = tp.value(gain);
        const Tensor& B = tp.value(bias);
        ConstMatMap Go = gout.as_mat(X.rows(), X.cols());
        for (Index i = 0; i < X.rows(); ++i) {
          const int s = index[static_cast<std::size_t>(i)];
          const double inv = 1.0 / guarded(G[s]);
          g.slot(x).mat().row(i) += Go.row(i) * inv;
          g.slot(bias)[s] -= Go.row(i).sum() * inv;
          g.slot(gain)[s] -=
              (Go.row(i).array() * (X.mat().row(i).array() - B[s])).sum() * inv * inv;
        }
      });
}

}  // namespace tide
