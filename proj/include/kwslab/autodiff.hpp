#pragma once

// Tape-based reverse-mode differentiation over dense tensors.
//
// Nodes are appended in evaluation order, so the tape index order is a
// topological order and backward() is a single reverse sweep.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "kwslab/errors.hpp"
#include "kwslab/random.hpp"
#include "kwslab/tensor.hpp"

namespace kws::ad {

enum class Op {
  leaf,
  conv2d,
  max_pool2d,
  affine,
  relu,
  dropout,
  softmax,
  log,
  sum,
  add,
  sub,
  mul,
  scale,
  add_scalar,
  square,
  pick,
  reshape,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::conv2d: return "conv2d";
    case Op::max_pool2d: return "max_pool2d";
    case Op::affine: return "affine";
    case Op::relu: return "relu";
    case Op::dropout: return "dropout";
    case Op::softmax: return "softmax";
    case Op::log: return "log";
    case Op::sum: return "sum";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::scale: return "scale";
    case Op::add_scalar: return "add_scalar";
    case Op::square: return "square";
    case Op::pick: return "pick";
    case Op::reshape: return "reshape";
  }
  return "?";
}

template <typename Scalar>
class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <typename Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<Scalar>& value() const { return tape->value(*this); }
  const Shape& shape() const { return value().shape; }
  Index size() const { return value().size(); }
};

template <typename Scalar>
class Tape {
 public:
  using T = Tensor<Scalar>;
  using Backward = std::function<void(Tape&, std::size_t)>;

  struct Node {
    Op op = Op::leaf;
    std::vector<std::size_t> inputs;
    T value;
    const T* external = nullptr;
    T grad;
    bool has_grad = false;
    bool requires_grad = false;
    T* grad_sink = nullptr;
    Backward backward;

    const T& val() const { return external ? *external : value; }
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  /// Leaf whose gradient is kept on the tape.
  Var<Scalar> variable(T value) {
    check_finite(value, Op::leaf);
    Node n;
    n.value = std::move(value);
    n.requires_grad = true;
    return append(std::move(n));
  }

  /// Leaf that never receives a gradient.
  Var<Scalar> constant(T value) {
    check_finite(value, Op::leaf);
    Node n;
    n.value = std::move(value);
    return append(std::move(n));
  }

  /// Leaf backed by caller-owned storage. After each backward() the node's
  /// gradient is added into `grad_sink` (when non-null).
  Var<Scalar> parameter(const T& value, T* grad_sink = nullptr) {
    Node n;
    n.external = &value;
    n.requires_grad = true;
    n.grad_sink = grad_sink;
    return append(std::move(n));
  }

  /// Appends an operation node. `backward` receives the tape and this node's
  /// index and must accumulate into the grad slots of inputs that require it.
  Var<Scalar> push(Op op, std::vector<std::size_t> inputs, T value, Backward backward) {
    check_finite(value, op);
    Node n;
    n.op = op;
    n.inputs = std::move(inputs);
    n.value = std::move(value);
    for (auto i : n.inputs) n.requires_grad = n.requires_grad || nodes_[i].requires_grad;
    if (n.requires_grad) n.backward = std::move(backward);
    return append(std::move(n));
  }

  const T& value(Var<Scalar> v) const { return nodes_.at(v.id).val(); }
  const T& value(std::size_t id) const { return nodes_[id].val(); }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  Op op(Var<Scalar> v) const { return nodes_.at(v.id).op; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient of the last backward() root w.r.t. `v`; zeros when unreachable.
  T grad(Var<Scalar> v) const {
    const Node& n = nodes_.at(v.id);
    if (n.has_grad) return n.grad;
    return T::zeros(n.val().shape);
  }

  /// Gradient slot of node `id`, zero-initialised on first touch.
  T& grad_slot(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.has_grad) {
      n.grad = T::zeros(n.val().shape);
      n.has_grad = true;
    }
    return n.grad;
  }
  const T& grad_of(std::size_t id) const { return nodes_[id].grad; }

  void backward(Var<Scalar> root) {
    if (value(root).size() != 1)
      throw ContractViolation("backward() needs a scalar root, got shape " +
                              shape_string(value(root).shape));
    backward(root, T::constant(value(root).shape, Scalar(1)));
  }

  /// Vector-Jacobian product: propagates `seed` (same shape as root) to every
  /// reachable leaf.
  void backward(Var<Scalar> root, const T& seed) {
    if (seed.shape != value(root).shape)
      throw DimensionError("backward seed shape " + shape_string(seed.shape) +
                           " != root shape " + shape_string(value(root).shape));
    for (auto& n : nodes_) {
      n.has_grad = false;
      n.grad = T();
    }
    grad_slot(root.id).data = seed.data;
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad || !n.requires_grad) continue;
      if (n.backward) n.backward(*this, i);
    }
    for (auto& n : nodes_) {
      if (n.has_grad && n.grad_sink) {
        if (n.grad_sink->shape != n.val().shape)
          throw DimensionError("gradient sink shape mismatch");
        n.grad_sink->data += n.grad.data;
      }
    }
  }

 private:
  Var<Scalar> append(Node n) {
    nodes_.push_back(std::move(n));
    return Var<Scalar>{this, nodes_.size() - 1};
  }

  static void check_finite(const T& t, Op op) {
    if (!t.data.allFinite())
      throw NumericError(std::string("non-finite value produced by ") + op_name(op));
  }

  std::vector<Node> nodes_;
};

namespace detail {

template <typename Scalar>
void require_same_tape(Var<Scalar> a, Var<Scalar> b) {
  if (a.tape != b.tape) throw ContractViolation("operands live on different tapes");
}

template <typename Scalar>
void require_same_shape(Var<Scalar> a, Var<Scalar> b, const char* op) {
  require_same_tape(a, b);
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

}  // namespace detail

struct Stride {
  Index rows = 1;
  Index cols = 1;
};

/// Valid (unpadded) 2-D convolution of a [C,H,W] input with [Co,C,kh,kw]
/// kernels, implemented as im2col followed by one GEMM.
template <typename Scalar>
Var<Scalar> conv2d(Var<Scalar> input, Var<Scalar> kernels, Var<Scalar> bias, Stride stride) {
  detail::require_same_tape(input, kernels);
  detail::require_same_tape(input, bias);
  const auto& x = input.value();
  const auto& k = kernels.value();
  if (x.rank() != 3) throw DimensionError("conv2d: input must be [C,H,W], got " + shape_string(x.shape));
  if (k.rank() != 4)
    throw DimensionError("conv2d: kernels must be [Co,C,kh,kw], got " + shape_string(k.shape));
  const Index C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const Index Co = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  if (k.dim(1) != C)
    throw DimensionError("conv2d: kernel axis 1 (" + std::to_string(k.dim(1)) +
                         ") != input axis 0 (" + std::to_string(C) + ")");
  if (kh > H) throw DimensionError("conv2d: kernel height " + std::to_string(kh) + " > input axis 1 (" + std::to_string(H) + ")");
  if (kw > W) throw DimensionError("conv2d: kernel width " + std::to_string(kw) + " > input axis 2 (" + std::to_string(W) + ")");
  if (stride.rows < 1 || stride.cols < 1) throw DimensionError("conv2d: stride must be >= 1");
  if (bias.value().size() != Co)
    throw DimensionError("conv2d: bias length " + std::to_string(bias.value().size()) +
                         " != kernel axis 0 (" + std::to_string(Co) + ")");

  const Index Ho = (H - kh) / stride.rows + 1;
  const Index Wo = (W - kw) / stride.cols + 1;
  const Index patch = C * kh * kw;
  auto cols = std::make_shared<RowMatrix<Scalar>>(patch, Ho * Wo);
  for (Index c = 0; c < C; ++c)
    for (Index i = 0; i < kh; ++i)
      for (Index j = 0; j < kw; ++j) {
        Scalar* dst = cols->row((c * kh + i) * kw + j).data();
        for (Index oh = 0; oh < Ho; ++oh) {
          const Scalar* src = &x.data[(c * H + oh * stride.rows + i) * W + j];
          for (Index ow = 0; ow < Wo; ++ow) dst[oh * Wo + ow] = src[ow * stride.cols];
        }
      }

  Tensor<Scalar> out({Co, Ho, Wo});
  auto out_m = out.matrix(Co, Ho * Wo);
  out_m.noalias() = k.matrix(Co, patch) * (*cols);
  out_m.colwise() += bias.value().data;

  return input.tape->push(
      Op::conv2d, {input.id, kernels.id, bias.id}, std::move(out),
      [=](Tape<Scalar>& tape, std::size_t self) {
        const auto g = tape.grad_of(self).matrix(Co, Ho * Wo);
        if (tape.requires_grad(kernels.id))
          tape.grad_slot(kernels.id).matrix(Co, patch).noalias() += g * cols->transpose();
        if (tape.requires_grad(bias.id)) tape.grad_slot(bias.id).data += g.rowwise().sum().transpose();
        if (tape.requires_grad(input.id)) {
          const RowMatrix<Scalar> dcols = tape.value(kernels.id).matrix(Co, patch).transpose() * g;
          auto& gx = tape.grad_slot(input.id);
          for (Index c = 0; c < C; ++c)
            for (Index i = 0; i < kh; ++i)
              for (Index j = 0; j < kw; ++j) {
                const Scalar* src = dcols.row((c * kh + i) * kw + j).data();
                for (Index oh = 0; oh < Ho; ++oh) {
                  Scalar* dst = &gx.data[(c * H + oh * stride.rows + i) * W + j];
                  for (Index ow = 0; ow < Wo; ++ow) dst[ow * stride.cols] += src[oh * Wo + ow];
                }
              }
        }
      });
}

/// Non-overlapping max pooling over [C,H,W]. The gradient goes to the first
/// (lowest flat index) maximum of each window.
template <typename Scalar>
Var<Scalar> max_pool2d(Var<Scalar> input, Index ph, Index pw) {
  const auto& x = input.value();
  if (x.rank() != 3) throw DimensionError("max_pool2d: input must be [C,H,W], got " + shape_string(x.shape));
  if (ph < 1 || pw < 1) throw ConfigError("max_pool2d: window must be positive");
  const Index C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (H % ph != 0 || W % pw != 0)
    throw ConfigError("max_pool2d: window " + std::to_string(ph) + "x" + std::to_string(pw) +
                      " does not divide input " + std::to_string(H) + "x" + std::to_string(W));
  const Index Ho = H / ph, Wo = W / pw;
  Tensor<Scalar> out({C, Ho, Wo});
  auto argmax = std::make_shared<std::vector<Index>>(out.size());
  for (Index c = 0; c < C; ++c)
    for (Index oh = 0; oh < Ho; ++oh)
      for (Index ow = 0; ow < Wo; ++ow) {
        Index best = (c * H + oh * ph) * W + ow * pw;
        for (Index i = 0; i < ph; ++i)
          for (Index j = 0; j < pw; ++j) {
            const Index idx = (c * H + oh * ph + i) * W + ow * pw + j;
            if (x.data[idx] > x.data[best]) best = idx;
          }
        const Index o = (c * Ho + oh) * Wo + ow;
        out.data[o] = x.data[best];
        (*argmax)[o] = best;
      }
  return input.tape->push(Op::max_pool2d, {input.id}, std::move(out),
                          [=](Tape<Scalar>& tape, std::size_t self) {
                            const auto& g = tape.grad_of(self);
                            auto& gx = tape.grad_slot(input.id);
                            for (Index o = 0; o < g.size(); ++o) gx.data[(*argmax)[o]] += g.data[o];
                          });
}

/// out = W·x + b for x of any shape with n elements and W [m,n].
template <typename Scalar>
Var<Scalar> affine(Var<Scalar> input, Var<Scalar> weights, Var<Scalar> bias) {
  detail::require_same_tape(input, weights);
  detail::require_same_tape(input, bias);
  const auto& w = weights.value();
  if (w.rank() != 2) throw DimensionError("affine: weights must be [m,n], got " + shape_string(w.shape));
  const Index m = w.dim(0), n = w.dim(1);
  if (input.size() != n)
    throw DimensionError("affine: input length " + std::to_string(input.size()) +
                         " != weights axis 1 (" + std::to_string(n) + ")");
  if (bias.size() != m)
    throw DimensionError("affine: bias length " + std::to_string(bias.size()) + " != weights axis 0 (" +
                         std::to_string(m) + ")");
  Tensor<Scalar> out({m});
  out.data.noalias() = w.matrix(m, n) * input.value().data;
  out.data += bias.value().data;
  return input.tape->push(Op::affine, {input.id, weights.id, bias.id}, std::move(out),
                          [=](Tape<Scalar>& tape, std::size_t self) {
                            const auto& g = tape.grad_of(self).data;
                            if (tape.requires_grad(weights.id))
                              tape.grad_slot(weights.id).matrix(m, n).noalias() +=
                                  g * tape.value(input.id).data.transpose();
                            if (tape.requires_grad(bias.id)) tape.grad_slot(bias.id).data += g;
                            if (tape.requires_grad(input.id))
                              tape.grad_slot(input.id).data.noalias() +=
                                  tape.value(weights.id).matrix(m, n).transpose() * g;
                          });
}

template <typename Scalar>
Var<Scalar> relu(Var<Scalar> input) {
  Tensor<Scalar> out = input.value();
  out.data = out.data.cwiseMax(Scalar(0));
  return input.tape->push(Op::relu, {input.id}, std::move(out), [=](Tape<Scalar>& tape, std::size_t self) {
    const auto& x = tape.value(input.id).data;
    tape.grad_slot(input.id).data.array() +=
        (x.array() > Scalar(0)).select(tape.grad_of(self).data.array(), Scalar(0));
  });
}

/// Inverted dropout: surviving units are scaled by 1/(1-rate) in training;
/// identity when `training` is false or rate is zero.
template <typename Scalar>
Var<Scalar> dropout(Var<Scalar> input, double rate, Rng& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must be in [0,1)");
  if (!training || rate == 0.0) return input;
  const Scalar keep_scale = Scalar(1.0 / (1.0 - rate));
  auto mask = std::make_shared<Vec<Scalar>>(input.size());
  for (Index i = 0; i < mask->size(); ++i) (*mask)[i] = rng.uniform() < rate ? Scalar(0) : keep_scale;
  Tensor<Scalar> out = input.value();
  out.data.array() *= mask->array();
  return input.tape->push(Op::dropout, {input.id}, std::move(out), [=](Tape<Scalar>& tape, std::size_t self) {
    tape.grad_slot(input.id).data.array() += tape.grad_of(self).data.array() * mask->array();
  });
}

/// Softmax over all elements, with max subtraction.
template <typename Scalar>
Var<Scalar> softmax(Var<Scalar> logits) {
  const auto& z = logits.value();
  if (z.size() < 2) throw DimensionError("softmax needs at least 2 logits");
  if (z.data.hasNaN()) throw NumericError("softmax: NaN logit");
  Tensor<Scalar> out = z;
  out.data.array() = (z.data.array() - z.data.maxCoeff()).exp();
  out.data /= out.data.sum();
  return logits.tape->push(Op::softmax, {logits.id}, std::move(out), [=](Tape<Scalar>& tape, std::size_t self) {
    const auto& p = tape.value(self).data;
    const auto& g = tape.grad_of(self).data;
    const Scalar dot = g.dot(p);
    tape.grad_slot(logits.id).data.array() += p.array() * (g.array() - dot);
  });
}

/// Natural log of max(x, floor). Entries at or below the floor get zero gradient.
template <typename Scalar>
Var<Scalar> log(Var<Scalar> input, Scalar floor = Scalar(0)) {
  const auto& x = input.value();
  Tensor<Scalar> out = x;
  for (Index i = 0; i < x.size(); ++i) out.data[i] = std::log(std::max(x.data[i], floor));
  return input.tape->push(Op::log, {input.id}, std::move(out), [=](Tape<Scalar>& tape, std::size_t self) {
    const auto& xv = tape.value(input.id).data;
    const auto& g = tape.grad_of(self).data;
    auto& gx = tape.grad_slot(input.id).data;
    for (Index i = 0; i < xv.size(); ++i)
      if (xv[i] > floor) gx[i] += g[i] * (Scalar(1) / xv[i]);
  });
}

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> input) {
  Tensor<Scalar> out({1});
  out.data[0] = input.value().data.sum();
  return input.tape->push(Op::sum, {input.id}, std::move(out), [=](Tape<Scalar>& tape, std::size_t self) {
    tape.grad_slot(input.id).data.array() += tape.grad_of(self).data[0];
  });
}

template <typename Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_shape(a, b, "add");
  Tensor<Scalar> out = a.value();
  out.data += b.value().data;
  return a.tape->push(Op::add, {a.id, b.id}, std::move(out), [=](Tape<Scalar>& tape, std::size_t self) {
    const auto& g = tape.grad_of(self).data;
    if (tape.requires_grad(a.id)) tape.grad_slot(a.id).data += g;
    if (tape.requires_grad(b.id)) tape.grad_slot(b.id).data += g;
  });
}

template <typename Scalar>
Var<Scalar> operator-(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_shape(a, b, "sub");
  Tensor<Scalar> out = a.value();
  out.data -= b.value().data;
  return a.tape->push(Op::sub, {a.id, b.id}, std::move(out), [=](Tape<Scalar>& tape, std::size_t self) {
    const auto& g = tape.grad_of(self).data;
    if (tape.requires_grad(a.id)) tape.grad_slot(a.id).data += g;
    if (tape.requires_grad(b.id)) tape.grad_slot(b.id).data -= g;
  });
}

/// Elementwise product.
template <typename Scalar>
Var<Scalar> operator*(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_shape(a, b, "mul");
  Tensor<Scalar> out = a.value();
  out.data.array() *= b.value().data.array();
  return a.tape->push(Op::mul, {a.id, b.id}, std::move(out), [=](Tape<Scalar>& tape, std::size_t self) {
    const auto& g = tape.grad_of(self).data;
    if (tape.requires_grad(a.id)) tape.grad_slot(a.id).data.array() += g.array() * tape.value(b.id).data.array();
    if (tape.requires_grad(b.id)) tape.grad_slot(b.id).data.array() += g.array() * tape.value(a.id).data.array();
  });
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> input, Scalar factor) {
  Tensor<Scalar> out = input.value();
  out.data *= factor;
  return input.tape->push(Op::scale, {input.id}, std::move(out), [=](Tape<Scalar>& tape, std::size_t self) {
    tape.grad_slot(input.id).data += factor * tape.grad_of(self).data;
  });
}

template <typename Scalar>
Var<Scalar> operator-(Var<Scalar> input) {
  return scale(input, Scalar(-1));
}

template <typename Scalar>
Var<Scalar> add_scalar(Var<Scalar> input, Scalar c) {
  Tensor<Scalar> out = input.value();
  out.data.array() += c;
  return input.tape->push(Op::add_scalar, {input.id}, std::move(out), [=](Tape<Scalar>& tape, std::size_t self) {
    tape.grad_slot(input.id).data += tape.grad_of(self).data;
  });
}

template <typename Scalar>
Var<Scalar> square(Var<Scalar> input) {
  Tensor<Scalar> out = input.value();
  out.data = out.data.cwiseAbs2();
  return input.tape->push(Op::square, {input.id}, std::move(out), [=](Tape<Scalar>& tape, std::size_t self) {
    tape.grad_slot(input.id).data.array() +=
        Scalar(2) * tape.value(input.id).data.array() * tape.grad_of(self).data.array();
  });
}

/// Single element at flat index `i`, as a shape-[1] node.
template <typename Scalar>
Var<Scalar> pick(Var<Scalar> input, Index i) {
  if (i < 0 || i >= input.size())
    throw ContractViolation("pick: index " + std::to_string(i) + " outside [0," + std::to_string(input.size()) + ")");
  Tensor<Scalar> out({1});
  out.data[0] = input.value().data[i];
  return input.tape->push(Op::pick, {input.id}, std::move(out), [=](Tape<Scalar>& tape, std::size_t self) {
    tape.grad_slot(input.id).data[i] += tape.grad_of(self).data[0];
  });
}

/// Contiguous slice [begin, begin+count) of the flattened input, reshaped.
template <typename Scalar>
Var<Scalar> slice(Var<Scalar> input, Index begin, Shape shape) {
  const Index count = shape_size(shape);
  if (begin < 0 || begin + count > input.size())
    throw ContractViolation("slice: range outside input of " + std::to_string(input.size()) + " elements");
  Tensor<Scalar> out(std::move(shape), input.value().data.segment(begin, count));
  return input.tape->push(Op::reshape, {input.id}, std::move(out), [=](Tape<Scalar>& tape, std::size_t self) {
    tape.grad_slot(input.id).data.segment(begin, count) += tape.grad_of(self).data;
  });
}

template <typename Scalar>
Var<Scalar> reshape(Var<Scalar> input, Shape shape) {
  if (shape_size(shape) != input.size())
    throw DimensionError("reshape: " + shape_string(input.shape()) + " -> " + shape_string(shape));
  return slice(input, 0, std::move(shape));
}

}  // namespace kws::ad
