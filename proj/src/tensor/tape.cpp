// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "voxelpipe/tensor/tape.hpp"

#include <cmath>
#include <cstring>

namespace voxelpipe {

namespace {

template <typename F>
auto dispatch_float(Dtype dt, F&& f) {
  switch (dt) {
    case Dtype::F32: return f(float{});
    case Dtype::F64: return f(double{});
    default:
      throw Error(ErrKind::Type, "differentiable ops require f32 or f64");
  }
}

// labels flattened to i64 regardless of integer storage dtype
std::vector<int64_t> label_values(const Tensor& labels) {
  std::vector<int64_t> out(labels.numel());
  if (labels.dtype() == Dtype::I64) {
    auto s = labels.data<int64_t>();
    out.assign(s.begin(), s.end());
  } else if (labels.dtype() == Dtype::U8) {
    auto s = labels.data<uint8_t>();
    for (int64_t i = 0; i < labels.numel(); ++i) out[i] = s[i];
  } else {
    for (int64_t i = 0; i < labels.numel(); ++i) {
      double v = labels.at(i);
      out[i] = static_cast<int64_t>(std::llround(v));
      if (static_cast<double>(out[i]) != v)
        throw Error(ErrKind::LabelOutOfRange, "non-integer label value");
    }
  }
  return out;
}

}  // namespace

const char* op_kind_name(OpKind k) {
  switch (k) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Conv2d: return "conv2d";
    case OpKind::ConvT2d: return "conv_transpose2d";
    case OpKind::MaxPool2d: return "maxpool2d";
    case OpKind::Relu: return "relu";
    case OpKind::SoftmaxChannel: return "softmax_channel";
    case OpKind::ConcatChannel: return "concat_channel";
    case OpKind::Add: return "add";
    case OpKind::Mul: return "mul";
    case OpKind::MulScalar: return "mul_scalar";
    case OpKind::GatherLogProb: return "gather_log_prob";
    case OpKind::WeightedSum: return "weighted_sum";
    case OpKind::MeanAll: return "mean_all";
    case OpKind::MaeLoss: return "mae";
    case OpKind::FocalLoss: return "focal_loss";
    case OpKind::DiceLoss: return "dice_loss";
    case OpKind::ArgmaxChannel: return "argmax_channel";
  }
  return "?";
}

const Tape::Node& Tape::node(ValueId id) const {
  if (id < 0 || static_cast<size_t>(id) >= nodes_.size())
    throw Error(ErrKind::Graph, "invalid value id");
  return nodes_[id];
}

Tape::Node& Tape::node(ValueId id) {
  return const_cast<Node&>(static_cast<const Tape*>(this)->node(id));
}

ValueId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  backward_done_ = false;
  return static_cast<ValueId>(nodes_.size() - 1);
}

void Tape::check_float(ValueId id, const char* op) const {
  if (!dtype_is_float(node(id).out.dtype()))
    throw Error(ErrKind::Type,
                std::string(op) + ": operand must be f32/f64, got " +
                    dtype_name(node(id).out.dtype()));
}

ValueId Tape::leaf(Tensor value, bool requires_grad) {
  if (requires_grad && !dtype_is_float(value.dtype()))
    throw Error(ErrKind::Type, "differentiable leaf must be f32/f64");
  Node n;
  n.kind = OpKind::Leaf;
  n.out = std::move(value);
  n.needs_grad = requires_grad;
  return push(std::move(n));
}

ValueId Tape::conv2d(ValueId x, ValueId w, std::optional<ValueId> bias,
                     int64_t stride, int64_t pad) {
  check_float(x, "conv2d");
  const Tensor& xt = node(x).out;
  const Tensor& wt = node(w).out;
  if (xt.rank() != 4 || wt.rank() != 4)
    throw Error(ErrKind::Shape, "conv2d: expects x[B,C,H,W], w[Co,Ci,kh,kw]");
  if (xt.dim(1) != wt.dim(1))
    throw Error(ErrKind::Shape,
                "conv2d: input channels " + std::to_string(xt.dim(1)) +
                    " != kernel channels " + std::to_string(wt.dim(1)));
  kernels::Conv2dGeom g{xt.dim(0), xt.dim(1), xt.dim(2), xt.dim(3),
                        wt.dim(0), wt.dim(2), wt.dim(3), stride,   pad};
  if (g.out_h() <= 0 || g.out_w() <= 0)
    throw Error(ErrKind::Shape, "conv2d: output would be empty for input " +
                                    xt.shape_str());
  Node n;
  n.kind = OpKind::Conv2d;
  n.in = {x, w};
  if (bias) {
    if (node(*bias).out.numel() != g.c_out)
      throw Error(ErrKind::Shape, "conv2d: bias size != out channels");
    n.in.push_back(*bias);
  }
  n.conv = g;
  n.out = Tensor::zeros({g.batch, g.c_out, g.out_h(), g.out_w()},
                        xt.dtype());
  dispatch_float(xt.dtype(), [&](auto tag) {
    using T = decltype(tag);
    kernels::conv2d_fwd(xt.data<T>().data(), wt.data<T>().data(),
                        bias ? node(*bias).out.data<T>().data() : nullptr,
                        n.out.data<T>().data(), g);
  });
  n.needs_grad = node(x).needs_grad || node(w).needs_grad ||
                 (bias && node(*bias).needs_grad);
  return push(std::move(n));
}

ValueId Tape::conv_transpose2d(ValueId x, ValueId w,
                               std::optional<ValueId> bias, int64_t stride,
                               int64_t pad) {
  check_float(x, "conv_transpose2d");
  const Tensor& xt = node(x).out;
  const Tensor& wt = node(w).out;
  if (xt.rank() != 4 || wt.rank() != 4)
    throw Error(ErrKind::Shape,
                "conv_transpose2d: expects x[B,C,H,W], w[Ci,Co,kh,kw]");
  if (xt.dim(1) != wt.dim(0))
    throw Error(ErrKind::Shape, "conv_transpose2d: input channels " +
                                    std::to_string(xt.dim(1)) +
                                    " != kernel in-channels " +
                                    std::to_string(wt.dim(0)));
  kernels::ConvT2dGeom g{xt.dim(0), xt.dim(1), xt.dim(2), xt.dim(3),
                         wt.dim(1), wt.dim(2), wt.dim(3), stride,   pad};
  Node n;
  n.kind = OpKind::ConvT2d;
  n.in = {x, w};
  if (bias) {
    if (node(*bias).out.numel() != g.c_out)
      throw Error(ErrKind::Shape, "conv_transpose2d: bias size != out channels");
    n.in.push_back(*bias);
  }
  n.convt = g;
  n.out = Tensor::zeros({g.batch, g.c_out, g.out_h(), g.out_w()},
                        xt.dtype());
  dispatch_float(xt.dtype(), [&](auto tag) {
    using T = decltype(tag);
    kernels::convt2d_fwd(xt.data<T>().data(), wt.data<T>().data(),
                         bias ? node(*bias).out.data<T>().data() : nullptr,
                         n.out.data<T>().data(), g);
  });
  n.needs_grad = node(x).needs_grad || node(w).needs_grad ||
                 (bias && node(*bias).needs_grad);
  return push(std::move(n));
}

ValueId Tape::maxpool2d(ValueId x, int64_t k, int64_t stride) {
  check_float(x, "maxpool2d");
  const Tensor& xt = node(x).out;
  if (xt.rank() != 4)
    throw Error(ErrKind::Shape, "maxpool2d: expects x[B,C,H,W]");
  if (xt.dim(2) < k || xt.dim(3) < k)
    throw Error(ErrKind::Shape, "maxpool2d: window " + std::to_string(k) +
                                    " exceeds input " + xt.shape_str());
  kernels::Pool2dGeom g{xt.dim(0), xt.dim(1), xt.dim(2), xt.dim(3), k, stride};
  Node n;
  n.kind = OpKind::MaxPool2d;
  n.in = {x};
  n.pool = g;
  n.out = Tensor::zeros({g.batch, g.c, g.out_h(), g.out_w()}, xt.dtype());
  n.aux = Tensor::zeros(n.out.shape(), Dtype::I64);
  dispatch_float(xt.dtype(), [&](auto tag) {
    using T = decltype(tag);
    kernels::maxpool2d_fwd(xt.data<T>().data(), n.out.data<T>().data(),
                           n.aux.data<int64_t>().data(), g);
  });
  n.needs_grad = node(x).needs_grad;
  return push(std::move(n));
}

ValueId Tape::relu(ValueId x) {
  check_float(x, "relu");
  const Tensor& xt = node(x).out;
  Node n;
  n.kind = OpKind::Relu;
  n.in = {x};
  n.out = Tensor::zeros(xt.shape(), xt.dtype());
  dispatch_float(xt.dtype(), [&](auto tag) {
    using T = decltype(tag);
    kernels::relu_fwd(xt.data<T>().data(), n.out.data<T>().data(),
                      xt.numel());
  });
  n.needs_grad = node(x).needs_grad;
  return push(std::move(n));
}

namespace {
// [B, C, spatial...] -> outer=B, c=C, inner=rest
void channel_split(const Tensor& t, int64_t& outer, int64_t& c,
                   int64_t& inner, const char* op) {
  if (t.rank() < 2)
    throw Error(ErrKind::Shape, std::string(op) + ": needs rank >= 2, got " +
                                    t.shape_str());
  outer = t.dim(0);
  c = t.dim(1);
  inner = 1;
  for (size_t i = 2; i < t.rank(); ++i) inner *= t.dim(i);
}
}  // namespace

ValueId Tape::softmax_channel(ValueId x) {
  check_float(x, "softmax_channel");
  const Tensor& xt = node(x).out;
  int64_t outer, c, inner;
  channel_split(xt, outer, c, inner, "softmax_channel");
  Node n;
  n.kind = OpKind::SoftmaxChannel;
  n.in = {x};
  n.out = Tensor::zeros(xt.shape(), xt.dtype());
  dispatch_float(xt.dtype(), [&](auto tag) {
    using T = decltype(tag);
    kernels::softmax_c_fwd(xt.data<T>().data(), n.out.data<T>().data(), outer,
                           c, inner);
  });
  n.needs_grad = node(x).needs_grad;
  return push(std::move(n));
}

ValueId Tape::concat_channel(const std::vector<ValueId>& xs) {
  if (xs.empty()) throw Error(ErrKind::Shape, "concat_channel: no inputs");
  const Tensor& first = node(xs[0]).out;
  check_float(xs[0], "concat_channel");
  int64_t total_c = 0;
  for (ValueId id : xs) {
    const Tensor& t = node(id).out;
    if (t.rank() != first.rank() || t.dtype() != first.dtype())
      throw Error(ErrKind::Shape, "concat_channel: rank/dtype mismatch");
    for (size_t d = 0; d < t.rank(); ++d)
      if (d != 1 && t.dim(d) != first.dim(d))
        throw Error(ErrKind::Shape,
                    "concat_channel: non-channel dims differ: " +
                        t.shape_str() + " vs " + first.shape_str());
    total_c += t.dim(1);
  }
  std::vector<int64_t> shape = first.shape();
  shape[1] = total_c;
  Node n;
  n.kind = OpKind::ConcatChannel;
  n.in = xs;
  n.out = Tensor::zeros(shape, first.dtype());
  int64_t outer = first.dim(0);
  int64_t inner = 1;
  for (size_t d = 2; d < first.rank(); ++d) inner *= first.dim(d);
  dispatch_float(first.dtype(), [&](auto tag) {
    using T = decltype(tag);
    T* out = n.out.data<T>().data();
    int64_t c_off = 0;
    for (ValueId id : xs) {
      const Tensor& t = node(id).out;
      const T* src = t.data<T>().data();
      const int64_t c = t.dim(1);
      for (int64_t b = 0; b < outer; ++b)
        std::memcpy(out + ((b * total_c + c_off) * inner),
                    src + b * c * inner, sizeof(T) * c * inner);
      c_off += c;
    }
  });
  for (ValueId id : xs) n.needs_grad = n.needs_grad || node(id).needs_grad;
  return push(std::move(n));
}

ValueId Tape::add(ValueId a, ValueId b) {
  check_float(a, "add");
  const Tensor& at = node(a).out;
  const Tensor& bt = node(b).out;
  if (!at.same_shape(bt) || at.dtype() != bt.dtype())
    throw Error(ErrKind::Shape, "add: shape mismatch " + at.shape_str() +
                                    " vs " + bt.shape_str());
  Node n;
  n.kind = OpKind::Add;
  n.in = {a, b};
  n.out = Tensor::zeros(at.shape(), at.dtype());
  dispatch_float(at.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto x = at.data<T>();
    auto y = bt.data<T>();
    auto o = n.out.data<T>();
    for (int64_t i = 0; i < at.numel(); ++i) o[i] = x[i] + y[i];
  });
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return push(std::move(n));
}

ValueId Tape::mul(ValueId a, ValueId b) {
  check_float(a, "mul");
  const Tensor& at = node(a).out;
  const Tensor& bt = node(b).out;
  if (!at.same_shape(bt) || at.dtype() != bt.dtype())
    throw Error(ErrKind::Shape, "mul: shape mismatch " + at.shape_str() +
                                    " vs " + bt.shape_str());
  Node n;
  n.kind = OpKind::Mul;
  n.in = {a, b};
  n.out = Tensor::zeros(at.shape(), at.dtype());
  dispatch_float(at.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto x = at.data<T>();
    auto y = bt.data<T>();
    auto o = n.out.data<T>();
    for (int64_t i = 0; i < at.numel(); ++i) o[i] = x[i] * y[i];
  });
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return push(std::move(n));
}

ValueId Tape::mul_scalar(ValueId x, double s) {
  check_float(x, "mul_scalar");
  const Tensor& xt = node(x).out;
  Node n;
  n.kind = OpKind::MulScalar;
  n.in = {x};
  n.scalar = s;
  n.out = Tensor::zeros(xt.shape(), xt.dtype());
  dispatch_float(xt.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto in = xt.data<T>();
    auto o = n.out.data<T>();
    for (int64_t i = 0; i < xt.numel(); ++i) o[i] = in[i] * static_cast<T>(s);
  });
  n.needs_grad = node(x).needs_grad;
  return push(std::move(n));
}

ValueId Tape::gather_log_prob(ValueId probs, const Tensor& labels) {
  check_float(probs, "gather_log_prob");
  const Tensor& pt = node(probs).out;
  int64_t outer, c, inner;
  channel_split(pt, outer, c, inner, "gather_log_prob");
  if (labels.numel() != outer * inner)
    throw Error(ErrKind::Shape, "gather_log_prob: labels " +
                                    labels.shape_str() + " do not match " +
                                    pt.shape_str());
  auto lv = label_values(labels);
  for (int64_t v : lv)
    if (v < 0 || v >= c)
      throw Error(ErrKind::LabelOutOfRange,
                  "label " + std::to_string(v) + " outside [0," +
                      std::to_string(c) + ")");
  Node n;
  n.kind = OpKind::GatherLogProb;
  n.in = {probs};
  n.aux = Tensor::zeros({outer * inner}, Dtype::I64);
  std::copy(lv.begin(), lv.end(), n.aux.data<int64_t>().begin());
  std::vector<int64_t> out_shape{outer};
  for (size_t d = 2; d < pt.rank(); ++d) out_shape.push_back(pt.dim(d));
  n.out = Tensor::zeros(out_shape, pt.dtype());
  dispatch_float(pt.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto p = pt.data<T>();
    auto o = n.out.data<T>();
    for (int64_t i = 0; i < outer * inner; ++i) {
      const int64_t b = i / inner, s = i % inner;
      const T v = p[(b * c + lv[i]) * inner + s];
      o[i] = std::log(std::max(v, static_cast<T>(1e-30)));
    }
  });
  n.needs_grad = node(probs).needs_grad;
  return push(std::move(n));
}

ValueId Tape::weighted_sum(ValueId x, Tensor weights) {
  check_float(x, "weighted_sum");
  const Tensor& xt = node(x).out;
  if (weights.numel() != xt.numel() || weights.dtype() != xt.dtype())
    throw Error(ErrKind::Shape, "weighted_sum: weights mismatch");
  Node n;
  n.kind = OpKind::WeightedSum;
  n.in = {x};
  n.aux = std::move(weights);
  n.out = Tensor::zeros({1}, xt.dtype());
  dispatch_float(xt.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto in = xt.data<T>();
    auto w = n.aux.data<T>();
    T acc = T(0);
    for (int64_t i = 0; i < xt.numel(); ++i) acc += in[i] * w[i];
    n.out.data<T>()[0] = acc;
  });
  n.needs_grad = node(x).needs_grad;
  return push(std::move(n));
}

ValueId Tape::mean_all(ValueId x) {
  check_float(x, "mean_all");
  const Tensor& xt = node(x).out;
  Node n;
  n.kind = OpKind::MeanAll;
  n.in = {x};
  n.out = Tensor::zeros({1}, xt.dtype());
  dispatch_float(xt.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto in = xt.data<T>();
    T acc = T(0);
    for (int64_t i = 0; i < xt.numel(); ++i) acc += in[i];
    n.out.data<T>()[0] = acc / static_cast<T>(xt.numel());
  });
  n.needs_grad = node(x).needs_grad;
  return push(std::move(n));
}

ValueId Tape::mae_loss(ValueId pred, const Tensor& target) {
  check_float(pred, "mae");
  const Tensor& pt = node(pred).out;
  if (target.numel() != pt.numel())
    throw Error(ErrKind::Shape, "mae: target " + target.shape_str() +
                                    " does not match " + pt.shape_str());
  Node n;
  n.kind = OpKind::MaeLoss;
  n.in = {pred};
  n.aux = target.dtype() == pt.dtype() ? target : target.astype(pt.dtype());
  n.out = Tensor::zeros({1}, pt.dtype());
  dispatch_float(pt.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto p = pt.data<T>();
    auto t = n.aux.data<T>();
    T acc = T(0);
    for (int64_t i = 0; i < pt.numel(); ++i) acc += std::abs(p[i] - t[i]);
    n.out.data<T>()[0] = acc / static_cast<T>(pt.numel());
  });
  n.needs_grad = node(pred).needs_grad;
  return push(std::move(n));
}

ValueId Tape::focal_loss(ValueId probs, const Tensor& labels, FocalParams fp) {
  check_float(probs, "focal_loss");
  const Tensor& pt = node(probs).out;
  int64_t outer, c, inner;
  channel_split(pt, outer, c, inner, "focal_loss");
  if (labels.numel() != outer * inner)
    throw Error(ErrKind::Shape, "focal_loss: labels " + labels.shape_str() +
                                    " do not match " + pt.shape_str());
  if (static_cast<int64_t>(fp.alpha.size()) < c)
    throw Error(ErrKind::Argument,
                "focal_loss: alpha has " + std::to_string(fp.alpha.size()) +
                    " entries for " + std::to_string(c) + " classes");
  auto lv = label_values(labels);
  for (int64_t v : lv)
    if (v < 0 || v >= c)
      throw Error(ErrKind::LabelOutOfRange,
                  "label " + std::to_string(v) + " outside [0," +
                      std::to_string(c) + ")");
  Node n;
  n.kind = OpKind::FocalLoss;
  n.in = {probs};
  n.focal = std::move(fp);
  n.aux = Tensor::zeros({outer * inner}, Dtype::I64);
  std::copy(lv.begin(), lv.end(), n.aux.data<int64_t>().begin());
  n.out = Tensor::zeros({1}, pt.dtype());
  dispatch_float(pt.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto p = pt.data<T>();
    double acc = 0;
    for (int64_t i = 0; i < outer * inner; ++i) {
      const int64_t b = i / inner, s = i % inner;
      const double pc = std::max<double>(p[(b * c + lv[i]) * inner + s], 1e-12);
      acc += -n.focal.alpha[lv[i]] * std::pow(1.0 - pc, n.focal.gamma) *
             std::log(pc);
    }
    if (n.focal.mean_reduction) acc /= static_cast<double>(outer * inner);
    n.out.data<T>()[0] = static_cast<T>(acc);
  });
  n.needs_grad = node(probs).needs_grad;
  return push(std::move(n));
}

ValueId Tape::dice_loss(ValueId probs, const Tensor& labels, double smooth) {
  check_float(probs, "dice_loss");
  const Tensor& pt = node(probs).out;
  int64_t outer, c, inner;
  channel_split(pt, outer, c, inner, "dice_loss");
  if (c < 2)
    throw Error(ErrKind::Shape, "dice_loss: needs >= 2 channels");
  if (labels.numel() != outer * inner)
    throw Error(ErrKind::Shape, "dice_loss: labels " + labels.shape_str() +
                                    " do not match " + pt.shape_str());
  auto lv = label_values(labels);
  for (int64_t v : lv)
    if (v < 0 || v >= c)
      throw Error(ErrKind::LabelOutOfRange,
                  "label " + std::to_string(v) + " outside [0," +
                      std::to_string(c) + ")");
  Node n;
  n.kind = OpKind::DiceLoss;
  n.in = {probs};
  n.scalar = smooth;
  n.aux = Tensor::zeros({outer * inner}, Dtype::I64);
  std::copy(lv.begin(), lv.end(), n.aux.data<int64_t>().begin());
  n.out = Tensor::zeros({1}, pt.dtype());
  dispatch_float(pt.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto p = pt.data<T>();
    double mean_dice = 0;
    for (int64_t cls = 1; cls < c; ++cls) {
      double inter = 0, psum = 0, lsum = 0;
      for (int64_t i = 0; i < outer * inner; ++i) {
        const int64_t b = i / inner, s = i % inner;
        const double pv = p[(b * c + cls) * inner + s];
        psum += pv;
        if (lv[i] == cls) {
          inter += pv;
          lsum += 1;
        }
      }
      mean_dice += (2 * inter + smooth) / (psum + lsum + smooth);
    }
    mean_dice /= static_cast<double>(c - 1);
    n.out.data<T>()[0] = static_cast<T>(1.0 - mean_dice);
  });
  n.needs_grad = node(probs).needs_grad;
  return push(std::move(n));
}

ValueId Tape::argmax_channel(ValueId x) {
  check_float(x, "argmax_channel");
  const Tensor& xt = node(x).out;
  int64_t outer, c, inner;
  channel_split(xt, outer, c, inner, "argmax_channel");
  Node n;
  n.kind = OpKind::ArgmaxChannel;
  n.in = {x};
  std::vector<int64_t> shape = xt.shape();
  shape[1] = 1;
  n.out = Tensor::zeros(shape, Dtype::I64);
  dispatch_float(xt.dtype(), [&](auto tag) {
    using T = decltype(tag);
    kernels::argmax_c(xt.data<T>().data(), n.out.data<int64_t>().data(),
                      outer, c, inner);
  });
  n.needs_grad = false;  // derived output, gradient stops here
  return push(std::move(n));
}

void Tape::add_grad(std::vector<Tensor>& grads, ValueId id, const Tensor& g) {
  if (!node(id).needs_grad) return;
  Tensor& slot = grads[id];
  if (slot.empty()) {
    slot = g.clone();
    return;
  }
  dispatch_float(slot.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto a = slot.data<T>();
    auto b = g.data<T>();
    for (int64_t i = 0; i < slot.numel(); ++i) a[i] += b[i];
  });
}

void Tape::backward(ValueId loss) {
  const Node& ln = node(loss);
  if (ln.out.numel() != 1)
    throw Error(ErrKind::Graph, "backward: loss must be scalar, got " +
                                    ln.out.shape_str());
  if (!dtype_is_float(ln.out.dtype()))
    throw Error(ErrKind::Graph, "backward: loss must be f32/f64");
  grads_.assign(nodes_.size(), Tensor{});
  grads_[loss] = Tensor::full({1}, ln.out.dtype(), 1.0);

  for (ValueId id = static_cast<ValueId>(nodes_.size()) - 1; id >= 0; --id) {
    Node& n = nodes_[id];
    if (grads_[id].empty() || !n.needs_grad || n.kind == OpKind::Leaf)
      continue;
    const Tensor& gy = grads_[id];
    dispatch_float(n.out.dtype() == Dtype::I64 ? Dtype::F32 : n.out.dtype(),
                   [&](auto tag) {
      using T = decltype(tag);
      switch (n.kind) {
        case OpKind::Conv2d: {
          const Tensor& xt = node(n.in[0]).out;
          const Tensor& wt = node(n.in[1]).out;
          if (node(n.in[0]).needs_grad) {
            Tensor gx = Tensor::zeros(xt.shape(), xt.dtype());
            kernels::conv2d_bwd_x(gy.data<T>().data(), wt.data<T>().data(),
                                  gx.data<T>().data(), n.conv);
            add_grad(grads_, n.in[0], gx);
          }
          if (node(n.in[1]).needs_grad) {
            Tensor gw = Tensor::zeros(wt.shape(), wt.dtype());
            kernels::conv2d_bwd_w(gy.data<T>().data(), xt.data<T>().data(),
                                  gw.data<T>().data(), n.conv);
            add_grad(grads_, n.in[1], gw);
          }
          if (n.in.size() == 3 && node(n.in[2]).needs_grad) {
            Tensor gb = Tensor::zeros(node(n.in[2]).out.shape(), xt.dtype());
            kernels::conv2d_bwd_b(gy.data<T>().data(), gb.data<T>().data(),
                                  n.conv);
            add_grad(grads_, n.in[2], gb);
          }
          break;
        }
        case OpKind::ConvT2d: {
          const Tensor& xt = node(n.in[0]).out;
          const Tensor& wt = node(n.in[1]).out;
          if (node(n.in[0]).needs_grad) {
            Tensor gx = Tensor::zeros(xt.shape(), xt.dtype());
            kernels::convt2d_bwd_x(gy.data<T>().data(), wt.data<T>().data(),
                                   gx.data<T>().data(), n.convt);
            add_grad(grads_, n.in[0], gx);
          }
          if (node(n.in[1]).needs_grad) {
            Tensor gw = Tensor::zeros(wt.shape(), wt.dtype());
            kernels::convt2d_bwd_w(gy.data<T>().data(), xt.data<T>().data(),
                                   gw.data<T>().data(), n.convt);
            add_grad(grads_, n.in[1], gw);
          }
          if (n.in.size() == 3 && node(n.in[2]).needs_grad) {
            Tensor gb = Tensor::zeros(node(n.in[2]).out.shape(), xt.dtype());
            kernels::convt2d_bwd_b(gy.data<T>().data(), gb.data<T>().data(),
                                   n.convt);
            add_grad(grads_, n.in[2], gb);
          }
          break;
        }
        case OpKind::MaxPool2d: {
          const Tensor& xt = node(n.in[0]).out;
          Tensor gx = Tensor::zeros(xt.shape(), xt.dtype());
          kernels::maxpool2d_bwd(gy.data<T>().data(),
                                 n.aux.data<int64_t>().data(),
                                 gx.data<T>().data(), n.out.numel(),
                                 xt.numel());
          add_grad(grads_, n.in[0], gx);
          break;
        }
        case OpKind::Relu: {
          const Tensor& xt = node(n.in[0]).out;
          Tensor gx = Tensor::zeros(xt.shape(), xt.dtype());
          kernels::relu_bwd(gy.data<T>().data(), xt.data<T>().data(),
                            gx.data<T>().data(), xt.numel());
          add_grad(grads_, n.in[0], gx);
          break;
        }
        case OpKind::SoftmaxChannel: {
          int64_t outer, c, inner;
          channel_split(n.out, outer, c, inner, "softmax_channel");
          Tensor gx = Tensor::zeros(n.out.shape(), n.out.dtype());
          kernels::softmax_c_bwd(gy.data<T>().data(), n.out.data<T>().data(),
                                 gx.data<T>().data(), outer, c, inner);
          add_grad(grads_, n.in[0], gx);
          break;
        }
        case OpKind::ConcatChannel: {
          int64_t outer = n.out.dim(0);
          int64_t total_c = n.out.dim(1);
          int64_t inner = 1;
          for (size_t d = 2; d < n.out.rank(); ++d) inner *= n.out.dim(d);
          int64_t c_off = 0;
          for (ValueId in_id : n.in) {
            const Tensor& it = node(in_id).out;
            const int64_t c = it.dim(1);
            if (node(in_id).needs_grad) {
              Tensor gx = Tensor::zeros(it.shape(), it.dtype());
              auto gys = gy.data<T>();
              auto gxs = gx.data<T>();
              for (int64_t b = 0; b < outer; ++b)
                std::memcpy(gxs.data() + b * c * inner,
                            gys.data() + (b * total_c + c_off) * inner,
                            sizeof(T) * c * inner);
              add_grad(grads_, in_id, gx);
            }
            c_off += c;
          }
          break;
        }
        case OpKind::Add:
          add_grad(grads_, n.in[0], gy);
          add_grad(grads_, n.in[1], gy);
          break;
        case OpKind::Mul: {
          for (int side = 0; side < 2; ++side) {
            if (!node(n.in[side]).needs_grad) continue;
            const Tensor& other = node(n.in[1 - side]).out;
            Tensor gx = Tensor::zeros(other.shape(), other.dtype());
            auto gys = gy.data<T>();
            auto os = other.data<T>();
            auto gxs = gx.data<T>();
            for (int64_t i = 0; i < other.numel(); ++i)
              gxs[i] = gys[i] * os[i];
            add_grad(grads_, n.in[side], gx);
          }
          break;
        }
        case OpKind::MulScalar: {
          Tensor gx = Tensor::zeros(n.out.shape(), n.out.dtype());
          auto gys = gy.data<T>();
          auto gxs = gx.data<T>();
          for (int64_t i = 0; i < n.out.numel(); ++i)
            gxs[i] = gys[i] * static_cast<T>(n.scalar);
          add_grad(grads_, n.in[0], gx);
          break;
        }
        case OpKind::GatherLogProb: {
          const Tensor& pt = node(n.in[0]).out;
          int64_t outer, c, inner;
          channel_split(pt, outer, c, inner, "gather_log_prob");
          Tensor gx = Tensor::zeros(pt.shape(), pt.dtype());
          auto gys = gy.data<T>();
          auto p = pt.data<T>();
          auto gxs = gx.data<T>();
          auto lv = n.aux.data<int64_t>();
          for (int64_t i = 0; i < outer * inner; ++i) {
            const int64_t b = i / inner, s = i % inner;
            const int64_t at = (b * c + lv[i]) * inner + s;
            gxs[at] += gys[i] / std::max(p[at], static_cast<T>(1e-30));
          }
          add_grad(grads_, n.in[0], gx);
          break;
        }
        case OpKind::WeightedSum: {
          const T g0 = gy.data<T>()[0];
          Tensor gx = Tensor::zeros(node(n.in[0]).out.shape(),
                                    node(n.in[0]).out.dtype());
          auto w = n.aux.data<T>();
          auto gxs = gx.data<T>();
          for (int64_t i = 0; i < gx.numel(); ++i) gxs[i] = g0 * w[i];
          add_grad(grads_, n.in[0], gx);
          break;
        }
        case OpKind::MeanAll: {
          const Tensor& xt = node(n.in[0]).out;
          const T g0 = gy.data<T>()[0] / static_cast<T>(xt.numel());
          Tensor gx = Tensor::full(xt.shape(), xt.dtype(), 0.0);
          auto gxs = gx.data<T>();
          for (int64_t i = 0; i < xt.numel(); ++i) gxs[i] = g0;
          add_grad(grads_, n.in[0], gx);
          break;
        }
        case OpKind::MaeLoss: {
          const Tensor& pt = node(n.in[0]).out;
          const T g0 = gy.data<T>()[0] / static_cast<T>(pt.numel());
          Tensor gx = Tensor::zeros(pt.shape(), pt.dtype());
          auto p = pt.data<T>();
          auto t = n.aux.data<T>();
          auto gxs = gx.data<T>();
          for (int64_t i = 0; i < pt.numel(); ++i) {
            const T d = p[i] - t[i];
            gxs[i] = d > T(0) ? g0 : (d < T(0) ? -g0 : T(0));
          }
          add_grad(grads_, n.in[0], gx);
          break;
        }
        case OpKind::FocalLoss: {
          const Tensor& pt = node(n.in[0]).out;
          int64_t outer, c, inner;
          channel_split(pt, outer, c, inner, "focal_loss");
          const double g0 = gy.data<T>()[0];
          const double norm =
              n.focal.mean_reduction ? 1.0 / static_cast<double>(outer * inner)
                                     : 1.0;
          Tensor gx = Tensor::zeros(pt.shape(), pt.dtype());
          auto p = pt.data<T>();
          auto gxs = gx.data<T>();
          auto lv = n.aux.data<int64_t>();
          for (int64_t i = 0; i < outer * inner; ++i) {
            const int64_t b = i / inner, s = i % inner;
            const int64_t at = (b * c + lv[i]) * inner + s;
            const double pc = std::max<double>(p[at], 1e-12);
            const double a = n.focal.alpha[lv[i]];
            const double om = 1.0 - pc;
            double d = std::pow(om, n.focal.gamma) / pc;
            if (n.focal.gamma != 0.0)
              d -= n.focal.gamma * std::pow(om, n.focal.gamma - 1.0) *
                   std::log(pc);
            gxs[at] += static_cast<T>(-a * d * norm * g0);
          }
          add_grad(grads_, n.in[0], gx);
          break;
        }
        case OpKind::DiceLoss: {
          const Tensor& pt = node(n.in[0]).out;
          int64_t outer, c, inner;
          channel_split(pt, outer, c, inner, "dice_loss");
          const double g0 = gy.data<T>()[0];
          Tensor gx = Tensor::zeros(pt.shape(), pt.dtype());
          auto p = pt.data<T>();
          auto gxs = gx.data<T>();
          auto lv = n.aux.data<int64_t>();
          const double k = static_cast<double>(c - 1);
          for (int64_t cls = 1; cls < c; ++cls) {
            double inter = 0, psum = 0, lsum = 0;
            for (int64_t i = 0; i < outer * inner; ++i) {
              const int64_t b = i / inner, s = i % inner;
              const double pv = p[(b * c + cls) * inner + s];
              psum += pv;
              if (lv[i] == cls) {
                inter += pv;
                lsum += 1;
              }
            }
            const double num = 2 * inter + n.scalar;
            const double den = psum + lsum + n.scalar;
            for (int64_t i = 0; i < outer * inner; ++i) {
              const int64_t b = i / inner, s = i % inner;
              const int64_t at = (b * c + cls) * inner + s;
              const double y = lv[i] == cls ? 1.0 : 0.0;
              const double dd = (2 * y * den - num) / (den * den);
              gxs[at] += static_cast<T>(-dd / k * g0);
            }
          }
          add_grad(grads_, n.in[0], gx);
          break;
        }
        case OpKind::Leaf:
        case OpKind::ArgmaxChannel:
          break;
      }
    });
  }
  backward_done_ = true;
}

Tensor Tape::grad(ValueId id) const {
  if (!backward_done_) throw Error(ErrKind::Graph, "backward() not run");
  const Node& n = node(id);
  if (grads_[id].empty())
    return Tensor::zeros(n.out.shape(), n.out.dtype());
  return grads_[id];
}

}  // namespace voxelpipe
