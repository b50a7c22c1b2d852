// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "voxelpipe/kernels/kernels.hpp"
#include "voxelpipe/tensor/tensor.hpp"

namespace voxelpipe {

using ValueId = int32_t;

enum class OpKind {
  Leaf,
  Conv2d,
  ConvT2d,
  MaxPool2d,
  Relu,
  SoftmaxChannel,
  ConcatChannel,
  Add,
  Mul,
  MulScalar,
  GatherLogProb,
  WeightedSum,
  MeanAll,
  MaeLoss,
  FocalLoss,
  DiceLoss,
  ArgmaxChannel,
};

const char* op_kind_name(OpKind k);

struct FocalParams {
  double gamma = 2.0;
  std::vector<double> alpha;  // per class, size >= channel count
  bool mean_reduction = true;
};

// Reverse-mode tape. Nodes are appended in execution order, so the sequence
// is topological by construction; backward() walks it once in reverse.
// Training builds a fresh tape per step.
class Tape {
 public:
  ValueId leaf(Tensor value, bool requires_grad = false);

  // activations [B,C,H,W]; conv weight [Cout,Cin,kh,kw]; transpose weight
  // [Cin,Cout,kh,kw]; bias [Cout] optional
  ValueId conv2d(ValueId x, ValueId w, std::optional<ValueId> bias,
                 int64_t stride, int64_t pad);
  ValueId conv_transpose2d(ValueId x, ValueId w, std::optional<ValueId> bias,
                           int64_t stride, int64_t pad);
  ValueId maxpool2d(ValueId x, int64_t k, int64_t stride);
  ValueId relu(ValueId x);
  ValueId softmax_channel(ValueId x);
  ValueId concat_channel(const std::vector<ValueId>& xs);
  ValueId add(ValueId a, ValueId b);
  ValueId mul(ValueId a, ValueId b);
  ValueId mul_scalar(ValueId x, double s);

  // probs [B,C,...], labels [B,...] integer -> log probs at the labelled
  // channel, shape of labels
  ValueId gather_log_prob(ValueId probs, const Tensor& labels);

  // scalar reductions
  ValueId weighted_sum(ValueId x, Tensor weights);
  ValueId mean_all(ValueId x);
  ValueId mae_loss(ValueId pred, const Tensor& target);
  ValueId focal_loss(ValueId probs, const Tensor& labels, FocalParams p);
  ValueId dice_loss(ValueId probs, const Tensor& labels, double smooth);

  // non-differentiable derived output, i64, channel dim reduced to 1
  ValueId argmax_channel(ValueId x);

  const Tensor& value(ValueId id) const { return node(id).out; }
  bool requires_grad(ValueId id) const { return node(id).needs_grad; }
  size_t size() const { return nodes_.size(); }

  // loss must be scalar; accumulates gradients over all paths
  void backward(ValueId loss);
  // valid after backward(); zero tensor for nodes off every path
  Tensor grad(ValueId id) const;

 private:
  struct Node {
    OpKind kind = OpKind::Leaf;
    std::vector<ValueId> in;
    Tensor out;
    bool needs_grad = false;
    // op context (only the fields the op uses are meaningful)
    Tensor aux;           // pool indices, gather/criterion labels, weights
    double scalar = 0.0;  // mul_scalar factor, dice smooth
    kernels::Conv2dGeom conv{};
    kernels::ConvT2dGeom convt{};
    kernels::Pool2dGeom pool{};
    FocalParams focal;
  };

  const Node& node(ValueId id) const;
  Node& node(ValueId id);
  ValueId push(Node n);
  void check_float(ValueId id, const char* op) const;
  void add_grad(std::vector<Tensor>& grads, ValueId id, const Tensor& g);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  bool backward_done_ = false;
};

}  // namespace voxelpipe
