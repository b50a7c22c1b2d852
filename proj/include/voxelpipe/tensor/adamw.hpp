// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0
//
// AdamW with decoupled weight decay. Moment buffers and all update math are
// kept in double regardless of parameter dtype so results do not depend on
// the storage precision of intermediate state.

#pragma once

#include <cstdint>
#include <vector>

#include "voxelpipe/tensor/tensor.hpp"

namespace voxelpipe {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

  double lr() const { return cfg_.lr; }
  void set_lr(double lr) { cfg_.lr = lr; }
  int64_t step_count() const { return t_; }

  // params and grads are matched by position; moment slots are allocated on
  // the first call and must keep the same sizes afterwards.
  void step(std::vector<Tensor>& params, const std::vector<Tensor>& grads);

 private:
  AdamWConfig cfg_;
  int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace voxelpipe
