// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "voxelpipe/tensor/adamw.hpp"

#include <cmath>

#include "voxelpipe/common/error.hpp"

namespace voxelpipe {

namespace {

template <typename T>
void update_param(Tensor& param, const Tensor& grad, std::vector<double>& m,
                  std::vector<double>& v, const AdamWConfig& c, double bc1,
                  double bc2) {
  auto p = param.data<T>();
  auto g = grad.data<T>();
  for (int64_t i = 0; i < param.numel(); ++i) {
    const double gi = static_cast<double>(g[i]);
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    const double theta = static_cast<double>(p[i]);
    p[i] = static_cast<T>(theta - c.lr * mhat / (std::sqrt(vhat) + c.eps) -
                          c.lr * c.weight_decay * theta);
  }
}

}  // namespace

void AdamW::step(std::vector<Tensor>& params,
                 const std::vector<Tensor>& grads) {
  if (params.size() != grads.size())
    throw Error(ErrKind::Argument, "AdamW: " + std::to_string(params.size()) +
                                       " params vs " +
                                       std::to_string(grads.size()) +
                                       " grads");
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(static_cast<size_t>(params[i].numel()), 0.0);
      v_[i].assign(static_cast<size_t>(params[i].numel()), 0.0);
    }
  }
  if (m_.size() != params.size())
    throw Error(ErrKind::Argument, "AdamW: parameter set changed after init");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    const Tensor& g = grads[i];
    if (p.numel() != g.numel() || p.dtype() != g.dtype())
      throw Error(ErrKind::Shape, "AdamW: param/grad mismatch at slot " +
                                      std::to_string(i));
    if (static_cast<int64_t>(m_[i].size()) != p.numel())
      throw Error(ErrKind::Argument,
                  "AdamW: parameter resized after init at slot " +
                      std::to_string(i));
    switch (p.dtype()) {
      case Dtype::F32:
        update_param<float>(p, g, m_[i], v_[i], cfg_, bc1, bc2);
        break;
      case Dtype::F64:
        update_param<double>(p, g, m_[i], v_[i], cfg_, bc1, bc2);
        break;
      default:
        throw Error(ErrKind::Type, "AdamW: params must be f32/f64");
    }
  }
}

}  // namespace voxelpipe
