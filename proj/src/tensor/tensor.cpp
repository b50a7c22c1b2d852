// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "voxelpipe/tensor/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace voxelpipe {

const char* dtype_name(Dtype d) {
  switch (d) {
    case Dtype::F32: return "float32";
    case Dtype::F64: return "float64";
    case Dtype::U8: return "uint8";
    case Dtype::I64: return "int64";
  }
  return "?";
}

Dtype dtype_from_name(const std::string& name) {
  if (name == "float32" || name == "float") return Dtype::F32;
  if (name == "float64" || name == "double") return Dtype::F64;
  if (name == "uint8") return Dtype::U8;
  if (name == "int64" || name == "long") return Dtype::I64;
  throw Error(ErrKind::Type, "unknown dtype '" + name + "'");
}

int64_t shape_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw Error(ErrKind::Shape, "negative extent");
    n *= d;
  }
  return n;
}

Tensor Tensor::zeros(std::vector<int64_t> shape, Dtype dt) {
  Tensor t;
  t.shape_ = std::move(shape);
  t.numel_ = shape_numel(t.shape_);
  t.dtype_ = dt;
  t.buf_ = std::make_shared<std::vector<std::byte>>(
      t.numel_ * dtype_size(dt), std::byte{0});
  return t;
}

Tensor Tensor::full(std::vector<int64_t> shape, Dtype dt, double value) {
  Tensor t = zeros(std::move(shape), dt);
  for (int64_t i = 0; i < t.numel(); ++i) t.set(i, value);
  return t;
}

Tensor Tensor::scalar(double value, Dtype dt) {
  Tensor t = zeros({1}, dt);
  t.set(0, value);
  return t;
}

Tensor Tensor::clone() const {
  Tensor t;
  t.shape_ = shape_;
  t.numel_ = numel_;
  t.dtype_ = dtype_;
  if (buf_) t.buf_ = std::make_shared<std::vector<std::byte>>(*buf_);
  return t;
}

Tensor Tensor::reshaped(std::vector<int64_t> shape) const {
  if (shape_numel(shape) != numel_)
    throw Error(ErrKind::Shape, "reshape changes element count");
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

namespace {

template <typename T>
T saturate(double v) {
  if constexpr (std::is_same_v<T, float> || std::is_same_v<T, double>) {
    return static_cast<T>(v);
  } else {
    double lo = static_cast<double>(std::numeric_limits<T>::min());
    double hi = static_cast<double>(std::numeric_limits<T>::max());
    double r = std::nearbyint(v);
    if (std::isnan(r)) return T{0};
    return static_cast<T>(std::clamp(r, lo, hi));
  }
}

}  // namespace

Tensor Tensor::astype(Dtype dt) const {
  if (dt == dtype_) return clone();
  Tensor t = zeros(shape_, dt);
  for (int64_t i = 0; i < numel_; ++i) {
    double v = at(i);
    switch (dt) {
      case Dtype::F32: t.data<float>()[i] = static_cast<float>(v); break;
      case Dtype::F64: t.data<double>()[i] = v; break;
      case Dtype::U8: t.data<uint8_t>()[i] = saturate<uint8_t>(v); break;
      case Dtype::I64: t.data<int64_t>()[i] = saturate<int64_t>(v); break;
    }
  }
  return t;
}

double Tensor::at(int64_t flat) const {
  switch (dtype_) {
    case Dtype::F32: return data<float>()[flat];
    case Dtype::F64: return data<double>()[flat];
    case Dtype::U8: return data<uint8_t>()[flat];
    case Dtype::I64: return static_cast<double>(data<int64_t>()[flat]);
  }
  return 0;
}

void Tensor::set(int64_t flat, double v) {
  switch (dtype_) {
    case Dtype::F32: data<float>()[flat] = static_cast<float>(v); break;
    case Dtype::F64: data<double>()[flat] = v; break;
    case Dtype::U8: data<uint8_t>()[flat] = saturate<uint8_t>(v); break;
    case Dtype::I64: data<int64_t>()[flat] = saturate<int64_t>(v); break;
  }
}

void Tensor::check_dtype(Dtype want) const {
  if (!buf_) throw Error(ErrKind::Shape, "access to empty tensor");
  if (want != dtype_)
    throw Error(ErrKind::Type, std::string("tensor is ") + dtype_name(dtype_) +
                                   ", accessed as " + dtype_name(want));
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape_.size(); ++i)
    os << (i ? "," : "") << shape_[i];
  os << "]";
  return os.str();
}

}  // namespace voxelpipe
