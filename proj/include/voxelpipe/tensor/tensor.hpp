// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "voxelpipe/common/error.hpp"

namespace voxelpipe {

enum class Dtype : uint8_t { F32, F64, U8, I64 };

inline size_t dtype_size(Dtype d) {
  switch (d) {
    case Dtype::F32: return 4;
    case Dtype::F64: return 8;
    case Dtype::U8: return 1;
    case Dtype::I64: return 8;
  }
  return 0;
}

const char* dtype_name(Dtype d);
Dtype dtype_from_name(const std::string& name);  // "float32", "uint8", ...

inline bool dtype_is_float(Dtype d) {
  return d == Dtype::F32 || d == Dtype::F64;
}

template <typename T> struct dtype_of;
template <> struct dtype_of<float> { static constexpr Dtype value = Dtype::F32; };
template <> struct dtype_of<double> { static constexpr Dtype value = Dtype::F64; };
template <> struct dtype_of<uint8_t> { static constexpr Dtype value = Dtype::U8; };
template <> struct dtype_of<int64_t> { static constexpr Dtype value = Dtype::I64; };

// Dense row-major N-d array with value semantics. Copies share the buffer;
// tensors are treated as immutable once handed out of the op that built them,
// so sharing is safe across threads. clone() forces a private buffer.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int64_t> shape, Dtype dt);
  static Tensor full(std::vector<int64_t> shape, Dtype dt, double value);
  static Tensor scalar(double value, Dtype dt = Dtype::F32);

  template <typename T>
  static Tensor from_values(std::vector<int64_t> shape,
                            std::initializer_list<T> values) {
    Tensor t = zeros(std::move(shape), dtype_of<T>::value);
    if (static_cast<int64_t>(values.size()) != t.numel())
      throw Error(ErrKind::Shape, "value count does not match shape");
    std::copy(values.begin(), values.end(), t.data<T>().begin());
    return t;
  }

  static Tensor from_values(std::vector<int64_t> shape, Dtype dt,
                            std::initializer_list<double> values) {
    Tensor t = zeros(std::move(shape), dt);
    if (static_cast<int64_t>(values.size()) != t.numel())
      throw Error(ErrKind::Shape, "value count does not match shape");
    int64_t i = 0;
    for (double v : values) t.set(i++, v);
    return t;
  }

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t dim(size_t i) const { return shape_.at(i); }
  size_t rank() const { return shape_.size(); }
  int64_t numel() const { return numel_; }
  Dtype dtype() const { return dtype_; }
  bool empty() const { return buf_ == nullptr; }

  template <typename T>
  std::span<T> data() {
    check_dtype(dtype_of<T>::value);
    return {reinterpret_cast<T*>(buf_->data()), static_cast<size_t>(numel_)};
  }

  template <typename T>
  std::span<const T> data() const {
    check_dtype(dtype_of<T>::value);
    return {reinterpret_cast<const T*>(buf_->data()),
            static_cast<size_t>(numel_)};
  }

  void* raw() { return buf_ ? buf_->data() : nullptr; }
  const void* raw() const { return buf_ ? buf_->data() : nullptr; }
  size_t byte_size() const { return numel_ * dtype_size(dtype_); }

  Tensor clone() const;
  Tensor reshaped(std::vector<int64_t> shape) const;  // same numel, shares data
  Tensor astype(Dtype dt) const;                      // saturating cast

  // element access as double regardless of dtype (slow path, IO/tests)
  double at(int64_t flat) const;
  void set(int64_t flat, double v);

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  std::string shape_str() const;

 private:
  void check_dtype(Dtype want) const;

  std::vector<int64_t> shape_;
  int64_t numel_ = 0;
  Dtype dtype_ = Dtype::F32;
  std::shared_ptr<std::vector<std::byte>> buf_;
};

int64_t shape_numel(const std::vector<int64_t>& shape);

}  // namespace voxelpipe
