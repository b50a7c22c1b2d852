// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0
//
// Volume: a channel-first C x D x H x W grid with physical metadata.
// Spatial metadata (spacing, origin) is stored in (D, H, W) axis order to
// match the tensor layout; MetaImage I/O reverses to the file's x-fastest
// convention at the boundary. The direction matrix stays in file (x, y, z)
// row-major order and passes through untouched.

#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "voxelpipe/tensor/tensor.hpp"

namespace voxelpipe {

// storage element types of the MetaImage payload
enum class ElementType : uint8_t { U8, I16, U16, I32, F32, F64 };

const char* element_type_met_name(ElementType t);   // "MET_UCHAR", ...
ElementType element_type_from_met(const std::string& name);
size_t element_size(ElementType t);

// integer payloads widen to i64 so transforms never overflow
Dtype element_dtype(ElementType t);

struct Volume {
  Tensor array;  // C x D x H x W
  std::array<double, 3> spacing{1.0, 1.0, 1.0};  // (D, H, W), mm
  std::array<double, 3> origin{0.0, 0.0, 0.0};   // (D, H, W), mm
  std::array<double, 9> direction{1, 0, 0, 0, 1, 0, 0, 0, 1};
  std::array<double, 3> center_of_rotation{0.0, 0.0, 0.0};
  ElementType element_type = ElementType::F32;
  int ndims = 3;             // dimensionality of the file representation
  bool compressed = false;   // zlib payload on disk

  int64_t channels() const { return array.dim(0); }
  int64_t depth() const { return array.dim(1); }
  int64_t height() const { return array.dim(2); }
  int64_t width() const { return array.dim(3); }

  // throws when spacing is non-positive or direction is not orthonormal
  // within 1e-4
  void check_valid() const;
};

}  // namespace voxelpipe
