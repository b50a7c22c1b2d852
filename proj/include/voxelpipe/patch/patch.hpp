// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0
//
// Patch grids over (D,H,W) volumes, 2D/2.5D/3D patch extraction with
// padding, and weighted reconstruction of full volumes from per-patch
// predictions.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "voxelpipe/tensor/tensor.hpp"

namespace voxelpipe {

enum class PatchWeighting { Uniform, Cosine };

PatchWeighting patch_weighting_from_name(const std::string& name);

// the per-axis Cosine window sin^2(pi*(i+0.5)/p); strictly positive, and
// identically 1 for p == 1
std::vector<double> cosine_axis_weights(int64_t p);

struct PatchGrid {
  std::array<int64_t, 3> patch_size{1, 1, 1};
  std::array<int64_t, 3> overlap{0, 0, 0};
  std::array<int64_t, 3> volume_shape{0, 0, 0};
  std::array<int64_t, 3> padded_shape{0, 0, 0};  // max(L, p) per axis
  // per-axis start indices, strictly increasing, last = max(0, L-p)
  std::array<std::vector<int64_t>, 3> axis_starts;
  // cartesian product of axis starts, D slowest
  std::vector<std::array<int64_t, 3>> positions;

  size_t size() const { return positions.size(); }
};

// every voxel of the padded volume is covered by at least one patch
PatchGrid compute_grid(const std::array<int64_t, 3>& shape,
                       const std::array<int64_t, 3>& patch_size,
                       const std::array<int64_t, 3>& overlap);

// crops the patch at grid.positions[index]; voxels outside the volume are
// pad_value. extend_slice e > 0 (the patch D extent must be 1) stacks the
// 2e+1 slices centered on the patch slice into the channel dimension,
// slice-major, so channels become C*(2e+1).
Tensor extract_patch(const Tensor& array, const PatchGrid& grid, size_t index,
                     int64_t extend_slice, double pad_value);

// sum/weight buffers are f32 regardless of the prediction dtype; Cosine uses
// the separable half-sample-offset window sin^2(pi*(i+0.5)/p) per axis,
// which is strictly positive and equals 1 on axes of extent 1
class PatchAccumulator {
 public:
  PatchAccumulator(int64_t channels, const PatchGrid& grid,
                   PatchWeighting weighting);

  // patch shape must be C x pD x pH x pW
  void accumulate(size_t index, const Tensor& patch);

  // sum/weight cropped to the unpadded volume shape; UncoveredVoxel when a
  // voxel of the volume has zero weight
  Tensor finalize() const;

 private:
  PatchGrid grid_;
  PatchWeighting weighting_;
  int64_t channels_;
  Tensor sum_;     // C x padded D,H,W
  Tensor weight_;  // padded D,H,W
  std::array<std::vector<double>, 3> axis_weights_;
};

}  // namespace voxelpipe
