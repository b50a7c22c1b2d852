// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "voxelpipe/patch/patch.hpp"

#include <cmath>

#include "voxelpipe/common/error.hpp"

namespace voxelpipe {

PatchWeighting patch_weighting_from_name(const std::string& name) {
  if (name == "Uniform") return PatchWeighting::Uniform;
  if (name == "Cosine") return PatchWeighting::Cosine;
  throw Error(ErrKind::UnknownComponent,
              "patch weighting '" + name + "' (expected Uniform or Cosine)");
}

std::vector<double> cosine_axis_weights(int64_t p) {
  std::vector<double> w(static_cast<size_t>(p));
  // computed on the lower half and mirrored so the window is exactly
  // symmetric despite floating-point sin
  for (int64_t i = 0; i < (p + 1) / 2; ++i) {
    const double s =
        std::sin(3.14159265358979323846 * (double(i) + 0.5) / double(p));
    w[size_t(i)] = s * s;
    w[size_t(p - 1 - i)] = s * s;
  }
  return w;
}

namespace {

// starts 0, s, 2s, ... with the final start clamped to L-p; L < p pads
std::vector<int64_t> axis_starts(int64_t length, int64_t patch,
                                 int64_t overlap) {
  if (patch < 1)
    throw Error(ErrKind::Shape, "patch extent must be >= 1");
  if (overlap < 0 || overlap >= patch)
    throw Error(ErrKind::InvalidOverlap,
                "overlap " + std::to_string(overlap) +
                    " must be in [0, patch " + std::to_string(patch) + ")");
  if (length <= patch) return {0};
  const int64_t stride = patch - overlap;
  std::vector<int64_t> starts;
  for (int64_t s = 0;; s += stride) {
    if (s + patch >= length) {
      if (starts.empty() || starts.back() != length - patch)
        starts.push_back(length - patch);
      break;
    }
    starts.push_back(s);
  }
  return starts;
}

}  // namespace

PatchGrid compute_grid(const std::array<int64_t, 3>& shape,
                       const std::array<int64_t, 3>& patch_size,
                       const std::array<int64_t, 3>& overlap) {
  PatchGrid g;
  g.patch_size = patch_size;
  g.overlap = overlap;
  g.volume_shape = shape;
  for (size_t a = 0; a < 3; ++a) {
    g.axis_starts[a] = axis_starts(shape[a], patch_size[a], overlap[a]);
    g.padded_shape[a] = std::max(shape[a], patch_size[a]);
  }
  for (int64_t z : g.axis_starts[0])
    for (int64_t y : g.axis_starts[1])
      for (int64_t x : g.axis_starts[2]) g.positions.push_back({z, y, x});
  return g;
}

Tensor extract_patch(const Tensor& array, const PatchGrid& grid, size_t index,
                     int64_t extend_slice, double pad_value) {
  if (array.rank() != 4)
    throw Error(ErrKind::Shape, "extract_patch expects C x D x H x W");
  if (index >= grid.positions.size())
    throw Error(ErrKind::Index,
                "patch index " + std::to_string(index) + " out of range (" +
                    std::to_string(grid.positions.size()) + " patches)");
  if (extend_slice < 0)
    throw Error(ErrKind::Shape, "extend_slice must be >= 0");
  if (extend_slice > 0 && grid.patch_size[0] != 1)
    throw Error(ErrKind::Shape,
                "extend_slice needs a patch of depth 1, got depth " +
                    std::to_string(grid.patch_size[0]));

  const std::array<int64_t, 3>& pos = grid.positions[index];
  const int64_t c = array.dim(0);
  const int64_t d = array.dim(1), h = array.dim(2), w = array.dim(3);
  const int64_t pd = grid.patch_size[0], ph = grid.patch_size[1],
                pw = grid.patch_size[2];

  auto src = [&](int64_t ch, int64_t z, int64_t y, int64_t x) {
    if (z < 0 || z >= d || y < 0 || y >= h || x < 0 || x >= w)
      return pad_value;
    return array.at(((ch * d + z) * h + y) * w + x);
  };

  if (extend_slice == 0) {
    Tensor out = Tensor::zeros({c, pd, ph, pw}, array.dtype());
    int64_t flat = 0;
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t z = 0; z < pd; ++z)
        for (int64_t y = 0; y < ph; ++y)
          for (int64_t x = 0; x < pw; ++x, ++flat)
            out.set(flat, src(ch, pos[0] + z, pos[1] + y, pos[2] + x));
    return out;
  }

  // 2.5D slab: slices center-e .. center+e stacked slice-major into channels
  const int64_t e = extend_slice;
  Tensor out = Tensor::zeros({c * (2 * e + 1), 1, ph, pw}, array.dtype());
  int64_t flat = 0;
  for (int64_t off = -e; off <= e; ++off)
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t y = 0; y < ph; ++y)
        for (int64_t x = 0; x < pw; ++x, ++flat)
          out.set(flat, src(ch, pos[0] + off, pos[1] + y, pos[2] + x));
  return out;
}

PatchAccumulator::PatchAccumulator(int64_t channels, const PatchGrid& grid,
                                   PatchWeighting weighting)
    : grid_(grid), weighting_(weighting), channels_(channels) {
  if (channels < 1)
    throw Error(ErrKind::Shape, "accumulator needs >= 1 channel");
  const auto& ps = grid_.padded_shape;
  sum_ = Tensor::zeros({channels, ps[0], ps[1], ps[2]}, Dtype::F32);
  weight_ = Tensor::zeros({ps[0], ps[1], ps[2]}, Dtype::F32);
  for (size_t a = 0; a < 3; ++a) {
    if (weighting_ == PatchWeighting::Cosine)
      axis_weights_[a] = cosine_axis_weights(grid_.patch_size[a]);
    else
      axis_weights_[a].assign(size_t(grid_.patch_size[a]), 1.0);
  }
}

void PatchAccumulator::accumulate(size_t index, const Tensor& patch) {
  if (index >= grid_.positions.size())
    throw Error(ErrKind::Index,
                "patch index " + std::to_string(index) + " out of range (" +
                    std::to_string(grid_.positions.size()) + " patches)");
  const int64_t pd = grid_.patch_size[0], ph = grid_.patch_size[1],
                pw = grid_.patch_size[2];
  if (patch.rank() != 4 || patch.dim(0) != channels_ || patch.dim(1) != pd ||
      patch.dim(2) != ph || patch.dim(3) != pw)
    throw Error(ErrKind::Shape,
                "patch prediction is " + patch.shape_str() + ", expected [" +
                    std::to_string(channels_) + "," + std::to_string(pd) +
                    "," + std::to_string(ph) + "," + std::to_string(pw) +
                    "]");

  const std::array<int64_t, 3>& pos = grid_.positions[index];
  const auto& ps = grid_.padded_shape;
  auto sum = sum_.data<float>();
  auto wgt = weight_.data<float>();
  for (int64_t z = 0; z < pd; ++z)
    for (int64_t y = 0; y < ph; ++y)
      for (int64_t x = 0; x < pw; ++x) {
        const double w = axis_weights_[0][size_t(z)] *
                         axis_weights_[1][size_t(y)] *
                         axis_weights_[2][size_t(x)];
        const int64_t vz = pos[0] + z, vy = pos[1] + y, vx = pos[2] + x;
        const int64_t voxel = (vz * ps[1] + vy) * ps[2] + vx;
        wgt[size_t(voxel)] += float(w);
        for (int64_t ch = 0; ch < channels_; ++ch) {
          const double v = patch.at(((ch * pd + z) * ph + y) * pw + x);
          sum[size_t(ch * ps[0] * ps[1] * ps[2] + voxel)] += float(w * v);
        }
      }
}

Tensor PatchAccumulator::finalize() const {
  const auto& vs = grid_.volume_shape;
  const auto& ps = grid_.padded_shape;
  Tensor out = Tensor::zeros({channels_, vs[0], vs[1], vs[2]}, Dtype::F32);
  auto sum = sum_.data<float>();
  auto wgt = weight_.data<float>();
  auto dst = out.data<float>();
  int64_t flat = 0;
  for (int64_t ch = 0; ch < channels_; ++ch)
    for (int64_t z = 0; z < vs[0]; ++z)
      for (int64_t y = 0; y < vs[1]; ++y)
        for (int64_t x = 0; x < vs[2]; ++x, ++flat) {
          const int64_t voxel = (z * ps[1] + y) * ps[2] + x;
          const float w = wgt[size_t(voxel)];
          if (w == 0.0f)
            throw Error(ErrKind::UncoveredVoxel,
                        "voxel (" + std::to_string(z) + "," +
                            std::to_string(y) + "," + std::to_string(x) +
                            ") has zero weight");
          dst[size_t(flat)] =
              sum[size_t(ch * ps[0] * ps[1] * ps[2] + voxel)] / w;
        }
  return out;
}

}  // namespace voxelpipe
