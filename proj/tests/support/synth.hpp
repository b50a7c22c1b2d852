// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic segmentation corpus for tests: cubic CT-like volumes holding
// one bright geometric shape over dim background noise, with the exact
// shape mask as the label, written as MetaImage pairs.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>

#include "voxelpipe/common/rng.hpp"
#include "voxelpipe/dataio/metaimage.hpp"
#include "voxelpipe/dataio/volume.hpp"

namespace voxelpipe::synth {

// shape_kind: 0 sphere, 1 box, 2 cylinder along depth, 3 diamond (L1 ball)
inline bool inside_shape(size_t shape_kind, int64_t n, int64_t d, int64_t h,
                         int64_t w) {
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  const double dd = static_cast<double>(d) - c;
  const double dh = static_cast<double>(h) - c;
  const double dw = static_cast<double>(w) - c;
  switch (shape_kind % 4) {
    case 0:
      return dd * dd + dh * dh + dw * dw <= 0.12 * n * n;
    case 1:
      return std::abs(dd) <= 0.28 * n && std::abs(dh) <= 0.28 * n &&
             std::abs(dw) <= 0.28 * n;
    case 2:
      return dh * dh + dw * dw <= 0.1 * n * n && std::abs(dd) <= 0.3 * n;
    default:
      return std::abs(dd) + std::abs(dh) + std::abs(dw) <= 0.55 * n;
  }
}

// CT: shape voxels in [0.8, 1.0), background in [0, 0.2); MASK: {0, 1}
inline std::pair<Volume, Volume> make_case(int64_t n, size_t shape_kind,
                                           uint64_t seed) {
  Volume ct;
  ct.array = Tensor::zeros({1, n, n, n}, Dtype::F32);
  ct.element_type = ElementType::F32;
  Volume mask;
  mask.array = Tensor::zeros({1, n, n, n}, Dtype::U8);
  mask.element_type = ElementType::U8;

  Rng rng(seed);
  auto cts = ct.array.data<float>();
  auto ms = mask.array.data<uint8_t>();
  int64_t i = 0;
  for (int64_t d = 0; d < n; ++d)
    for (int64_t h = 0; h < n; ++h)
      for (int64_t w = 0; w < n; ++w, ++i) {
        const bool in = inside_shape(shape_kind, n, d, h, w);
        const double u = rng.uniform();
        cts[i] = static_cast<float>(in ? 0.8 + 0.2 * u : 0.2 * u);
        ms[i] = in ? 1 : 0;
      }
  return {std::move(ct), std::move(mask)};
}

// writes <root>/<prefix>_<i>/{CT.mha, MASK.mha} for nb cases and returns
// the dataset root
inline std::filesystem::path write_dataset(const std::filesystem::path& root,
                                           size_t nb, int64_t n,
                                           uint64_t seed,
                                           const std::string& prefix =
                                               "Patient") {
  std::filesystem::create_directories(root);
  for (size_t i = 0; i < nb; ++i) {
    const std::filesystem::path dir =
        root / (prefix + "_" + std::to_string(i));
    std::filesystem::create_directories(dir);
    auto [ct, mask] = make_case(n, i, seed + i);
    write_metaimage(ct, dir / "CT.mha");
    write_metaimage(mask, dir / "MASK.mha");
  }
  return root;
}

}  // namespace voxelpipe::synth
