// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0
//
// Patch grid, extraction, and reconstruction tests. Coverage is checked
// against a brute-force mark-every-voxel oracle; reconstruction against the
// identity model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "voxelpipe/common/error.hpp"
#include "voxelpipe/common/rng.hpp"
#include "voxelpipe/patch/patch.hpp"

using namespace voxelpipe;

namespace {

Tensor indexed_tensor(std::vector<int64_t> shape) {
  Tensor t = Tensor::zeros(std::move(shape), Dtype::F32);
  for (int64_t i = 0; i < t.numel(); ++i) t.set(i, double(i));
  return t;
}

Tensor random_tensor(std::vector<int64_t> shape, uint64_t seed) {
  Tensor t = Tensor::zeros(std::move(shape), Dtype::F32);
  Rng rng(seed);
  for (int64_t i = 0; i < t.numel(); ++i) t.set(i, rng.uniform(-1.0, 1.0));
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(a.at(i) - b.at(i)));
  return m;
}

// reconstructs through the identity model in the given patch order
Tensor reconstruct(const Tensor& vol, const PatchGrid& grid,
                   PatchWeighting weighting,
                   const std::vector<size_t>& order) {
  PatchAccumulator acc(vol.dim(0), grid, weighting);
  for (size_t i : order)
    acc.accumulate(i, extract_patch(vol, grid, i, 0, 0.0));
  return acc.finalize();
}

std::vector<size_t> iota_order(size_t n) {
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t(0));
  return order;
}

}  // namespace

TEST_CASE("grid start positions match the worked examples") {
  SUBCASE("L=10 p=4 o=2") {
    const PatchGrid g = compute_grid({10, 1, 1}, {4, 1, 1}, {2, 0, 0});
    CHECK(g.axis_starts[0] == std::vector<int64_t>{0, 2, 4, 6});
    CHECK(g.padded_shape == std::array<int64_t, 3>{10, 1, 1});
  }
  SUBCASE("L=9 p=4 o=2 clamps the final start") {
    const PatchGrid g = compute_grid({9, 1, 1}, {4, 1, 1}, {2, 0, 0});
    CHECK(g.axis_starts[0] == std::vector<int64_t>{0, 2, 4, 5});
  }
  SUBCASE("L=9 p=16 pads") {
    const PatchGrid g = compute_grid({9, 1, 1}, {16, 1, 1}, {0, 0, 0});
    CHECK(g.axis_starts[0] == std::vector<int64_t>{0});
    CHECK(g.padded_shape[0] == 16);
  }
  SUBCASE("positions are the cartesian product, D slowest") {
    const PatchGrid g = compute_grid({10, 9, 9}, {4, 4, 16}, {2, 2, 0});
    CHECK(g.axis_starts[0].size() == 4);
    CHECK(g.axis_starts[1].size() == 4);
    CHECK(g.axis_starts[2].size() == 1);
    REQUIRE(g.size() == 16);
    CHECK(g.positions[0] == std::array<int64_t, 3>{0, 0, 0});
    CHECK(g.positions[1] == std::array<int64_t, 3>{0, 2, 0});
    CHECK(g.positions[4] == std::array<int64_t, 3>{2, 0, 0});
    CHECK(g.positions[15] == std::array<int64_t, 3>{6, 5, 0});
  }
}

TEST_CASE("grid coverage: brute-force oracle over all small axes") {
  // every (L, p, o) with L <= 12, p <= 6, o < p: every voxel of the padded
  // axis is covered, starts strictly increase, final start is max(0, L-p)
  for (int64_t L = 1; L <= 12; ++L)
    for (int64_t p = 1; p <= 6; ++p)
      for (int64_t o = 0; o < p; ++o) {
        CAPTURE(L);
        CAPTURE(p);
        CAPTURE(o);
        const PatchGrid g = compute_grid({L, 1, 1}, {p, 1, 1}, {o, 0, 0});
        const auto& starts = g.axis_starts[0];
        REQUIRE(!starts.empty());
        const int64_t padded = std::max(L, p);
        std::vector<bool> covered(size_t(padded), false);
        int64_t prev = -1;
        for (int64_t s : starts) {
          CHECK(s > prev);  // strictly increasing
          prev = s;
          CHECK(s >= 0);
          CHECK(s + p <= padded);
          for (int64_t i = s; i < s + p; ++i) covered[size_t(i)] = true;
        }
        CHECK(starts.back() == std::max<int64_t>(0, L - p));
        CHECK(std::all_of(covered.begin(), covered.end(),
                          [](bool b) { return b; }));
      }
}

TEST_CASE("grid rejects overlap >= patch") {
  try {
    compute_grid({10, 1, 1}, {4, 1, 1}, {4, 0, 0});
    FAIL("expected InvalidOverlap");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrKind::InvalidOverlap);
  }
  try {
    compute_grid({10, 1, 1}, {4, 1, 1}, {-1, 0, 0});
    FAIL("expected InvalidOverlap");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrKind::InvalidOverlap);
  }
}

TEST_CASE("interior patch extraction is an exact crop") {
  const Tensor vol = indexed_tensor({2, 6, 6, 6});
  const PatchGrid g = compute_grid({6, 6, 6}, {4, 4, 4}, {2, 2, 2});
  // position (2,2,2) is the last of the 2x2x2 grid
  REQUIRE(g.size() == 8);
  REQUIRE(g.positions[7] == std::array<int64_t, 3>{2, 2, 2});
  const Tensor patch = extract_patch(vol, g, 7, 0, -1.0);
  REQUIRE(patch.shape() == std::vector<int64_t>{2, 4, 4, 4});
  for (int64_t ch = 0; ch < 2; ++ch)
    for (int64_t z = 0; z < 4; ++z)
      for (int64_t y = 0; y < 4; ++y)
        for (int64_t x = 0; x < 4; ++x) {
          const double want =
              vol.at(((ch * 6 + z + 2) * 6 + y + 2) * 6 + x + 2);
          CHECK(patch.at(((ch * 4 + z) * 4 + y) * 4 + x) == want);
        }
}

TEST_CASE("patches beyond the volume fill with pad_value") {
  const Tensor vol = indexed_tensor({1, 2, 2, 2});
  const PatchGrid g = compute_grid({2, 2, 2}, {4, 4, 4}, {0, 0, 0});
  REQUIRE(g.size() == 1);
  const Tensor patch = extract_patch(vol, g, 0, 0, -1.0);
  REQUIRE(patch.shape() == std::vector<int64_t>{1, 4, 4, 4});
  for (int64_t z = 0; z < 4; ++z)
    for (int64_t y = 0; y < 4; ++y)
      for (int64_t x = 0; x < 4; ++x) {
        const double got = patch.at((z * 4 + y) * 4 + x);
        if (z < 2 && y < 2 && x < 2)
          CHECK(got == vol.at((z * 2 + y) * 2 + x));
        else
          CHECK(got == -1.0);
      }
}

TEST_CASE("2.5D slabs stack adjacent slices into channels") {
  // f(z,y,x) = 100z + 10y + x over 1x4x3x3
  Tensor vol = Tensor::zeros({1, 4, 3, 3}, Dtype::F32);
  for (int64_t z = 0; z < 4; ++z)
    for (int64_t y = 0; y < 3; ++y)
      for (int64_t x = 0; x < 3; ++x)
        vol.set((z * 3 + y) * 3 + x, 100.0 * z + 10.0 * y + x);
  const PatchGrid g = compute_grid({4, 3, 3}, {1, 3, 3}, {0, 0, 0});
  REQUIRE(g.size() == 4);  // one patch per slice

  SUBCASE("e=2 yields 5 channels") {
    const Tensor slab = extract_patch(vol, g, 2, 2, -1.0);
    CHECK(slab.shape() == std::vector<int64_t>{5, 1, 3, 3});
  }
  SUBCASE("first slice with e=1: channel 0 is pad_value") {
    const Tensor slab = extract_patch(vol, g, 0, 1, -1.0);
    REQUIRE(slab.shape() == std::vector<int64_t>{3, 1, 3, 3});
    for (int64_t i = 0; i < 9; ++i) CHECK(slab.at(i) == -1.0);  // slice -1
    for (int64_t y = 0; y < 3; ++y)
      for (int64_t x = 0; x < 3; ++x) {
        CHECK(slab.at(9 + y * 3 + x) == 10.0 * y + x);           // slice 0
        CHECK(slab.at(18 + y * 3 + x) == 100.0 + 10.0 * y + x);  // slice 1
      }
  }
  SUBCASE("center channel equals the plain patch") {
    const Tensor slab = extract_patch(vol, g, 1, 1, -1.0);
    const Tensor plain = extract_patch(vol, g, 1, 0, -1.0);
    for (int64_t i = 0; i < 9; ++i) CHECK(slab.at(9 + i) == plain.at(i));
  }
  SUBCASE("multi-channel slabs are slice-major") {
    Tensor two = Tensor::zeros({2, 4, 3, 3}, Dtype::F32);
    for (int64_t i = 0; i < two.numel(); ++i) two.set(i, double(i));
    const Tensor slab = extract_patch(two, g, 1, 1, -1.0);
    REQUIRE(slab.shape() == std::vector<int64_t>{6, 1, 3, 3});
    // channel layout: (slice -1, ch 0), (slice -1, ch 1), (slice 0, ch 0)...
    for (int64_t y = 0; y < 3; ++y)
      for (int64_t x = 0; x < 3; ++x) {
        CHECK(slab.at(0 * 9 + y * 3 + x) == two.at((0 * 3 + y) * 3 + x));
        CHECK(slab.at(1 * 9 + y * 3 + x) ==
              two.at(((1 * 4 + 0) * 3 + y) * 3 + x));
        CHECK(slab.at(2 * 9 + y * 3 + x) == two.at(((1) * 3 + y) * 3 + x));
      }
  }
  SUBCASE("slab requires patch depth 1") {
    const PatchGrid g3 = compute_grid({4, 3, 3}, {2, 3, 3}, {0, 0, 0});
    CHECK_THROWS_AS(extract_patch(vol, g3, 0, 1, -1.0), Error);
  }
}

TEST_CASE("extraction index out of range") {
  const Tensor vol = indexed_tensor({1, 4, 4, 4});
  const PatchGrid g = compute_grid({4, 4, 4}, {4, 4, 4}, {0, 0, 0});
  try {
    extract_patch(vol, g, 1, 0, 0.0);
    FAIL("expected IndexError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrKind::Index);
  }
}

TEST_CASE("cosine window matches the closed form") {
  const auto w = cosine_axis_weights(4);
  REQUIRE(w.size() == 4);
  CHECK(w[0] == doctest::Approx(0.14645).epsilon(1e-4));
  CHECK(w[1] == doctest::Approx(0.85355).epsilon(1e-4));
  CHECK(w[2] == doctest::Approx(0.85355).epsilon(1e-4));
  CHECK(w[3] == doctest::Approx(0.14645).epsilon(1e-4));
  CHECK(w[0] == w[3]);  // symmetric
  CHECK(w[1] == w[2]);

  // strictly positive for every patch extent
  for (int64_t p = 1; p <= 16; ++p)
    for (double x : cosine_axis_weights(p)) CHECK(x > 0.0);

  // extent 1 gets weight exactly 1
  CHECK(cosine_axis_weights(1) == std::vector<double>{1.0});
}

TEST_CASE("identity reconstruction over assorted grids") {
  struct Config {
    std::array<int64_t, 3> shape, patch, overlap;
  };
  const Config configs[] = {
      {{5, 6, 7}, {2, 3, 4}, {1, 1, 2}},
      {{6, 6, 6}, {4, 4, 4}, {2, 2, 2}},
      {{4, 4, 4}, {4, 4, 4}, {0, 0, 0}},
      {{3, 2, 9}, {4, 3, 4}, {0, 0, 3}},   // padding on two axes
      {{1, 8, 8}, {1, 4, 4}, {0, 2, 2}},   // 2D slices
      {{12, 1, 5}, {5, 1, 5}, {4, 0, 0}},  // heavy overlap
  };
  for (const Config& c : configs)
    for (PatchWeighting w : {PatchWeighting::Uniform, PatchWeighting::Cosine}) {
      CAPTURE(c.shape[0]);
      CAPTURE(c.patch[0]);
      CAPTURE(int(w));
      const Tensor vol =
          random_tensor({2, c.shape[0], c.shape[1], c.shape[2]}, 99);
      const PatchGrid g = compute_grid(c.shape, c.patch, c.overlap);
      const Tensor rec = reconstruct(vol, g, w, iota_order(g.size()));
      CHECK(max_abs_diff(vol, rec) < 1e-5);
    }
}

TEST_CASE("constant predictions reconstruct the constant") {
  const PatchGrid g = compute_grid({5, 6, 7}, {2, 3, 4}, {1, 1, 2});
  for (PatchWeighting w : {PatchWeighting::Uniform, PatchWeighting::Cosine}) {
    // powers of two scale the window exactly, so equality is exact
    PatchAccumulator acc(1, g, w);
    const Tensor patch = Tensor::full({1, 2, 3, 4}, Dtype::F32, 0.5);
    for (size_t i = 0; i < g.size(); ++i) acc.accumulate(i, patch);
    const Tensor out = acc.finalize();
    for (int64_t i = 0; i < out.numel(); ++i) CHECK(out.at(i) == 0.5);

    // arbitrary constants are exact to f32 rounding
    PatchAccumulator acc2(1, g, w);
    const Tensor patch2 = Tensor::full({1, 2, 3, 4}, Dtype::F32, 2.7);
    for (size_t i = 0; i < g.size(); ++i) acc2.accumulate(i, patch2);
    const Tensor out2 = acc2.finalize();
    for (int64_t i = 0; i < out2.numel(); ++i)
      CHECK(out2.at(i) == doctest::Approx(2.7).epsilon(1e-6));
  }
}

TEST_CASE("reconstruction is order-invariant within tolerance") {
  const Tensor vol = random_tensor({1, 6, 6, 6}, 7);
  const PatchGrid g = compute_grid({6, 6, 6}, {4, 4, 4}, {2, 2, 2});
  std::vector<size_t> order = iota_order(g.size());
  const Tensor forward = reconstruct(vol, g, PatchWeighting::Cosine, order);
  std::reverse(order.begin(), order.end());
  const Tensor reversed = reconstruct(vol, g, PatchWeighting::Cosine, order);
  Rng rng(5);
  shuffle_indices(order, rng);
  const Tensor shuffled = reconstruct(vol, g, PatchWeighting::Cosine, order);
  CHECK(max_abs_diff(forward, reversed) < 1e-5);
  CHECK(max_abs_diff(forward, shuffled) < 1e-5);
}

TEST_CASE("finalize rejects uncovered voxels") {
  const Tensor vol = random_tensor({1, 1, 1, 4}, 3);
  const PatchGrid g = compute_grid({1, 1, 4}, {1, 1, 2}, {0, 0, 0});
  REQUIRE(g.size() == 2);
  PatchAccumulator acc(1, g, PatchWeighting::Uniform);
  acc.accumulate(0, extract_patch(vol, g, 0, 0, 0.0));
  // voxels 2..3 only belong to the skipped second patch
  try {
    acc.finalize();
    FAIL("expected UncoveredVoxel");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrKind::UncoveredVoxel);
  }
}

TEST_CASE("accumulator rejects wrong shapes and bad indices") {
  const PatchGrid g = compute_grid({4, 4, 4}, {2, 2, 2}, {0, 0, 0});
  PatchAccumulator acc(1, g, PatchWeighting::Uniform);
  SUBCASE("wrong spatial extents") {
    CHECK_THROWS_AS(acc.accumulate(0, Tensor::zeros({1, 2, 2, 3}, Dtype::F32)),
                    Error);
  }
  SUBCASE("wrong channel count") {
    CHECK_THROWS_AS(acc.accumulate(0, Tensor::zeros({2, 2, 2, 2}, Dtype::F32)),
                    Error);
  }
  SUBCASE("index out of range") {
    try {
      acc.accumulate(g.size(), Tensor::zeros({1, 2, 2, 2}, Dtype::F32));
      FAIL("expected IndexError");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrKind::Index);
    }
  }
}

TEST_CASE("weighting names parse") {
  CHECK(patch_weighting_from_name("Uniform") == PatchWeighting::Uniform);
  CHECK(patch_weighting_from_name("Cosine") == PatchWeighting::Cosine);
  CHECK_THROWS_AS(patch_weighting_from_name("Gaussian"), Error);
}
