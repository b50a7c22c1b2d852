// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0
//
// Times the OpenMP production kernels against the serial reference
// implementations on training-sized workloads. Results also double as a
// sanity check: both paths must agree before a timing is reported.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "voxelpipe/common/rng.hpp"
#include "voxelpipe/kernels/kernels.hpp"
#include "voxelpipe/kernels/reference.hpp"

using namespace voxelpipe;

namespace {

std::vector<float> random_vec(int64_t n, Rng& rng) {
  std::vector<float> v(static_cast<size_t>(n));
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const std::string& name, double serial_ms, double parallel_ms,
            double max_diff) {
  std::printf("%-28s %10.3f ms %10.3f ms %8.2fx   max|diff| %.2e\n",
              name.c_str(), serial_ms, parallel_ms, serial_ms / parallel_ms,
              max_diff);
}

double max_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
  double m = 0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, static_cast<double>(std::abs(a[i] - b[i])));
  return m;
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP enabled, max threads = %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP not available, production kernels run serially\n");
#endif
  std::printf("%-28s %13s %13s %9s\n", "kernel", "reference", "openmp",
              "speedup");

  Rng rng(7);
  const int reps = 5;

  {
    kernels::Conv2dGeom g{8, 16, 64, 64, 32, 3, 3, 1, 1};
    auto x = random_vec(g.batch * g.c_in * g.h * g.w, rng);
    auto w = random_vec(g.c_out * g.c_in * g.kh * g.kw, rng);
    auto b = random_vec(g.c_out, rng);
    const int64_t n = g.batch * g.c_out * g.out_h() * g.out_w();
    std::vector<float> y1(n), y2(n);
    double ts = time_ms(
        [&] {
          kernels::reference::conv2d_fwd(x.data(), w.data(), b.data(),
                                         y1.data(), g);
        },
        reps);
    double tp = time_ms(
        [&] {
          kernels::conv2d_fwd(x.data(), w.data(), b.data(), y2.data(), g);
        },
        reps);
    report("conv2d_fwd 8x16x64x64 k3", ts, tp, max_abs_diff(y1, y2));
  }

  {
    kernels::Conv2dGeom g{4, 16, 48, 48, 32, 3, 3, 1, 1};
    auto x = random_vec(g.batch * g.c_in * g.h * g.w, rng);
    auto w = random_vec(g.c_out * g.c_in * g.kh * g.kw, rng);
    auto gy = random_vec(g.batch * g.c_out * g.out_h() * g.out_w(), rng);
    std::vector<float> gx1(x.size()), gw1(w.size()), gb1(g.c_out);
    std::vector<float> gx2(x.size()), gw2(w.size()), gb2(g.c_out);
    double ts = time_ms(
        [&] {
          kernels::reference::conv2d_bwd(gy.data(), x.data(), w.data(),
                                         gx1.data(), gw1.data(), gb1.data(),
                                         g);
        },
        reps);
    double tp = time_ms(
        [&] {
          kernels::conv2d_bwd_x(gy.data(), w.data(), gx2.data(), g);
          kernels::conv2d_bwd_w(gy.data(), x.data(), gw2.data(), g);
          kernels::conv2d_bwd_b(gy.data(), gb2.data(), g);
        },
        reps);
    report("conv2d_bwd 4x16x48x48 k3", ts, tp, max_abs_diff(gx1, gx2));
  }

  {
    kernels::ConvT2dGeom g{8, 32, 32, 32, 16, 2, 2, 2, 0};
    auto x = random_vec(g.batch * g.c_in * g.h * g.w, rng);
    auto w = random_vec(g.c_in * g.c_out * g.kh * g.kw, rng);
    const int64_t n = g.batch * g.c_out * g.out_h() * g.out_w();
    std::vector<float> y1(n), y2(n);
    double ts = time_ms(
        [&] {
          kernels::reference::convt2d_fwd(x.data(), w.data(),
                                          static_cast<const float*>(nullptr),
                                          y1.data(), g);
        },
        reps);
    double tp = time_ms(
        [&] {
          kernels::convt2d_fwd(x.data(), w.data(),
                               static_cast<const float*>(nullptr), y2.data(),
                               g);
        },
        reps);
    report("convt2d_fwd 8x32x32x32 k2s2", ts, tp, max_abs_diff(y1, y2));
  }

  {
    const int64_t outer = 64, c = 8, inner = 64 * 64;
    auto x = random_vec(outer * c * inner, rng);
    std::vector<float> y1(x.size()), y2(x.size());
    double ts = time_ms(
        [&] {
          kernels::reference::softmax_c_fwd(x.data(), y1.data(), outer, c,
                                            inner);
        },
        reps);
    double tp = time_ms(
        [&] { kernels::softmax_c_fwd(x.data(), y2.data(), outer, c, inner); },
        reps);
    report("softmax 64x8x4096", ts, tp, max_abs_diff(y1, y2));
  }

  {
    kernels::Resample3dGeom g{2,        64,        64,        64, 128,
                              128,      128,       64.0 / 128, 64.0 / 128,
                              64.0 / 128};
    auto x = random_vec(g.c * g.in_d * g.in_h * g.in_w, rng);
    const int64_t n = g.c * g.out_d * g.out_h * g.out_w;
    std::vector<float> y1(n), y2(n);
    double ts = time_ms(
        [&] { kernels::reference::resample3d_linear(x.data(), y1.data(), g); },
        reps);
    double tp = time_ms(
        [&] { kernels::resample3d_linear(x.data(), y2.data(), g); }, reps);
    report("resample3d 64^3 -> 128^3", ts, tp, max_abs_diff(y1, y2));
  }

  return 0;
}
