// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense numeric kernels. The voxelpipe:: kernels are the production path and
// parallelize with OpenMP over independent output elements; each element
// accumulates in a fixed order, so results are bit-identical for any thread
// count. kernels::reference holds plain serial implementations written
// independently (scatter formulations where the production path gathers);
// tests compare the two and the bench target times them against each other.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace voxelpipe::kernels {

struct Conv2dGeom {
  int64_t batch, c_in, h, w;
  int64_t c_out, kh, kw;
  int64_t stride = 1, pad = 0;
  int64_t out_h() const { return (h + 2 * pad - kh) / stride + 1; }
  int64_t out_w() const { return (w + 2 * pad - kw) / stride + 1; }
};

struct ConvT2dGeom {
  int64_t batch, c_in, h, w;
  int64_t c_out, kh, kw;
  int64_t stride = 1, pad = 0;
  int64_t out_h() const { return (h - 1) * stride - 2 * pad + kh; }
  int64_t out_w() const { return (w - 1) * stride - 2 * pad + kw; }
};

struct Pool2dGeom {
  int64_t batch, c, h, w;
  int64_t k = 2, stride = 2;
  int64_t out_h() const { return (h - k) / stride + 1; }
  int64_t out_w() const { return (w - k) / stride + 1; }
};

struct Resample3dGeom {
  int64_t c, in_d, in_h, in_w;
  int64_t out_d, out_h, out_w;
  // input voxels advanced per output voxel, per axis
  double scale_d = 1.0, scale_h = 1.0, scale_w = 1.0;
};

namespace detail {
template <typename F>
inline void par_for(int64_t n, F&& body) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int64_t i = 0; i < n; ++i) body(i);
}

// indices o in [0, o_limit) with 0 <= o*stride + off < extent
inline std::pair<int64_t, int64_t> dense_range(int64_t o_limit, int64_t stride,
                                               int64_t off, int64_t extent) {
  const int64_t lo = off < 0 ? (-off + stride - 1) / stride : 0;
  const int64_t top = extent - 1 - off;
  const int64_t hi = top < 0 ? 0 : top / stride + 1;
  return {lo, std::min(o_limit, hi)};
}
}  // namespace detail

// ---------------------------------------------------------------- conv2d

// Each thread owns whole output rows (b, co, yo); per output element the
// terms still arrive in (ci, r, s) order, so values do not depend on the
// parallel grain.
template <typename T>
void conv2d_fwd(const T* x, const T* w, const T* bias, T* y,
                const Conv2dGeom& g) {
  const int64_t oh = g.out_h(), ow = g.out_w();
  detail::par_for(g.batch * g.c_out * oh, [&](int64_t row) {
    const int64_t yo = row % oh;
    const int64_t co = (row / oh) % g.c_out;
    const int64_t b = row / (oh * g.c_out);
    T* yp = y + row * ow;
    const T bv = bias ? bias[co] : T(0);
    for (int64_t xo = 0; xo < ow; ++xo) yp[xo] = bv;
    for (int64_t ci = 0; ci < g.c_in; ++ci) {
      const T* xp = x + ((b * g.c_in + ci) * g.h) * g.w;
      const T* wp = w + ((co * g.c_in + ci) * g.kh) * g.kw;
      for (int64_t r = 0; r < g.kh; ++r) {
        const int64_t ih = yo * g.stride - g.pad + r;
        if (ih < 0 || ih >= g.h) continue;
        const T* xrow = xp + ih * g.w;
        for (int64_t s = 0; s < g.kw; ++s) {
          const T wv = wp[r * g.kw + s];
          const int64_t off = s - g.pad;
          const auto [lo, hi] = detail::dense_range(ow, g.stride, off, g.w);
          for (int64_t xo = lo; xo < hi; ++xo)
            yp[xo] += xrow[xo * g.stride + off] * wv;
        }
      }
    }
  });
}

template <typename T>
void conv2d_bwd_x(const T* gy, const T* w, T* gx, const Conv2dGeom& g) {
  const int64_t oh = g.out_h(), ow = g.out_w();
  detail::par_for(g.batch * g.c_in * g.h, [&](int64_t row) {
    const int64_t ih = row % g.h;
    const int64_t ci = (row / g.h) % g.c_in;
    const int64_t b = row / (g.h * g.c_in);
    T* gxrow = gx + row * g.w;
    for (int64_t iw = 0; iw < g.w; ++iw) gxrow[iw] = T(0);
    for (int64_t co = 0; co < g.c_out; ++co) {
      const T* gp = gy + ((b * g.c_out + co) * oh) * ow;
      const T* wp = w + ((co * g.c_in + ci) * g.kh) * g.kw;
      for (int64_t r = 0; r < g.kh; ++r) {
        const int64_t num_h = ih + g.pad - r;
        if (num_h < 0 || num_h % g.stride != 0) continue;
        const int64_t yo = num_h / g.stride;
        if (yo >= oh) continue;
        const T* gyrow = gp + yo * ow;
        for (int64_t s = 0; s < g.kw; ++s) {
          const T wv = wp[r * g.kw + s];
          const int64_t off = s - g.pad;
          const auto [lo, hi] = detail::dense_range(ow, g.stride, off, g.w);
          for (int64_t xo = lo; xo < hi; ++xo)
            gxrow[xo * g.stride + off] += gyrow[xo] * wv;
        }
      }
    }
  });
}

template <typename T>
void conv2d_bwd_w(const T* gy, const T* x, T* gw, const Conv2dGeom& g) {
  const int64_t oh = g.out_h(), ow = g.out_w();
  detail::par_for(g.c_out * g.c_in, [&](int64_t pair) {
    const int64_t ci = pair % g.c_in;
    const int64_t co = pair / g.c_in;
    T* wp = gw + pair * g.kh * g.kw;
    for (int64_t r = 0; r < g.kh; ++r) {
      for (int64_t s = 0; s < g.kw; ++s) {
        const int64_t off = s - g.pad;
        const auto [lo, hi] = detail::dense_range(ow, g.stride, off, g.w);
        T acc = T(0);
        for (int64_t b = 0; b < g.batch; ++b) {
          const T* gp = gy + ((b * g.c_out + co) * oh) * ow;
          const T* xp = x + ((b * g.c_in + ci) * g.h) * g.w;
          for (int64_t yo = 0; yo < oh; ++yo) {
            const int64_t ih = yo * g.stride - g.pad + r;
            if (ih < 0 || ih >= g.h) continue;
            const T* gyrow = gp + yo * ow;
            const T* xrow = xp + ih * g.w;
            for (int64_t xo = lo; xo < hi; ++xo)
              acc += gyrow[xo] * xrow[xo * g.stride + off];
          }
        }
        wp[r * g.kw + s] = acc;
      }
    }
  });
}

template <typename T>
void conv2d_bwd_b(const T* gy, T* gb, const Conv2dGeom& g) {
  const int64_t plane = g.out_h() * g.out_w();
  detail::par_for(g.c_out, [&](int64_t co) {
    T acc = T(0);
    for (int64_t b = 0; b < g.batch; ++b) {
      const T* gp = gy + (b * g.c_out + co) * plane;
      for (int64_t p = 0; p < plane; ++p) acc += gp[p];
    }
    gb[co] = acc;
  });
}

// ------------------------------------------------------ conv_transpose2d
// weight layout [c_in, c_out, kh, kw]

template <typename T>
void convt2d_fwd(const T* x, const T* w, const T* bias, T* y,
                 const ConvT2dGeom& g) {
  const int64_t oh = g.out_h(), ow = g.out_w();
  detail::par_for(g.batch * g.c_out * oh, [&](int64_t row) {
    const int64_t yo = row % oh;
    const int64_t co = (row / oh) % g.c_out;
    const int64_t b = row / (oh * g.c_out);
    T* yp = y + row * ow;
    const T bv = bias ? bias[co] : T(0);
    for (int64_t xo = 0; xo < ow; ++xo) yp[xo] = bv;
    for (int64_t ci = 0; ci < g.c_in; ++ci) {
      const T* xp = x + ((b * g.c_in + ci) * g.h) * g.w;
      const T* wp = w + ((ci * g.c_out + co) * g.kh) * g.kw;
      for (int64_t r = 0; r < g.kh; ++r) {
        const int64_t num_h = yo + g.pad - r;
        if (num_h < 0 || num_h % g.stride != 0) continue;
        const int64_t ih = num_h / g.stride;
        if (ih >= g.h) continue;
        const T* xrow = xp + ih * g.w;
        for (int64_t s = 0; s < g.kw; ++s) {
          const T wv = wp[r * g.kw + s];
          const int64_t off = s - g.pad;
          const auto [lo, hi] = detail::dense_range(g.w, g.stride, off, ow);
          for (int64_t iw = lo; iw < hi; ++iw)
            yp[iw * g.stride + off] += xrow[iw] * wv;
        }
      }
    }
  });
}

template <typename T>
void convt2d_bwd_x(const T* gy, const T* w, T* gx, const ConvT2dGeom& g) {
  const int64_t oh = g.out_h(), ow = g.out_w();
  detail::par_for(g.batch * g.c_in * g.h, [&](int64_t row) {
    const int64_t ih = row % g.h;
    const int64_t ci = (row / g.h) % g.c_in;
    const int64_t b = row / (g.h * g.c_in);
    T* gxrow = gx + row * g.w;
    for (int64_t iw = 0; iw < g.w; ++iw) gxrow[iw] = T(0);
    for (int64_t co = 0; co < g.c_out; ++co) {
      const T* gp = gy + ((b * g.c_out + co) * oh) * ow;
      const T* wp = w + ((ci * g.c_out + co) * g.kh) * g.kw;
      for (int64_t r = 0; r < g.kh; ++r) {
        const int64_t yo = ih * g.stride - g.pad + r;
        if (yo < 0 || yo >= oh) continue;
        const T* gyrow = gp + yo * ow;
        for (int64_t s = 0; s < g.kw; ++s) {
          const T wv = wp[r * g.kw + s];
          const int64_t off = s - g.pad;
          const auto [lo, hi] = detail::dense_range(g.w, g.stride, off, ow);
          for (int64_t iw = lo; iw < hi; ++iw)
            gxrow[iw] += gyrow[iw * g.stride + off] * wv;
        }
      }
    }
  });
}

template <typename T>
void convt2d_bwd_w(const T* gy, const T* x, T* gw, const ConvT2dGeom& g) {
  const int64_t oh = g.out_h(), ow = g.out_w();
  detail::par_for(g.c_in * g.c_out, [&](int64_t pair) {
    const int64_t co = pair % g.c_out;
    const int64_t ci = pair / g.c_out;
    T* wp = gw + pair * g.kh * g.kw;
    for (int64_t r = 0; r < g.kh; ++r) {
      for (int64_t s = 0; s < g.kw; ++s) {
        const int64_t off = s - g.pad;
        const auto [lo, hi] = detail::dense_range(g.w, g.stride, off, ow);
        T acc = T(0);
        for (int64_t b = 0; b < g.batch; ++b) {
          const T* gp = gy + ((b * g.c_out + co) * oh) * ow;
          const T* xp = x + ((b * g.c_in + ci) * g.h) * g.w;
          for (int64_t ih = 0; ih < g.h; ++ih) {
            const int64_t yo = ih * g.stride - g.pad + r;
            if (yo < 0 || yo >= oh) continue;
            const T* gyrow = gp + yo * ow;
            const T* xrow = xp + ih * g.w;
            for (int64_t iw = lo; iw < hi; ++iw)
              acc += xrow[iw] * gyrow[iw * g.stride + off];
          }
        }
        wp[r * g.kw + s] = acc;
      }
    }
  });
}

template <typename T>
void convt2d_bwd_b(const T* gy, T* gb, const ConvT2dGeom& g) {
  const int64_t plane = g.out_h() * g.out_w();
  detail::par_for(g.c_out, [&](int64_t co) {
    T acc = T(0);
    for (int64_t b = 0; b < g.batch; ++b) {
      const T* gp = gy + (b * g.c_out + co) * plane;
      for (int64_t p = 0; p < plane; ++p) acc += gp[p];
    }
    gb[co] = acc;
  });
}

// --------------------------------------------------------------- maxpool

// idx receives, per output element, the flat input offset of the chosen
// maximum. Ties go to the first element in window scan order.
template <typename T>
void maxpool2d_fwd(const T* x, T* y, int64_t* idx, const Pool2dGeom& g) {
  const int64_t oh = g.out_h(), ow = g.out_w();
  detail::par_for(g.batch * g.c * oh, [&](int64_t row) {
    const int64_t yo = row % oh;
    const int64_t plane = row / oh;  // combined (b, c) index
    const int64_t base = plane * g.h * g.w;
    const T* xp = x + base;
    T* yrow = y + row * ow;
    int64_t* irow = idx + row * ow;
    for (int64_t xo = 0; xo < ow; ++xo) {
      T best{};
      int64_t best_at = -1;
      for (int64_t r = 0; r < g.k; ++r) {
        const int64_t ih = yo * g.stride + r;
        for (int64_t s = 0; s < g.k; ++s) {
          const int64_t iw = xo * g.stride + s;
          const T v = xp[ih * g.w + iw];
          if (best_at < 0 || v > best) {
            best = v;
            best_at = base + ih * g.w + iw;
          }
        }
      }
      yrow[xo] = best;
      irow[xo] = best_at;
    }
  });
}

template <typename T>
void maxpool2d_bwd(const T* gy, const int64_t* idx, T* gx, int64_t n_out,
                   int64_t n_in) {
  // scatter with possible collisions is avoided: pooling windows are
  // disjoint only when stride >= k, so accumulate serially.
  std::fill(gx, gx + n_in, T(0));
  for (int64_t i = 0; i < n_out; ++i) gx[idx[i]] += gy[i];
}

// ---------------------------------------------------------------- eltwise

template <typename T>
void relu_fwd(const T* x, T* y, int64_t n) {
  detail::par_for(n, [&](int64_t i) { y[i] = x[i] > T(0) ? x[i] : T(0); });
}

template <typename T>
void relu_bwd(const T* gy, const T* x, T* gx, int64_t n) {
  detail::par_for(n, [&](int64_t i) { gx[i] = x[i] > T(0) ? gy[i] : T(0); });
}

// ------------------------------------------------------- channel softmax
// layout [outer, C, inner]; softmax over C per (outer, inner) site.

template <typename T>
void softmax_c_fwd(const T* x, T* y, int64_t outer, int64_t c, int64_t inner) {
  detail::par_for(outer * inner, [&](int64_t i) {
    const int64_t o = i / inner, s = i % inner;
    const T* xp = x + o * c * inner + s;
    T* yp = y + o * c * inner + s;
    T m = xp[0];
    for (int64_t k = 1; k < c; ++k) m = std::max(m, xp[k * inner]);
    T sum = T(0);
    for (int64_t k = 0; k < c; ++k) {
      const T e = std::exp(xp[k * inner] - m);
      yp[k * inner] = e;
      sum += e;
    }
    for (int64_t k = 0; k < c; ++k) yp[k * inner] /= sum;
  });
}

template <typename T>
void softmax_c_bwd(const T* gy, const T* y, T* gx, int64_t outer, int64_t c,
                   int64_t inner) {
  detail::par_for(outer * inner, [&](int64_t i) {
    const int64_t o = i / inner, s = i % inner;
    const T* gp = gy + o * c * inner + s;
    const T* yp = y + o * c * inner + s;
    T* xp = gx + o * c * inner + s;
    T dot = T(0);
    for (int64_t k = 0; k < c; ++k) dot += gp[k * inner] * yp[k * inner];
    for (int64_t k = 0; k < c; ++k)
      xp[k * inner] = yp[k * inner] * (gp[k * inner] - dot);
  });
}

template <typename T>
void argmax_c(const T* x, int64_t* y, int64_t outer, int64_t c, int64_t inner) {
  detail::par_for(outer * inner, [&](int64_t i) {
    const int64_t o = i / inner, s = i % inner;
    const T* xp = x + o * c * inner + s;
    int64_t best = 0;
    for (int64_t k = 1; k < c; ++k)
      if (xp[k * inner] > xp[best * inner]) best = k;
    y[o * inner + s] = best;
  });
}

// ------------------------------------------------------------- resampling
// Output voxel centers map to input coordinate i_out * scale, clamped to the
// valid range. Layout [C, D, H, W].

template <typename T>
void resample3d_linear(const T* x, T* y, const Resample3dGeom& g) {
  detail::par_for(g.c * g.out_d * g.out_h, [&](int64_t row) {
    const int64_t yo = row % g.out_h;
    const int64_t zo = (row / g.out_h) % g.out_d;
    const int64_t c = row / (g.out_h * g.out_d);
    const auto clampf = [](double v, int64_t n) {
      return std::clamp(v, 0.0, static_cast<double>(n - 1));
    };
    const double zu = clampf(zo * g.scale_d, g.in_d);
    const double yu = clampf(yo * g.scale_h, g.in_h);
    const int64_t z0 = static_cast<int64_t>(zu), z1 = std::min(z0 + 1, g.in_d - 1);
    const int64_t y0 = static_cast<int64_t>(yu), y1 = std::min(y0 + 1, g.in_h - 1);
    const double fz = zu - z0, fy = yu - y0;
    const T* xp = x + c * g.in_d * g.in_h * g.in_w;
    const T* r00 = xp + (z0 * g.in_h + y0) * g.in_w;
    const T* r01 = xp + (z0 * g.in_h + y1) * g.in_w;
    const T* r10 = xp + (z1 * g.in_h + y0) * g.in_w;
    const T* r11 = xp + (z1 * g.in_h + y1) * g.in_w;
    T* yp = y + row * g.out_w;
    for (int64_t xo = 0; xo < g.out_w; ++xo) {
      const double xu = clampf(xo * g.scale_w, g.in_w);
      const int64_t x0 = static_cast<int64_t>(xu);
      const int64_t x1 = std::min(x0 + 1, g.in_w - 1);
      const double fx = xu - x0;
      const double c00 = r00[x0] * (1 - fx) + r00[x1] * fx;
      const double c01 = r01[x0] * (1 - fx) + r01[x1] * fx;
      const double c10 = r10[x0] * (1 - fx) + r10[x1] * fx;
      const double c11 = r11[x0] * (1 - fx) + r11[x1] * fx;
      const double c0 = c00 * (1 - fy) + c01 * fy;
      const double c1 = c10 * (1 - fy) + c11 * fy;
      yp[xo] = static_cast<T>(c0 * (1 - fz) + c1 * fz);
    }
  });
}

template <typename T>
void resample3d_nearest(const T* x, T* y, const Resample3dGeom& g) {
  const auto pick = [](int64_t o, double scale, int64_t n) {
    const int64_t v = static_cast<int64_t>(std::floor(o * scale + 0.5));
    return std::clamp<int64_t>(v, 0, n - 1);
  };
  detail::par_for(g.c * g.out_d * g.out_h, [&](int64_t row) {
    const int64_t yo = row % g.out_h;
    const int64_t zo = (row / g.out_h) % g.out_d;
    const int64_t c = row / (g.out_h * g.out_d);
    const int64_t z = pick(zo, g.scale_d, g.in_d);
    const int64_t yy = pick(yo, g.scale_h, g.in_h);
    const T* xrow = x + ((c * g.in_d + z) * g.in_h + yy) * g.in_w;
    T* yp = y + row * g.out_w;
    for (int64_t xo = 0; xo < g.out_w; ++xo)
      yp[xo] = xrow[pick(xo, g.scale_w, g.in_w)];
  });
}

}  // namespace voxelpipe::kernels
