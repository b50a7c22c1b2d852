// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0
//
// Serial reference kernels. Where the production kernels gather over output
// elements, these scatter from input/output elements in textbook form, so
// agreement between the two is a real check rather than the same code run
// twice. Used by the parity tests and the kernel benchmark.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>

#include "voxelpipe/kernels/kernels.hpp"

namespace voxelpipe::kernels::reference {

template <typename T>
void conv2d_fwd(const T* x, const T* w, const T* bias, T* y,
                const Conv2dGeom& g) {
  const int64_t oh = g.out_h(), ow = g.out_w();
  for (int64_t i = 0; i < g.batch * g.c_out * oh * ow; ++i)
    y[i] = bias ? bias[(i / (oh * ow)) % g.c_out] : T(0);
  for (int64_t b = 0; b < g.batch; ++b)
    for (int64_t co = 0; co < g.c_out; ++co)
      for (int64_t ci = 0; ci < g.c_in; ++ci)
        for (int64_t r = 0; r < g.kh; ++r)
          for (int64_t s = 0; s < g.kw; ++s) {
            const T wv = w[((co * g.c_in + ci) * g.kh + r) * g.kw + s];
            for (int64_t yo = 0; yo < oh; ++yo) {
              const int64_t ih = yo * g.stride - g.pad + r;
              if (ih < 0 || ih >= g.h) continue;
              for (int64_t xo = 0; xo < ow; ++xo) {
                const int64_t iw = xo * g.stride - g.pad + s;
                if (iw < 0 || iw >= g.w) continue;
                y[((b * g.c_out + co) * oh + yo) * ow + xo] +=
                    x[((b * g.c_in + ci) * g.h + ih) * g.w + iw] * wv;
              }
            }
          }
}

// both gradients in one pass over output elements
template <typename T>
void conv2d_bwd(const T* gy, const T* x, const T* w, T* gx, T* gw, T* gb,
                const Conv2dGeom& g) {
  const int64_t oh = g.out_h(), ow = g.out_w();
  std::fill(gx, gx + g.batch * g.c_in * g.h * g.w, T(0));
  std::fill(gw, gw + g.c_out * g.c_in * g.kh * g.kw, T(0));
  if (gb) std::fill(gb, gb + g.c_out, T(0));
  for (int64_t b = 0; b < g.batch; ++b)
    for (int64_t co = 0; co < g.c_out; ++co)
      for (int64_t yo = 0; yo < oh; ++yo)
        for (int64_t xo = 0; xo < ow; ++xo) {
          const T gv = gy[((b * g.c_out + co) * oh + yo) * ow + xo];
          if (gb) gb[co] += gv;
          for (int64_t ci = 0; ci < g.c_in; ++ci)
            for (int64_t r = 0; r < g.kh; ++r) {
              const int64_t ih = yo * g.stride - g.pad + r;
              if (ih < 0 || ih >= g.h) continue;
              for (int64_t s = 0; s < g.kw; ++s) {
                const int64_t iw = xo * g.stride - g.pad + s;
                if (iw < 0 || iw >= g.w) continue;
                const int64_t xi = ((b * g.c_in + ci) * g.h + ih) * g.w + iw;
                const int64_t wi = ((co * g.c_in + ci) * g.kh + r) * g.kw + s;
                gx[xi] += gv * w[wi];
                gw[wi] += gv * x[xi];
              }
            }
        }
}

// transpose convolution as scatter of each input element
template <typename T>
void convt2d_fwd(const T* x, const T* w, const T* bias, T* y,
                 const ConvT2dGeom& g) {
  const int64_t oh = g.out_h(), ow = g.out_w();
  for (int64_t i = 0; i < g.batch * g.c_out * oh * ow; ++i)
    y[i] = bias ? bias[(i / (oh * ow)) % g.c_out] : T(0);
  for (int64_t b = 0; b < g.batch; ++b)
    for (int64_t ci = 0; ci < g.c_in; ++ci)
      for (int64_t ih = 0; ih < g.h; ++ih)
        for (int64_t iw = 0; iw < g.w; ++iw) {
          const T xv = x[((b * g.c_in + ci) * g.h + ih) * g.w + iw];
          for (int64_t co = 0; co < g.c_out; ++co)
            for (int64_t r = 0; r < g.kh; ++r) {
              const int64_t yo = ih * g.stride - g.pad + r;
              if (yo < 0 || yo >= oh) continue;
              for (int64_t s = 0; s < g.kw; ++s) {
                const int64_t xo = iw * g.stride - g.pad + s;
                if (xo < 0 || xo >= ow) continue;
                y[((b * g.c_out + co) * oh + yo) * ow + xo] +=
                    xv * w[((ci * g.c_out + co) * g.kh + r) * g.kw + s];
              }
            }
        }
}

template <typename T>
void maxpool2d_fwd(const T* x, T* y, int64_t* idx, const Pool2dGeom& g) {
  const int64_t oh = g.out_h(), ow = g.out_w();
  int64_t o = 0;
  for (int64_t b = 0; b < g.batch; ++b)
    for (int64_t c = 0; c < g.c; ++c)
      for (int64_t yo = 0; yo < oh; ++yo)
        for (int64_t xo = 0; xo < ow; ++xo, ++o) {
          int64_t best_at = -1;
          T best{};
          for (int64_t r = 0; r < g.k; ++r)
            for (int64_t s = 0; s < g.k; ++s) {
              const int64_t at = ((b * g.c + c) * g.h + yo * g.stride + r) * g.w +
                                 xo * g.stride + s;
              if (best_at < 0 || x[at] > best) {
                best = x[at];
                best_at = at;
              }
            }
          y[o] = best;
          idx[o] = best_at;
        }
}

template <typename T>
void softmax_c_fwd(const T* x, T* y, int64_t outer, int64_t c, int64_t inner) {
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t s = 0; s < inner; ++s) {
      const T* xp = x + o * c * inner + s;
      T* yp = y + o * c * inner + s;
      T m = xp[0];
      for (int64_t k = 1; k < c; ++k) m = std::max(m, xp[k * inner]);
      T sum = T(0);
      for (int64_t k = 0; k < c; ++k) {
        yp[k * inner] = std::exp(xp[k * inner] - m);
        sum += yp[k * inner];
      }
      for (int64_t k = 0; k < c; ++k) yp[k * inner] /= sum;
    }
}

template <typename T>
void resample3d_linear(const T* x, T* y, const Resample3dGeom& g) {
  for (int64_t c = 0; c < g.c; ++c)
    for (int64_t zo = 0; zo < g.out_d; ++zo)
      for (int64_t yo = 0; yo < g.out_h; ++yo)
        for (int64_t xo = 0; xo < g.out_w; ++xo) {
          const double zu =
              std::clamp(zo * g.scale_d, 0.0, static_cast<double>(g.in_d - 1));
          const double yu =
              std::clamp(yo * g.scale_h, 0.0, static_cast<double>(g.in_h - 1));
          const double xu =
              std::clamp(xo * g.scale_w, 0.0, static_cast<double>(g.in_w - 1));
          const int64_t z0 = static_cast<int64_t>(zu);
          const int64_t y0 = static_cast<int64_t>(yu);
          const int64_t x0 = static_cast<int64_t>(xu);
          const int64_t z1 = std::min(z0 + 1, g.in_d - 1);
          const int64_t y1 = std::min(y0 + 1, g.in_h - 1);
          const int64_t x1 = std::min(x0 + 1, g.in_w - 1);
          const double fz = zu - z0, fy = yu - y0, fx = xu - x0;
          const auto at = [&](int64_t z, int64_t yy, int64_t xx) {
            return static_cast<double>(
                x[((c * g.in_d + z) * g.in_h + yy) * g.in_w + xx]);
          };
          double v = 0;
          v += at(z0, y0, x0) * (1 - fz) * (1 - fy) * (1 - fx);
          v += at(z0, y0, x1) * (1 - fz) * (1 - fy) * fx;
          v += at(z0, y1, x0) * (1 - fz) * fy * (1 - fx);
          v += at(z0, y1, x1) * (1 - fz) * fy * fx;
          v += at(z1, y0, x0) * fz * (1 - fy) * (1 - fx);
          v += at(z1, y0, x1) * fz * (1 - fy) * fx;
          v += at(z1, y1, x0) * fz * fy * (1 - fx);
          v += at(z1, y1, x1) * fz * fy * fx;
          y[((c * g.out_d + zo) * g.out_h + yo) * g.out_w + xo] =
              static_cast<T>(v);
        }
}

}  // namespace voxelpipe::kernels::reference
