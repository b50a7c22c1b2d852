// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "voxelpipe/transform/transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <utility>

#include "voxelpipe/common/error.hpp"

namespace voxelpipe {

const char* transform_kind_name(TransformKind k) {
  switch (k) {
    case TransformKind::Clip: return "Clip";
    case TransformKind::Normalize: return "Normalize";
    case TransformKind::ResampleToResolution: return "ResampleToResolution";
    case TransformKind::TensorCast: return "TensorCast";
    case TransformKind::Argmax: return "Argmax";
  }
  return "?";
}

TransformStep make_transform_step(const std::string& name,
                                  const ConfigNode& args) {
  TransformStep s;
  if (name == "Clip") {
    s.kind = TransformKind::Clip;
    s.min_value = args.at("min_value").as_float();
    s.max_value = args.at("max_value").as_float();
    s.save_clip_min = args.at("save_clip_min").as_bool();
    s.save_clip_max = args.at("save_clip_max").as_bool();
  } else if (name == "Normalize") {
    s.kind = TransformKind::Normalize;
    s.lazy = args.at("lazy").as_bool();
    s.min_value = args.at("min_value").as_float();
    s.max_value = args.at("max_value").as_float();
    const ConfigNode& ch = args.at("channels");
    if (!ch.is_null())
      for (size_t i = 0; i < ch.size(); ++i)
        s.channels.push_back(ch.at(i).as_int());
  } else if (name == "ResampleToResolution") {
    s.kind = TransformKind::ResampleToResolution;
    const ConfigNode& sp = args.at("spacing");
    for (size_t i = 0; i < 3; ++i) s.spacing[i] = sp.at(i).as_float();
  } else if (name == "TensorCast") {
    s.kind = TransformKind::TensorCast;
    s.dtype = dtype_from_name(args.at("dtype").as_string());
  } else if (name == "Argmax") {
    s.kind = TransformKind::Argmax;
    s.dim = args.at("dim").as_int();
  } else {
    throw Error(ErrKind::UnknownComponent,
                "'" + name + "' is not a transform");
  }
  return s;
}

namespace {

// min/max over the selected channels (empty = all), as doubles
std::pair<double, double> channel_range(const Tensor& t,
                                        const std::vector<int64_t>& channels) {
  const int64_t c = t.dim(0);
  const int64_t per = t.numel() / c;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  auto scan = [&](int64_t ch) {
    for (int64_t i = ch * per; i < (ch + 1) * per; ++i) {
      const double v = t.at(i);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  };
  if (channels.empty())
    for (int64_t ch = 0; ch < c; ++ch) scan(ch);
  else
    for (int64_t ch : channels) scan(ch);
  return {lo, hi};
}

void check_channels(const Tensor& t, const std::vector<int64_t>& channels) {
  for (int64_t ch : channels)
    if (ch < 0 || ch >= t.dim(0))
      throw Error(ErrKind::InvalidDim,
                  "Normalize channel " + std::to_string(ch) +
                      " out of range for " + std::to_string(t.dim(0)) +
                      " channels");
}

// maps [src_lo, src_hi] onto [dst_lo, dst_hi] on the selected channels; the
// rest copy. Dividing by the source extent per element keeps the endpoints
// exact: x == src_hi yields a ratio of exactly 1.
Tensor affine_map(const Tensor& t, const std::vector<int64_t>& channels,
                  double src_lo, double src_hi, double dst_lo, double dst_hi,
                  Dtype out_dtype) {
  const int64_t c = t.dim(0);
  const int64_t per = t.numel() / c;
  const double src_extent = src_hi - src_lo;
  const double dst_extent = dst_hi - dst_lo;
  Tensor out = Tensor::zeros(t.shape(), out_dtype);
  std::vector<bool> selected(size_t(c), channels.empty());
  for (int64_t ch : channels) selected[size_t(ch)] = true;
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t i = ch * per; i < (ch + 1) * per; ++i)
      out.set(i, selected[size_t(ch)]
                     ? dst_lo + (t.at(i) - src_lo) / src_extent * dst_extent
                     : t.at(i));
  return out;
}

bool is_integer_dtype(Dtype dt) { return dt == Dtype::U8 || dt == Dtype::I64; }

// resamples to the given (D,H,W) size and spacing; output index i samples
// the source at continuous index i * new_spacing / old_spacing with edge
// clamping; integer volumes use nearest-neighbor so label sets are preserved
Volume resample_volume(const Volume& v, const std::array<double, 3>& spacing,
                       const std::array<int64_t, 3>& dhw) {
  const Tensor& src = v.array;
  const int64_t c = src.dim(0);
  const int64_t sd = src.dim(1), sh = src.dim(2), sw = src.dim(3);
  const int64_t od = dhw[0], oh = dhw[1], ow = dhw[2];
  const double rd = spacing[0] / v.spacing[0];
  const double rh = spacing[1] / v.spacing[1];
  const double rw = spacing[2] / v.spacing[2];
  const bool nearest = is_integer_dtype(src.dtype());

  Volume out = v;
  out.array = Tensor::zeros({c, od, oh, ow}, src.dtype());
  out.spacing = spacing;

  auto src_at = [&](int64_t ch, int64_t z, int64_t y, int64_t x) {
    return src.at(((ch * sd + z) * sh + y) * sw + x);
  };
  int64_t flat = 0;
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t z = 0; z < od; ++z)
      for (int64_t y = 0; y < oh; ++y)
        for (int64_t x = 0; x < ow; ++x, ++flat) {
          const double fz = std::clamp(double(z) * rd, 0.0, double(sd - 1));
          const double fy = std::clamp(double(y) * rh, 0.0, double(sh - 1));
          const double fx = std::clamp(double(x) * rw, 0.0, double(sw - 1));
          if (nearest) {
            out.array.set(flat, src_at(ch, int64_t(std::llround(fz)),
                                       int64_t(std::llround(fy)),
                                       int64_t(std::llround(fx))));
            continue;
          }
          const int64_t z0 = int64_t(fz), y0 = int64_t(fy), x0 = int64_t(fx);
          const int64_t z1 = std::min(z0 + 1, sd - 1);
          const int64_t y1 = std::min(y0 + 1, sh - 1);
          const int64_t x1 = std::min(x0 + 1, sw - 1);
          const double wz = fz - double(z0), wy = fy - double(y0),
                       wx = fx - double(x0);
          const double v00 = src_at(ch, z0, y0, x0) * (1 - wx) +
                             src_at(ch, z0, y0, x1) * wx;
          const double v01 = src_at(ch, z0, y1, x0) * (1 - wx) +
                             src_at(ch, z0, y1, x1) * wx;
          const double v10 = src_at(ch, z1, y0, x0) * (1 - wx) +
                             src_at(ch, z1, y0, x1) * wx;
          const double v11 = src_at(ch, z1, y1, x0) * (1 - wx) +
                             src_at(ch, z1, y1, x1) * wx;
          const double v0 = v00 * (1 - wy) + v01 * wy;
          const double v1 = v10 * (1 - wy) + v11 * wy;
          out.array.set(flat, v0 * (1 - wz) + v1 * wz);
        }
  return out;
}

}  // namespace

Volume apply_transform(const TransformStep& step, const Volume& v,
                       TransformState& state) {
  StepRecord rec;
  rec.kind = step.kind;
  Volume out = v;

  switch (step.kind) {
    case TransformKind::Clip: {
      out.array = v.array.clone();
      for (int64_t i = 0; i < out.array.numel(); ++i)
        out.array.set(i,
                      std::clamp(v.array.at(i), step.min_value,
                                 step.max_value));
      rec.clip_min = step.min_value;
      rec.clip_max = step.max_value;
      rec.save_clip_min = step.save_clip_min;
      rec.save_clip_max = step.save_clip_max;
      break;
    }
    case TransformKind::Normalize: {
      check_channels(v.array, step.channels);
      double lo = 0.0, hi = 0.0;
      bool have = false;
      if (!step.lazy) {
        // a preceding Clip fixes the source range
        for (auto it = state.records.rbegin(); it != state.records.rend();
             ++it)
          if (it->kind == TransformKind::Clip) {
            lo = it->clip_min;
            hi = it->clip_max;
            have = true;
            break;
          }
      }
      if (!have) std::tie(lo, hi) = channel_range(v.array, step.channels);
      if (lo == hi)
        throw Error(ErrKind::DegenerateRange,
                    "Normalize source range is degenerate (" +
                        std::to_string(lo) + ")");
      const Dtype out_dtype =
          v.array.dtype() == Dtype::F64 ? Dtype::F64 : Dtype::F32;
      out.array = affine_map(v.array, step.channels, lo, hi, step.min_value,
                             step.max_value, out_dtype);
      rec.src_lo = lo;
      rec.src_hi = hi;
      rec.dst_lo = step.min_value;
      rec.dst_hi = step.max_value;
      rec.channels = step.channels;
      break;
    }
    case TransformKind::ResampleToResolution: {
      rec.orig_shape = v.array.shape();
      rec.orig_spacing = v.spacing;
      std::array<int64_t, 3> dhw;
      for (size_t a = 0; a < 3; ++a) {
        dhw[a] = std::max<int64_t>(
            1, std::llround(double(v.array.dim(a + 1)) * v.spacing[a] /
                            step.spacing[a]));
      }
      out = resample_volume(v, step.spacing, dhw);
      break;
    }
    case TransformKind::TensorCast: {
      rec.orig_dtype = v.array.dtype();
      out.array = v.array.astype(step.dtype);
      break;
    }
    case TransformKind::Argmax: {
      if (step.dim != 0)
        throw Error(ErrKind::InvalidDim,
                    "Argmax reduces the class dim, dim must be 0");
      const int64_t c = v.array.dim(0);
      const int64_t per = v.array.numel() / c;
      out.array =
          Tensor::zeros({1, v.array.dim(1), v.array.dim(2), v.array.dim(3)},
                        Dtype::I64);
      auto dst = out.array.data<int64_t>();
      for (int64_t i = 0; i < per; ++i) {
        int64_t best = 0;
        double best_v = v.array.at(i);
        for (int64_t ch = 1; ch < c; ++ch) {
          const double x = v.array.at(ch * per + i);
          if (x > best_v) {
            best_v = x;
            best = ch;
          }
        }
        dst[size_t(i)] = best;
      }
      break;
    }
  }

  state.records.push_back(std::move(rec));
  return out;
}

Volume apply_transforms(const std::vector<TransformStep>& steps,
                        const Volume& v, TransformState& state) {
  Volume cur = v;
  for (const TransformStep& s : steps) cur = apply_transform(s, cur, state);
  return cur;
}

Volume invert_transforms(const TransformState& state, const Volume& v) {
  Volume cur = v;
  for (auto it = state.records.rbegin(); it != state.records.rend(); ++it) {
    const StepRecord& rec = *it;
    switch (rec.kind) {
      case TransformKind::Clip:
      case TransformKind::Argmax:
        break;  // non-invertible, skipped
      case TransformKind::Normalize: {
        check_channels(cur.array, rec.channels);
        cur.array = affine_map(cur.array, rec.channels, rec.dst_lo,
                               rec.dst_hi, rec.src_lo, rec.src_hi,
                               cur.array.dtype());
        break;
      }
      case TransformKind::ResampleToResolution: {
        // back to the recorded spatial size; channel count follows the
        // volume being inverted (predictions may differ from the input)
        cur = resample_volume(
            cur, rec.orig_spacing,
            {rec.orig_shape[1], rec.orig_shape[2], rec.orig_shape[3]});
        break;
      }
      case TransformKind::TensorCast: {
        cur.array = cur.array.astype(rec.orig_dtype);
        break;
      }
    }
  }
  return cur;
}

const TransformState& CaseTransformStates::require(
    const std::string& case_name) const {
  auto it = by_case.find(case_name);
  if (it == by_case.end())
    throw Error(ErrKind::MissingState,
                "no transform state recorded for case '" + case_name + "'");
  return it->second;
}

AugmentationSpec make_augmentation_spec(const std::string& name,
                                        const ConfigNode& args) {
  if (name != "Flip")
    throw Error(ErrKind::UnknownComponent,
                "'" + name + "' is not an augmentation");
  AugmentationSpec spec;
  spec.prob = args.at("prob").as_float();
  const ConfigNode& fp = args.at("f_prob");
  for (size_t a = 0; a < 3; ++a) spec.f_prob[a] = fp.at(a).as_float();
  return spec;
}

AugmentationRecord draw_augmentation(const AugmentationSpec& spec, Rng& rng) {
  AugmentationRecord rec;
  const double trigger = rng.uniform();
  const double draws[3] = {rng.uniform(), rng.uniform(), rng.uniform()};
  if (trigger < spec.prob)
    for (size_t a = 0; a < 3; ++a) rec.flipped[a] = draws[a] < spec.f_prob[a];
  return rec;
}

Tensor flip_tensor(const Tensor& t, const std::array<bool, 3>& axes) {
  if (t.rank() != 4)
    throw Error(ErrKind::Shape, "flip expects a C x D x H x W tensor");
  if (!axes[0] && !axes[1] && !axes[2]) return t;
  const int64_t c = t.dim(0), d = t.dim(1), h = t.dim(2), w = t.dim(3);
  Tensor out = Tensor::zeros(t.shape(), t.dtype());
  int64_t flat = 0;
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t z = 0; z < d; ++z)
      for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x, ++flat) {
          const int64_t sz = axes[0] ? d - 1 - z : z;
          const int64_t sy = axes[1] ? h - 1 - y : y;
          const int64_t sx = axes[2] ? w - 1 - x : x;
          out.set(flat, t.at(((ch * d + sz) * h + sy) * w + sx));
        }
  return out;
}

Volume apply_augmentation(const AugmentationRecord& rec, const Volume& v) {
  Volume out = v;
  out.array = flip_tensor(v.array, rec.flipped);
  return out;
}

}  // namespace voxelpipe
