// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0
//
// Preprocessing transforms with recorded inversion state, and flip
// augmentations with exact inverses for test-time augmentation. Transforms
// are pure given (volume, state); state is per case and never shared.

#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "voxelpipe/common/rng.hpp"
#include "voxelpipe/config/node.hpp"
#include "voxelpipe/dataio/volume.hpp"

namespace voxelpipe {

enum class TransformKind { Clip, Normalize, ResampleToResolution, TensorCast, Argmax };

const char* transform_kind_name(TransformKind k);

struct TransformStep {
  TransformKind kind = TransformKind::Clip;
  // Clip bounds, Normalize target range
  double min_value = 0.0;
  double max_value = 0.0;
  // Clip: record bounds in state without changing forward values
  bool save_clip_min = false;
  bool save_clip_max = false;
  // Normalize: lazy takes the source range from the sample itself;
  // otherwise a preceding Clip provides it (falling back to the sample)
  bool lazy = false;
  std::vector<int64_t> channels;  // Normalize subset; empty = all jointly
  std::array<double, 3> spacing{1.0, 1.0, 1.0};  // Resample target (D,H,W) mm
  Dtype dtype = Dtype::F32;                      // TensorCast target
  int64_t dim = 0;                               // Argmax axis
};

// builds a step from a component name and its completed argument mapping
TransformStep make_transform_step(const std::string& name,
                                  const ConfigNode& args);

// one record per applied step, in application order
struct StepRecord {
  TransformKind kind = TransformKind::Clip;
  double src_lo = 0.0, src_hi = 0.0;  // Normalize source range
  double dst_lo = 0.0, dst_hi = 0.0;  // Normalize target range
  std::vector<int64_t> channels;
  std::vector<int64_t> orig_shape;  // Resample: C,D,H,W before the step
  std::array<double, 3> orig_spacing{1.0, 1.0, 1.0};
  double clip_min = 0.0, clip_max = 0.0;
  bool save_clip_min = false, save_clip_max = false;
  Dtype orig_dtype = Dtype::F32;  // TensorCast: dtype before the step
};

struct TransformState {
  std::vector<StepRecord> records;
};

Volume apply_transform(const TransformStep& step, const Volume& v,
                       TransformState& state);
Volume apply_transforms(const std::vector<TransformStep>& steps,
                        const Volume& v, TransformState& state);

// inverts recorded steps in reverse order; Clip and Argmax are skipped as
// non-invertible; label (integer) volumes resample with nearest-neighbor
Volume invert_transforms(const TransformState& state, const Volume& v);

// per-case states of one group's preprocessing; lookups of unseen cases
// raise MissingState
struct CaseTransformStates {
  std::map<std::string, TransformState> by_case;
  const TransformState& require(const std::string& case_name) const;
};

// flip augmentation: triggers with probability prob, then each spatial axis
// flips independently with probability f_prob[axis] ((D,H,W) order)
struct AugmentationSpec {
  double prob = 1.0;
  std::array<double, 3> f_prob{0.0, 0.0, 0.0};
};

AugmentationSpec make_augmentation_spec(const std::string& name,
                                        const ConfigNode& args);

struct AugmentationRecord {
  std::array<bool, 3> flipped{false, false, false};
  bool identity() const { return !flipped[0] && !flipped[1] && !flipped[2]; }
};

// consumes exactly four uniform draws so the stream position does not
// depend on the outcome
AugmentationRecord draw_augmentation(const AugmentationSpec& spec, Rng& rng);

// reverses indices along flipped axes; an involution, so it is its own
// inverse and metadata passes through unchanged
Volume apply_augmentation(const AugmentationRecord& rec, const Volume& v);
Tensor flip_tensor(const Tensor& t, const std::array<bool, 3>& axes);

}  // namespace voxelpipe
