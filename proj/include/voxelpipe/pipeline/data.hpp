// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0
//
// Dataset-section plumbing shared by training and prediction: the validated
// mapping parsed into typed form, per-case preprocessing with recorded
// transform states, validation splits, and assembly of 2D patch batches.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "voxelpipe/config/node.hpp"
#include "voxelpipe/config/registry.hpp"
#include "voxelpipe/config/schema.hpp"
#include "voxelpipe/dataio/dataset.hpp"
#include "voxelpipe/patch/patch.hpp"
#include "voxelpipe/transform/transform.hpp"

namespace voxelpipe {

struct GroupSpec {
  std::string src;   // source group, names the file on disk
  std::string dest;  // internal group, keys targets and model outputs
  std::vector<TransformStep> transforms;        // volume level, state kept
  std::vector<TransformStep> patch_transforms;  // patch level, stateless
  bool is_input = true;
};

struct AugmentationBlock {
  std::string name;
  std::vector<AugmentationSpec> augmentations;  // applied as one composite
  int64_t nb = 1;                               // copies drawn per sample
};

struct PatchParams {
  std::array<int64_t, 3> patch_size{1, 1, 1};
  std::array<int64_t, 3> overlap{0, 0, 0};
  int64_t extend_slice = 0;
  double pad_value = 0.0;
};

struct DataSection {
  std::vector<GroupSpec> groups;  // declaration order
  std::vector<AugmentationBlock> augmentations;
  PatchParams patch;
  ConfigNode subset;
  bool shuffle = false;
  std::vector<DatasetFilenameSpec> sources;
  bool use_cache = false;             // training only
  int64_t batch_size = 1;
  ConfigNode validation;              // training only
  bool inline_augmentations = false;  // training only
};

// accepts the validated Dataset mapping of either a training or a
// prediction configuration; keys absent from the prediction schema keep
// their defaults
DataSection parse_data_section(const ConfigNode& ds, const Registry& reg);

// flattened copy list: each block repeated nb times, block order kept;
// empty means one identity copy per sample
std::vector<const AugmentationBlock*> copy_blocks(
    const std::vector<AugmentationBlock>& blocks);

// draws every augmentation of the block and composes the flips
AugmentationRecord draw_block(const AugmentationBlock& block, Rng& rng);

// validation key: null keeps every case in train, a ratio holds out the
// last llround(r * n) cases, a string names a file with one case per line
// (unknown names raise CaseMismatch)
struct SplitResult {
  std::vector<Case> train;
  std::vector<Case> validation;
};
SplitResult split_validation(const std::vector<Case>& cases,
                             const ConfigNode& validation);

// one case after preprocessing; every group must share the spatial shape
// that defines the patch grid
struct PreparedCase {
  std::string name;
  std::map<std::string, Volume> groups;          // dest -> volume
  std::map<std::string, TransformState> states;  // dest -> recorded steps
  PatchGrid grid;
};

PreparedCase prepare_case(const Case& c, const DataSection& ds,
                          VolumeCache& cache);

// Patch of one group at a grid position, squeezed to [C, pH, pW]. Inputs
// get the extend_slice slab and pad_value fill, targets the center slice
// and zero fill; the group's patch transforms run on the result. Raises
// Unsupported when the patch keeps a depth axis (the 2D engine needs
// patch_size [1, H, W]).
Tensor group_patch(const GroupSpec& g, const PatchParams& p,
                   const Tensor& array, const PatchGrid& grid,
                   size_t position);

// concatenates [C_i, H, W] pieces along channels into one f32 tensor
Tensor concat_channels_f32(const std::vector<Tensor>& parts);

// stacks same-shape [C, H, W] samples into [B, C, H, W] of the given dtype
Tensor stack_batch(const std::vector<Tensor>& samples, Dtype dt);

}  // namespace voxelpipe
