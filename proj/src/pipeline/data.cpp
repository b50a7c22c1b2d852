// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "voxelpipe/pipeline/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "voxelpipe/common/error.hpp"

namespace voxelpipe {

namespace {

std::vector<TransformStep> parse_transform_map(const ConfigNode& n,
                                               const Registry& reg,
                                               const std::string& path) {
  std::vector<TransformStep> steps;
  if (n.is_null()) return steps;
  for (const auto& [name, args] : n.entries()) {
    const ResolvedComponent rc =
        resolve_component(reg, Category::Transform, name, args, path);
    steps.push_back(make_transform_step(rc.def->name, rc.args));
  }
  return steps;
}

}  // namespace

DataSection parse_data_section(const ConfigNode& ds, const Registry& reg) {
  DataSection out;

  for (const auto& [src, body] : ds.at("groups_src").entries()) {
    for (const auto& [dest, dbody] : body.at("groups_dest").entries()) {
      GroupSpec g;
      g.src = src;
      g.dest = dest;
      g.transforms = parse_transform_map(dbody.at("transforms"), reg,
                                         "groups_src." + src);
      if (const ConfigNode* pt = dbody.find("patch_transforms"))
        g.patch_transforms =
            parse_transform_map(*pt, reg, "groups_src." + src);
      if (const ConfigNode* ii = dbody.find("is_input"))
        g.is_input = ii->as_bool();
      out.groups.push_back(std::move(g));
    }
  }

  if (const ConfigNode* augs = ds.find("augmentations");
      augs && !augs->is_null()) {
    for (const auto& [bname, body] : augs->entries()) {
      AugmentationBlock block;
      block.name = bname;
      for (const auto& [aname, args] :
           body.at("data_augmentations").entries()) {
        const ResolvedComponent rc = resolve_component(
            reg, Category::Augmentation, aname, args, "augmentations");
        block.augmentations.push_back(
            make_augmentation_spec(rc.def->name, rc.args));
      }
      block.nb = body.at("nb").as_int();
      out.augmentations.push_back(std::move(block));
    }
  }

  if (const ConfigNode* patch = ds.find("Patch")) {
    const ConfigNode& ps = patch->at("patch_size");
    for (size_t i = 0; i < 3; ++i)
      out.patch.patch_size[i] = ps.at(i).as_int();
    const ConfigNode& ov = patch->at("overlap");
    if (ov.kind() == NodeKind::Int) {
      out.patch.overlap.fill(ov.as_int());
    } else if (ov.kind() == NodeKind::Sequence) {
      for (size_t i = 0; i < 3; ++i) out.patch.overlap[i] = ov.at(i).as_int();
    }
    if (const ConfigNode& ext = patch->at("extend_slice"); !ext.is_null())
      out.patch.extend_slice = ext.as_int();
    out.patch.pad_value = patch->at("pad_value").as_float();
  }

  out.subset = ds.find("subset") ? *ds.find("subset") : ConfigNode::null();
  if (const ConfigNode* sh = ds.find("shuffle")) out.shuffle = sh->as_bool();
  for (size_t i = 0; i < ds.at("dataset_filenames").size(); ++i)
    out.sources.push_back(
        parse_dataset_filename(ds.at("dataset_filenames").at(i).as_string()));
  if (const ConfigNode* uc = ds.find("use_cache"))
    out.use_cache = uc->as_bool();
  if (const ConfigNode* bs = ds.find("batch_size"))
    out.batch_size = bs->as_int();
  out.validation =
      ds.find("validation") ? *ds.find("validation") : ConfigNode::null();
  if (const ConfigNode* ia = ds.find("inline_augmentations"))
    out.inline_augmentations = ia->as_bool();
  return out;
}

std::vector<const AugmentationBlock*> copy_blocks(
    const std::vector<AugmentationBlock>& blocks) {
  std::vector<const AugmentationBlock*> out;
  for (const AugmentationBlock& b : blocks)
    for (int64_t k = 0; k < b.nb; ++k) out.push_back(&b);
  return out;
}

AugmentationRecord draw_block(const AugmentationBlock& block, Rng& rng) {
  AugmentationRecord out;
  for (const AugmentationSpec& spec : block.augmentations) {
    const AugmentationRecord r = draw_augmentation(spec, rng);
    for (size_t i = 0; i < 3; ++i)
      out.flipped[i] = out.flipped[i] != r.flipped[i];
  }
  return out;
}

SplitResult split_validation(const std::vector<Case>& cases,
                             const ConfigNode& validation) {
  SplitResult out;
  if (validation.is_null()) {
    out.train = cases;
    return out;
  }
  if (validation.kind() == NodeKind::Float) {
    const double r = validation.as_float();
    const size_t n = cases.size();
    const size_t k = static_cast<size_t>(
        std::min<long long>(std::llround(r * static_cast<double>(n)),
                            static_cast<long long>(n)));
    out.train.assign(cases.begin(), cases.end() - static_cast<long>(k));
    out.validation.assign(cases.end() - static_cast<long>(k), cases.end());
    return out;
  }
  const std::string file = validation.as_string();
  std::ifstream in(file);
  if (!in)
    throw Error(ErrKind::Io, "cannot open validation case list", file);
  std::set<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.pop_back();
    if (!line.empty()) names.insert(line);
  }
  std::set<std::string> seen;
  for (const Case& c : cases) {
    if (names.count(c.name)) {
      out.validation.push_back(c);
      seen.insert(c.name);
    } else {
      out.train.push_back(c);
    }
  }
  for (const std::string& n : names)
    if (!seen.count(n))
      throw Error(ErrKind::CaseMismatch,
                  "validation case '" + n + "' is not in the dataset", file);
  return out;
}

PreparedCase prepare_case(const Case& c, const DataSection& ds,
                          VolumeCache& cache) {
  PreparedCase out;
  out.name = c.name;
  std::string shape_owner;
  std::array<int64_t, 3> shape{0, 0, 0};
  for (const GroupSpec& g : ds.groups) {
    const auto it = c.groups.find(g.src);
    if (it == c.groups.end())
      throw Error(ErrKind::MissingGroup,
                  "case '" + c.name + "' has no group '" + g.src + "'");
    const auto vol = cache.get(it->second);
    TransformState st;
    Volume v = apply_transforms(g.transforms, *vol, st);
    const std::array<int64_t, 3> vs{v.depth(), v.height(), v.width()};
    if (shape_owner.empty()) {
      shape_owner = g.dest;
      shape = vs;
    } else if (vs != shape) {
      throw Error(ErrKind::Shape,
                  "case '" + c.name + "': group '" + g.dest +
                      "' shape differs from group '" + shape_owner + "'");
    }
    out.states.emplace(g.dest, std::move(st));
    out.groups.emplace(g.dest, std::move(v));
  }
  out.grid = compute_grid(shape, ds.patch.patch_size, ds.patch.overlap);
  return out;
}

Tensor group_patch(const GroupSpec& g, const PatchParams& p,
                   const Tensor& array, const PatchGrid& grid,
                   size_t position) {
  const int64_t extend = g.is_input ? p.extend_slice : 0;
  const double pad = g.is_input ? p.pad_value : 0.0;
  Tensor t = extract_patch(array, grid, position, extend, pad);
  if (!g.patch_transforms.empty()) {
    Volume v;
    v.array = t;
    TransformState st;
    t = apply_transforms(g.patch_transforms, v, st).array;
  }
  if (t.dim(1) != 1)
    throw Error(ErrKind::Unsupported,
                "the 2D engine needs patch_size [1, H, W]; group '" + g.dest +
                    "' produced a patch of depth " + std::to_string(t.dim(1)));
  return t.reshaped({t.dim(0), t.dim(2), t.dim(3)});
}

Tensor concat_channels_f32(const std::vector<Tensor>& parts) {
  if (parts.empty())
    throw Error(ErrKind::Argument, "concat_channels_f32: no parts");
  const int64_t h = parts[0].dim(1), w = parts[0].dim(2);
  int64_t channels = 0;
  for (const Tensor& t : parts) {
    if (t.rank() != 3 || t.dim(1) != h || t.dim(2) != w)
      throw Error(ErrKind::Shape, "concat_channels_f32: mismatched parts");
    channels += t.dim(0);
  }
  Tensor out = Tensor::zeros({channels, h, w}, Dtype::F32);
  float* dst = out.data<float>().data();
  for (const Tensor& t : parts) {
    const Tensor f = t.dtype() == Dtype::F32 ? t : t.astype(Dtype::F32);
    std::memcpy(dst, f.raw(), f.byte_size());
    dst += f.numel();
  }
  return out;
}

Tensor stack_batch(const std::vector<Tensor>& samples, Dtype dt) {
  if (samples.empty())
    throw Error(ErrKind::Argument, "stack_batch: no samples");
  const std::vector<int64_t>& s = samples[0].shape();
  std::vector<int64_t> shape{static_cast<int64_t>(samples.size())};
  shape.insert(shape.end(), s.begin(), s.end());
  Tensor out = Tensor::zeros(shape, dt);
  for (size_t b = 0; b < samples.size(); ++b) {
    if (samples[b].shape() != s)
      throw Error(ErrKind::Shape, "stack_batch: mismatched sample shapes");
    const Tensor t =
        samples[b].dtype() == dt ? samples[b] : samples[b].astype(dt);
    std::memcpy(static_cast<char*>(out.raw()) +
                    static_cast<size_t>(b) * t.byte_size(),
                t.raw(), t.byte_size());
  }
  return out;
}

}  // namespace voxelpipe
