// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "voxelpipe/config/registry.hpp"

#include <algorithm>

namespace voxelpipe {

const char* category_name(Category c) {
  switch (c) {
    case Category::Model: return "Model";
    case Category::Loss: return "Loss";
    case Category::Metric: return "Metric";
    case Category::Transform: return "Transform";
    case Category::Augmentation: return "Augmentation";
    case Category::Scheduler: return "Scheduler";
    case Category::OutputWriter: return "OutputWriter";
    case Category::Reduction: return "Reduction";
  }
  return "?";
}

namespace {

const char* shape_name(ValueShape s) {
  switch (s) {
    case ValueShape::Any: return "any";
    case ValueShape::Bool: return "bool";
    case ValueShape::Int: return "int";
    case ValueShape::Float: return "float";
    case ValueShape::Number: return "number";
    case ValueShape::String: return "string";
    case ValueShape::Sequence: return "sequence";
    case ValueShape::Mapping: return "mapping";
  }
  return "?";
}

bool shape_matches(ValueShape s, const ConfigNode& n) {
  switch (s) {
    case ValueShape::Any: return true;
    case ValueShape::Bool: return n.kind() == NodeKind::Bool;
    case ValueShape::Int: return n.kind() == NodeKind::Int;
    case ValueShape::Float:
    case ValueShape::Number:
      return n.kind() == NodeKind::Float || n.kind() == NodeKind::Int;
    case ValueShape::String: return n.kind() == NodeKind::String;
    case ValueShape::Sequence: return n.kind() == NodeKind::Sequence;
    case ValueShape::Mapping: return n.kind() == NodeKind::Mapping;
  }
  return false;
}

size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= b.size(); ++j) {
      const size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

void Registry::add(Category c, std::string name,
                   std::vector<ParamSpec> params, std::any factory) {
  if (frozen_)
    throw Error(ErrKind::Argument,
                "registry is frozen; register components before engine start");
  auto key = std::make_pair(c, name);
  if (entries_.count(key))
    throw Error(ErrKind::DuplicateName,
                std::string(category_name(c)) + " component '" + name +
                    "' registered twice");
  entries_.emplace(std::move(key),
                   ComponentDef{std::move(name), c, std::move(params),
                                std::move(factory)});
}

const ComponentDef* Registry::lookup(Category c,
                                     const std::string& name) const {
  auto it = entries_.find({c, name});
  if (it != entries_.end()) return &it->second;
  // qualified `Namespace:Name` falls back to the plain name
  const auto colon = name.rfind(':');
  if (colon != std::string::npos) {
    it = entries_.find({c, name.substr(colon + 1)});
    if (it != entries_.end()) return &it->second;
  }
  return nullptr;
}

const ComponentDef& Registry::resolve(Category c,
                                      const std::string& name) const {
  if (const ComponentDef* def = lookup(c, name)) return *def;
  std::string msg = std::string("unknown ") + category_name(c) +
                    " component '" + name + "'";
  const std::string hint = nearest(c, name);
  if (!hint.empty()) msg += "; did you mean '" + hint + "'?";
  throw Error(ErrKind::UnknownComponent, msg);
}

std::string Registry::nearest(Category c, const std::string& name) const {
  std::string plain = name;
  const auto colon = name.rfind(':');
  if (colon != std::string::npos) plain = name.substr(colon + 1);
  std::string best;
  size_t best_d = std::string::npos;
  for (const auto& [key, def] : entries_) {
    if (key.first != c) continue;
    const size_t d = edit_distance(plain, key.second);
    if (d < best_d) {
      best_d = d;
      best = key.second;
    }
  }
  return best;
}

std::vector<std::string> Registry::names(Category c) const {
  std::vector<std::string> out;
  for (const auto& [key, def] : entries_)
    if (key.first == c) out.push_back(key.second);
  return out;
}

ConfigNode bind_args(const ComponentDef& def, const ConfigNode& args,
                     const std::string& path) {
  // `Name:` with no body is an empty argument map
  ConfigNode empty = ConfigNode::mapping();
  const ConfigNode& in = args.is_null() ? empty : args;
  if (in.kind() != NodeKind::Mapping)
    throw Error(ErrKind::Type,
                std::string("component arguments must be a mapping, got ") +
                    node_kind_name(in.kind()),
                path);

  for (const auto& [key, value] : in.entries()) {
    (void)value;
    const bool known =
        std::any_of(def.params.begin(), def.params.end(),
                    [&](const ParamSpec& p) { return p.name == key; });
    if (!known)
      throw Error(ErrKind::Argument, "unknown argument for " + def.name,
                  path + "." + key);
  }

  ConfigNode out = ConfigNode::mapping();
  for (const ParamSpec& p : def.params) {
    const ConfigNode* v = in.find(p.name);
    if (!v) {
      if (!p.def)
        throw Error(ErrKind::Argument,
                    "missing required argument of " + def.name,
                    path + "." + p.name);
      out.set(p.name, *p.def);
      continue;
    }
    if (v->is_null()) {
      if (!p.nullable)
        throw Error(ErrKind::Type,
                    std::string("expected ") + shape_name(p.shape) +
                        ", got null",
                    path + "." + p.name);
      out.set(p.name, *v);
      continue;
    }
    if (!shape_matches(p.shape, *v))
      throw Error(ErrKind::Type,
                  std::string("expected ") + shape_name(p.shape) + ", got " +
                      node_kind_name(v->kind()),
                  path + "." + p.name);
    out.set(p.name, *v);
  }
  return out;
}

Registry Registry::with_builtins() {
  using PS = ParamSpec;
  Registry r;

  r.add(Category::Model, "UNet",
        {PS::required("dim", ValueShape::Int),
         PS::required("channels", ValueShape::Sequence),
         PS::required("nb_class", ValueShape::Int),
         PS::required("nb_conv_per_stage", ValueShape::Int),
         PS::required("downsample_mode", ValueShape::String),
         PS::required("upsample_mode", ValueShape::String),
         PS::required("attention", ValueShape::Bool),
         PS::required("block_type", ValueShape::String),
         PS::required("BlockConfig", ValueShape::Mapping)});

  r.add(Category::Loss, "FocalLoss",
        {PS::optional("gamma", ValueShape::Number,
                      ConfigNode::floating(2.0, "2.0")),
         PS::optional("alpha", ValueShape::Sequence, ConfigNode::null(), true),
         PS::optional("reduction", ValueShape::String,
                      ConfigNode::string("mean"))});
  r.add(Category::Loss, "MAE",
        {PS::optional("reduction", ValueShape::String,
                      ConfigNode::string("mean"))});
  r.add(Category::Loss, "DiceLoss",
        {PS::optional("smooth", ValueShape::Number,
                      ConfigNode::floating(1e-6, "1e-06"))});

  r.add(Category::Metric, "Dice",
        {PS::optional("smooth", ValueShape::Number,
                      ConfigNode::floating(1e-6, "1e-06"))});
  r.add(Category::Metric, "MAE",
        {PS::optional("reduction", ValueShape::String,
                      ConfigNode::string("mean"))});

  r.add(Category::Transform, "Clip",
        {PS::required("min_value", ValueShape::Number),
         PS::required("max_value", ValueShape::Number),
         PS::optional("save_clip_min", ValueShape::Bool,
                      ConfigNode::boolean(false)),
         PS::optional("save_clip_max", ValueShape::Bool,
                      ConfigNode::boolean(false))});
  r.add(Category::Transform, "Normalize",
        {PS::optional("lazy", ValueShape::Bool, ConfigNode::boolean(false)),
         PS::optional("channels", ValueShape::Sequence, ConfigNode::null(),
                      true),
         PS::required("min_value", ValueShape::Number),
         PS::required("max_value", ValueShape::Number)});
  r.add(Category::Transform, "ResampleToResolution",
        {PS::required("spacing", ValueShape::Sequence)});
  r.add(Category::Transform, "TensorCast",
        {PS::required("dtype", ValueShape::String)});
  r.add(Category::Transform, "Argmax",
        {PS::required("dim", ValueShape::Int)});

  r.add(Category::Augmentation, "Flip",
        {PS::required("prob", ValueShape::Number),
         PS::required("f_prob", ValueShape::Sequence)});

  r.add(Category::Scheduler, "ReduceLROnPlateau",
        {PS::optional("nb_step", ValueShape::Int, ConfigNode::integer(0, "0")),
         PS::required("factor", ValueShape::Number),
         PS::required("patience", ValueShape::Int),
         PS::required("threshold", ValueShape::Number)});
  r.add(Category::Scheduler, "Constant",
        {PS::optional("nb_step", ValueShape::Int, ConfigNode::integer(0, "0")),
         PS::required("value", ValueShape::Number)});

  r.add(Category::OutputWriter, "OutSameAsGroupDataset",
        {PS::required("before_reduction_transforms", ValueShape::Mapping,
                      true),
         PS::required("after_reduction_transforms", ValueShape::Mapping, true),
         PS::required("final_transforms", ValueShape::Mapping, true),
         PS::required("same_as_group", ValueShape::String),
         PS::required("dataset_filename", ValueShape::String),
         PS::required("group", ValueShape::String),
         PS::required("patch_combine", ValueShape::String, true),
         PS::required("reduction", ValueShape::String),
         PS::required("inverse_transform", ValueShape::Bool)});

  r.add(Category::Reduction, "Mean", {});
  r.add(Category::Reduction, "Median", {});

  return r;
}

}  // namespace voxelpipe
