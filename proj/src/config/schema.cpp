// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "voxelpipe/config/schema.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "voxelpipe/common/error.hpp"
#include "voxelpipe/config/yaml_io.hpp"

namespace voxelpipe {

const char* config_kind_name(ConfigKind k) {
  switch (k) {
    case ConfigKind::Train: return "Train";
    case ConfigKind::Prediction: return "Prediction";
    case ConfigKind::Evaluation: return "Evaluation";
  }
  return "?";
}

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

[[noreturn]] void schema_error(const std::string& path,
                               const std::string& what) {
  throw Error(ErrKind::Schema, what, path.empty() ? "(root)" : path);
}

[[noreturn]] void type_error(const std::string& path, const std::string& what) {
  throw Error(ErrKind::Type, what, path.empty() ? "(root)" : path);
}

const ConfigNode& need_map(const ConfigNode& n, const std::string& path) {
  if (n.kind() != NodeKind::Mapping)
    schema_error(path, std::string("expected a mapping, got ") +
                           node_kind_name(n.kind()));
  return n;
}

// nullable maps express absence as None; an empty body is a likely mistake
const ConfigNode& need_nonempty_map(const ConfigNode& n,
                                    const std::string& path) {
  need_map(n, path);
  if (n.size() == 0)
    schema_error(path, "mapping must not be empty (use None to disable)");
  return n;
}

const ConfigNode& need(const ConfigNode& map, const std::string& path,
                       const std::string& key) {
  need_map(map, path);
  const ConfigNode* v = map.find(key);
  if (!v) schema_error(join(path, key), "required key absent");
  return *v;
}

// every listed key must be present and no other keys may appear
void need_exact_keys(const ConfigNode& map, const std::string& path,
                     std::initializer_list<const char*> keys) {
  need_map(map, path);
  for (const char* k : keys)
    if (!map.find(k)) schema_error(join(path, k), "required key absent");
  for (const auto& [key, value] : map.entries()) {
    (void)value;
    const bool known = std::any_of(keys.begin(), keys.end(),
                                   [&](const char* k) { return key == k; });
    if (!known) schema_error(join(path, key), "unknown key");
  }
}

bool as_bool(const ConfigNode& n, const std::string& path) {
  if (n.kind() != NodeKind::Bool)
    type_error(path, std::string("expected bool, got ") +
                         node_kind_name(n.kind()));
  return n.as_bool();
}

int64_t as_int(const ConfigNode& n, const std::string& path) {
  if (n.kind() != NodeKind::Int)
    type_error(path,
               std::string("expected int, got ") + node_kind_name(n.kind()));
  return n.as_int();
}

double as_number(const ConfigNode& n, const std::string& path) {
  if (n.kind() == NodeKind::Int) return static_cast<double>(n.as_int());
  if (n.kind() == NodeKind::Float) return n.as_float();
  type_error(path,
             std::string("expected number, got ") + node_kind_name(n.kind()));
}

const std::string& as_string(const ConfigNode& n, const std::string& path) {
  if (n.kind() != NodeKind::String)
    type_error(path,
               std::string("expected string, got ") + node_kind_name(n.kind()));
  return n.as_string();
}

std::string quoted_list(std::initializer_list<const char*> allowed) {
  std::string out;
  for (const char* a : allowed) {
    if (!out.empty()) out += ", ";
    out += "'";
    out += a;
    out += "'";
  }
  return out;
}

const std::string& need_value_in(const ConfigNode& n, const std::string& path,
                                 std::initializer_list<const char*> allowed) {
  const std::string& s = as_string(n, path);
  for (const char* a : allowed)
    if (s == a) return s;
  schema_error(path, "expected one of " + quoted_list(allowed) + ", got '" +
                         s + "'");
}

[[noreturn]] void unsupported(const std::string& path,
                              const std::string& what) {
  throw Error(ErrKind::Unsupported, what, path);
}

void need_null(const ConfigNode& n, const std::string& path,
               const std::string& feature) {
  if (!n.is_null())
    unsupported(path, feature + " is not supported; set it to None");
}

// ---------------------------------------------------------------------------
// component binding with schema-level error kinds and value checks

void check_transform_semantics(const std::string& name, const ConfigNode& a,
                               const std::string& path);

void check_component_semantics(Category cat, const std::string& name,
                               const ConfigNode& a, const std::string& path) {
  if (cat == Category::Transform) {
    check_transform_semantics(name, a, path);
    return;
  }
  if (cat == Category::Loss || cat == Category::Metric) {
    if (name == "FocalLoss") {
      if (as_number(a.at("gamma"), join(path, "gamma")) < 0.0)
        schema_error(join(path, "gamma"), "must be >= 0");
      const ConfigNode& alpha = a.at("alpha");
      if (!alpha.is_null()) {
        if (alpha.size() == 0)
          schema_error(join(path, "alpha"), "must not be empty");
        for (size_t i = 0; i < alpha.size(); ++i)
          if (as_number(alpha.at(i),
                        join(path, "alpha[" + std::to_string(i) + "]")) < 0.0)
            schema_error(join(path, "alpha"), "weights must be >= 0");
      }
      need_value_in(a.at("reduction"), join(path, "reduction"), {"mean"});
    } else if (name == "DiceLoss" || name == "Dice") {
      if (as_number(a.at("smooth"), join(path, "smooth")) <= 0.0)
        schema_error(join(path, "smooth"), "must be > 0");
    } else if (name == "MAE") {
      need_value_in(a.at("reduction"), join(path, "reduction"), {"mean"});
    }
    return;
  }
  if (cat == Category::Augmentation && name == "Flip") {
    const double prob = as_number(a.at("prob"), join(path, "prob"));
    if (prob < 0.0 || prob > 1.0)
      schema_error(join(path, "prob"), "must be in [0, 1]");
    const ConfigNode& fp = a.at("f_prob");
    if (fp.size() != 3)
      schema_error(join(path, "f_prob"),
                   "expected one probability per spatial axis (3 values)");
    for (size_t i = 0; i < 3; ++i) {
      const double p = as_number(fp.at(i), join(path, "f_prob"));
      if (p < 0.0 || p > 1.0)
        schema_error(join(path, "f_prob"), "values must be in [0, 1]");
    }
    return;
  }
  if (cat == Category::Scheduler) {
    if (as_int(a.at("nb_step"), join(path, "nb_step")) < 0)
      schema_error(join(path, "nb_step"), "must be >= 0");
    if (name == "ReduceLROnPlateau") {
      const double factor = as_number(a.at("factor"), join(path, "factor"));
      if (factor <= 0.0 || factor >= 1.0)
        schema_error(join(path, "factor"), "must be in (0, 1)");
      if (as_int(a.at("patience"), join(path, "patience")) < 0)
        schema_error(join(path, "patience"), "must be >= 0");
      if (as_number(a.at("threshold"), join(path, "threshold")) < 0.0)
        schema_error(join(path, "threshold"), "must be >= 0");
    } else if (name == "Constant") {
      as_number(a.at("value"), join(path, "value"));
    }
    return;
  }
}

// resolve + bind for schema validation: missing/unknown argument errors
// surface as SchemaError so parse_config reports one uniform error kind
ConfigNode schema_bind(const Registry& reg, Category cat,
                       const std::string& name, const ConfigNode& args,
                       const std::string& path) {
  const ComponentDef& def = reg.resolve(cat, name);
  ConfigNode bound;
  try {
    bound = bind_args(def, args, path);
  } catch (const Error& e) {
    if (e.kind() == ErrKind::Argument)
      throw Error(ErrKind::Schema, e.message(), e.path());
    throw;
  }
  check_component_semantics(cat, def.name, bound, path);
  return bound;
}

void check_transform_semantics(const std::string& name, const ConfigNode& a,
                               const std::string& path) {
  if (name == "Clip" || name == "Normalize") {
    const double lo = as_number(a.at("min_value"), join(path, "min_value"));
    const double hi = as_number(a.at("max_value"), join(path, "max_value"));
    if (!(lo < hi))
      schema_error(join(path, "max_value"),
                   "max_value must be greater than min_value");
    if (name == "Normalize") {
      const ConfigNode& ch = a.at("channels");
      if (!ch.is_null())
        for (size_t i = 0; i < ch.size(); ++i)
          if (as_int(ch.at(i), join(path, "channels")) < 0)
            schema_error(join(path, "channels"), "indices must be >= 0");
    }
  } else if (name == "ResampleToResolution") {
    const ConfigNode& sp = a.at("spacing");
    if (sp.size() != 3)
      schema_error(join(path, "spacing"), "expected 3 values (one per axis)");
    for (size_t i = 0; i < 3; ++i)
      if (as_number(sp.at(i), join(path, "spacing")) <= 0.0)
        schema_error(join(path, "spacing"), "values must be > 0");
  } else if (name == "TensorCast") {
    need_value_in(a.at("dtype"), join(path, "dtype"),
                  {"uint8", "int64", "float32", "float64"});
  } else if (name == "Argmax") {
    if (as_int(a.at("dim"), join(path, "dim")) != 0)
      unsupported(join(path, "dim"), "argmax is only supported over dim 0");
  }
}

// transforms / patch_transforms / *_reduction_transforms: None or a
// non-empty ordered map of transform name -> args
void validate_transform_map(const ConfigNode& n, const std::string& path,
                            const Registry& reg) {
  if (n.is_null()) return;
  need_nonempty_map(n, path);
  for (const auto& [name, args] : n.entries())
    schema_bind(reg, Category::Transform, name, args, join(path, name));
}

void validate_scheduler_map(const ConfigNode& n, const std::string& path,
                            const Registry& reg) {
  if (n.is_null()) return;
  need_nonempty_map(n, path);
  for (const auto& [name, args] : n.entries())
    schema_bind(reg, Category::Scheduler, name, args, join(path, name));
}

// ---------------------------------------------------------------------------
// shared blocks

void validate_optimizer(const ConfigNode& n, const std::string& path) {
  static const ComponentDef adamw{
      "AdamW",
      Category::Model,
      {ParamSpec::optional("lr", ValueShape::Number,
                           ConfigNode::floating(0.001, "0.001")),
       ParamSpec::optional(
           "betas", ValueShape::Sequence,
           ConfigNode::sequence({ConfigNode::floating(0.9, "0.9"),
                                 ConfigNode::floating(0.999, "0.999")})),
       ParamSpec::optional("weight_decay", ValueShape::Number,
                           ConfigNode::floating(0.0, "0.0")),
       ParamSpec::optional("eps", ValueShape::Number,
                           ConfigNode::floating(1e-8, "1e-08"))},
      {}};

  need_map(n, path);
  need_value_in(need(n, path, "name"), join(path, "name"), {"AdamW"});
  ConfigNode rest = ConfigNode::mapping();
  for (const auto& [k, v] : n.entries())
    if (k != "name") rest.set(k, v);
  ConfigNode bound;
  try {
    bound = bind_args(adamw, rest, path);
  } catch (const Error& e) {
    if (e.kind() == ErrKind::Argument)
      throw Error(ErrKind::Schema, e.message(), e.path());
    throw;
  }
  if (as_number(bound.at("lr"), join(path, "lr")) <= 0.0)
    schema_error(join(path, "lr"), "must be > 0");
  const ConfigNode& betas = bound.at("betas");
  if (betas.size() != 2)
    schema_error(join(path, "betas"), "expected two values");
  for (size_t i = 0; i < 2; ++i) {
    const double b = as_number(betas.at(i), join(path, "betas"));
    if (b < 0.0 || b >= 1.0)
      schema_error(join(path, "betas"), "values must be in [0, 1)");
  }
  if (as_number(bound.at("weight_decay"), join(path, "weight_decay")) < 0.0)
    schema_error(join(path, "weight_decay"), "must be >= 0");
  if (as_number(bound.at("eps"), join(path, "eps")) <= 0.0)
    schema_error(join(path, "eps"), "must be > 0");
}

// criterions_loader entry bodies under a model output (training/prediction):
// is_loss and schedulers are engine keys, the rest binds to the component
void validate_outputs_criterions(const ConfigNode& n, const std::string& path,
                                 const Registry& reg, bool train) {
  if (n.is_null()) {
    if (train)
      schema_error(path, "a training run needs at least one loss criterion");
    return;
  }
  need_nonempty_map(n, path);
  for (const auto& [addr, body] : n.entries()) {
    const std::string apath = join(path, addr);
    split_address(addr);
    need_exact_keys(body, apath, {"targets_criterions"});
    const ConfigNode& targets = body.at("targets_criterions");
    const std::string tpath = join(apath, "targets_criterions");
    need_nonempty_map(targets, tpath);
    for (const auto& [group, gbody] : targets.entries()) {
      const std::string gpath = join(tpath, group);
      need_exact_keys(gbody, gpath, {"criterions_loader"});
      const ConfigNode& loader = gbody.at("criterions_loader");
      const std::string lpath = join(gpath, "criterions_loader");
      need_nonempty_map(loader, lpath);
      for (const auto& [cname, cargs] : loader.entries()) {
        const std::string cpath = join(lpath, cname);
        need_map(cargs, cpath);
        ConfigNode rest = ConfigNode::mapping();
        bool saw_is_loss = false;
        for (const auto& [k, v] : cargs.entries()) {
          if (k == "is_loss") {
            saw_is_loss = true;
            as_bool(v, join(cpath, "is_loss"));
          } else if (k == "schedulers") {
            validate_scheduler_map(v, join(cpath, "schedulers"), reg);
          } else {
            rest.set(k, v);
          }
        }
        if (!saw_is_loss)
          schema_error(join(cpath, "is_loss"), "required key absent");
        if (!cargs.find("schedulers"))
          schema_error(join(cpath, "schedulers"), "required key absent");
        schema_bind(reg, Category::Loss, cname, rest, cpath);
      }
    }
  }
}

void validate_block_config(const ConfigNode& n, const std::string& path) {
  need_exact_keys(n, path, {"kernel_size", "stride", "padding", "bias",
                            "activation", "norm_mode"});
  const int64_t k = as_int(n.at("kernel_size"), join(path, "kernel_size"));
  if (k < 1 || k % 2 == 0)
    schema_error(join(path, "kernel_size"), "must be odd and >= 1");
  if (as_int(n.at("stride"), join(path, "stride")) != 1)
    unsupported(join(path, "stride"), "convolution blocks require stride 1");
  const int64_t pad = as_int(n.at("padding"), join(path, "padding"));
  if (pad != (k - 1) / 2)
    schema_error(join(path, "padding"),
                 "size-preserving convolutions require padding == "
                 "(kernel_size - 1) / 2");
  as_bool(n.at("bias"), join(path, "bias"));
  const std::string& act = as_string(n.at("activation"),
                                     join(path, "activation"));
  if (act != "ReLU")
    unsupported(join(path, "activation"), "only ReLU activation is available");
  const std::string& norm = as_string(n.at("norm_mode"),
                                      join(path, "norm_mode"));
  if (norm != "NONE")
    unsupported(join(path, "norm_mode"), "normalization layers are not "
                                         "available; use NONE");
}

void validate_unet_args(const ConfigNode& a, const std::string& path) {
  if (as_int(a.at("dim"), join(path, "dim")) != 2)
    unsupported(join(path, "dim"),
                "only dim 2 is available (2.5D uses extend_slice)");
  const ConfigNode& channels = a.at("channels");
  const std::string chpath = join(path, "channels");
  if (channels.size() < 2)
    schema_error(chpath, "expected at least input and first stage width");
  for (size_t i = 0; i < channels.size(); ++i)
    if (as_int(channels.at(i), chpath) < 1)
      schema_error(chpath, "values must be >= 1");
  if (as_int(a.at("nb_class"), join(path, "nb_class")) < 2)
    schema_error(join(path, "nb_class"), "must be >= 2");
  if (as_int(a.at("nb_conv_per_stage"), join(path, "nb_conv_per_stage")) < 1)
    schema_error(join(path, "nb_conv_per_stage"), "must be >= 1");
  const std::string& down = as_string(a.at("downsample_mode"),
                                      join(path, "downsample_mode"));
  if (down != "MAXPOOL")
    unsupported(join(path, "downsample_mode"), "only MAXPOOL is available");
  const std::string& up = as_string(a.at("upsample_mode"),
                                    join(path, "upsample_mode"));
  if (up != "CONV_TRANSPOSE")
    unsupported(join(path, "upsample_mode"),
                "only CONV_TRANSPOSE is available");
  if (as_bool(a.at("attention"), join(path, "attention")))
    unsupported(join(path, "attention"), "attention blocks are not available");
  const std::string& block = as_string(a.at("block_type"),
                                       join(path, "block_type"));
  if (block != "Conv")
    unsupported(join(path, "block_type"), "only Conv blocks are available");
  validate_block_config(a.at("BlockConfig"), join(path, "BlockConfig"));
}

// Model: classpath plus exactly one model entry; training runs additionally
// carry optimizer, schedulers, and initialization keys in the model body
void validate_model(const ConfigNode& model, const std::string& path,
                    bool train, const Registry& reg) {
  need_map(model, path);
  const std::string& classpath = as_string(need(model, path, "classpath"),
                                           join(path, "classpath"));
  if (classpath.empty())
    schema_error(join(path, "classpath"), "must not be empty");

  const std::string* model_name = nullptr;
  const ConfigNode* model_args = nullptr;
  for (const auto& [k, v] : model.entries()) {
    if (k == "classpath") continue;
    if (model_name)
      schema_error(join(path, k), "exactly one model entry is allowed");
    model_name = &k;
    model_args = &v;
  }
  if (!model_name)
    schema_error(path, "a model entry is required next to classpath");

  const ComponentDef& def = reg.resolve(Category::Model, *model_name);
  const std::string mpath = join(path, *model_name);
  need_map(*model_args, mpath);

  ConfigNode rest = ConfigNode::mapping();
  bool saw_criterions = false;
  for (const auto& [k, v] : model_args->entries()) {
    const std::string kp = join(mpath, k);
    if (train && k == "Optimizer") {
      validate_optimizer(v, kp);
    } else if (train && k == "schedulers") {
      validate_scheduler_map(v, kp, reg);
    } else if (k == "outputs_criterions") {
      saw_criterions = true;
      validate_outputs_criterions(v, kp, reg, train);
    } else if (train && k == "nb_batch_per_step") {
      if (as_int(v, kp) < 1) schema_error(kp, "must be >= 1");
    } else if (train && k == "init_type") {
      if (as_string(v, kp) != "normal")
        unsupported(kp, "only normal initialization is available");
    } else if (train && k == "init_gain") {
      if (as_number(v, kp) <= 0.0) schema_error(kp, "must be > 0");
    } else {
      rest.set(k, v);
    }
  }
  if (train)
    for (const char* k : {"Optimizer", "schedulers", "nb_batch_per_step",
                          "init_type", "init_gain"})
      if (!model_args->find(k))
        schema_error(join(mpath, k), "required key absent");
  if (!saw_criterions)
    schema_error(join(mpath, "outputs_criterions"), "required key absent");

  const ConfigNode bound = schema_bind(reg, Category::Model, *model_name,
                                       rest, mpath);
  if (def.name == "UNet") validate_unet_args(bound, mpath);
}

void validate_augmentations(const ConfigNode& n, const std::string& path,
                            const Registry& reg) {
  if (n.is_null()) return;
  need_nonempty_map(n, path);
  for (const auto& [block, body] : n.entries()) {
    const std::string bpath = join(path, block);
    need_exact_keys(body, bpath, {"data_augmentations", "nb"});
    const ConfigNode& augs = body.at("data_augmentations");
    const std::string apath = join(bpath, "data_augmentations");
    need_nonempty_map(augs, apath);
    for (const auto& [name, args] : augs.entries())
      schema_bind(reg, Category::Augmentation, name, args, join(apath, name));
    if (as_int(body.at("nb"), join(bpath, "nb")) < 1)
      schema_error(join(bpath, "nb"), "must be >= 1");
  }
}

enum class DestShape { Full, TransformsOnly };

void validate_groups_src(const ConfigNode& n, const std::string& path,
                         const Registry& reg, DestShape shape) {
  need_nonempty_map(n, path);
  bool any_input = false;
  for (const auto& [src, body] : n.entries()) {
    const std::string spath = join(path, src);
    need_exact_keys(body, spath, {"groups_dest"});
    const ConfigNode& dests = body.at("groups_dest");
    const std::string dpath = join(spath, "groups_dest");
    need_nonempty_map(dests, dpath);
    for (const auto& [dest, dbody] : dests.entries()) {
      const std::string p = join(dpath, dest);
      if (shape == DestShape::TransformsOnly) {
        need_exact_keys(dbody, p, {"transforms"});
        validate_transform_map(dbody.at("transforms"), join(p, "transforms"),
                               reg);
      } else {
        need_exact_keys(dbody, p, {"transforms", "patch_transforms",
                                   "is_input"});
        validate_transform_map(dbody.at("transforms"), join(p, "transforms"),
                               reg);
        validate_transform_map(dbody.at("patch_transforms"),
                               join(p, "patch_transforms"), reg);
        if (as_bool(dbody.at("is_input"), join(p, "is_input")))
          any_input = true;
      }
    }
  }
  if (shape == DestShape::Full && !any_input)
    schema_error(path, "at least one group must set is_input: true");
}

void validate_patch(const ConfigNode& n, const std::string& path) {
  need_exact_keys(n, path,
                  {"patch_size", "overlap", "extend_slice", "pad_value"});
  const ConfigNode& ps = n.at("patch_size");
  const std::string pspath = join(path, "patch_size");
  if (ps.kind() != NodeKind::Sequence || ps.size() != 3)
    schema_error(pspath, "expected 3 extents (one per spatial axis)");
  int64_t sizes[3];
  for (size_t i = 0; i < 3; ++i) {
    sizes[i] = as_int(ps.at(i), pspath);
    if (sizes[i] < 1) schema_error(pspath, "extents must be >= 1");
  }

  const ConfigNode& ov = n.at("overlap");
  const std::string ovpath = join(path, "overlap");
  auto check_overlap = [&](int64_t o, size_t axis) {
    if (o < 0) schema_error(ovpath, "must be >= 0");
    if (o >= sizes[axis])
      schema_error(ovpath, "overlap must be smaller than patch_size");
  };
  if (ov.kind() == NodeKind::Int) {
    for (size_t i = 0; i < 3; ++i) check_overlap(ov.as_int(), i);
  } else if (ov.kind() == NodeKind::Sequence) {
    if (ov.size() != 3)
      schema_error(ovpath, "expected 3 values (one per spatial axis)");
    for (size_t i = 0; i < 3; ++i) check_overlap(as_int(ov.at(i), ovpath), i);
  } else if (!ov.is_null()) {
    type_error(ovpath, std::string("expected int, sequence, or None, got ") +
                           node_kind_name(ov.kind()));
  }

  const ConfigNode& ext = n.at("extend_slice");
  const std::string extpath = join(path, "extend_slice");
  if (!ext.is_null()) {
    const int64_t e = as_int(ext, extpath);
    if (e < 0) schema_error(extpath, "must be >= 0");
    if (e > 0 && sizes[0] != 1)
      schema_error(extpath,
                   "slice stacking requires patch_size [1, H, W]");
  }
  as_number(n.at("pad_value"), join(path, "pad_value"));
}

void validate_subset(const ConfigNode& n, const std::string& path) {
  if (n.is_null() || n.kind() == NodeKind::String) return;
  if (n.kind() == NodeKind::Sequence) {
    for (size_t i = 0; i < n.size(); ++i)
      if (as_int(n.at(i), path) < 0)
        schema_error(path, "case indices must be >= 0");
    return;
  }
  type_error(path, std::string("expected None, a file path, or a list of "
                               "indices, got ") +
                       node_kind_name(n.kind()));
}

void validate_dataset_filenames(const ConfigNode& n, const std::string& path) {
  if (n.kind() != NodeKind::Sequence || n.size() == 0)
    schema_error(path, "expected a non-empty list of <path>:<tag>:<ext>");
  for (size_t i = 0; i < n.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    parse_dataset_filename(as_string(n.at(i), p));
  }
}

void validate_validation(const ConfigNode& n, const std::string& path) {
  if (n.is_null() || n.kind() == NodeKind::String) return;
  if (n.kind() == NodeKind::Float) {
    const double r = n.as_float();
    if (r <= 0.0 || r >= 1.0)
      schema_error(path, "split ratio must be in (0, 1)");
    return;
  }
  type_error(path, std::string("expected None, a file path, or a split "
                               "ratio, got ") +
                       node_kind_name(n.kind()));
}

void validate_data_log(const ConfigNode& n, const std::string& path) {
  if (n.is_null()) return;
  if (n.kind() != NodeKind::Sequence)
    type_error(path, std::string("expected None or a list, got ") +
                         node_kind_name(n.kind()));
  for (size_t i = 0; i < n.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    parse_data_log_entry(as_string(n.at(i), p));
  }
}

void validate_train_name(const ConfigNode& n, const std::string& path) {
  const std::string& s = as_string(n, path);
  if (s.empty()) schema_error(path, "must not be empty");
  if (s == "." || s == ".." ||
      s.find('/') != std::string::npos || s.find('\\') != std::string::npos)
    schema_error(path, "must be a plain directory name");
}

void validate_manual_seed(const ConfigNode& n, const std::string& path) {
  if (n.is_null()) return;
  as_int(n, path);
}

// ---------------------------------------------------------------------------
// per-kind schemas

void validate_dataset_train(const ConfigNode& n, const std::string& path,
                            const Registry& reg) {
  need_exact_keys(n, path,
                  {"groups_src", "augmentations", "Patch", "subset", "shuffle",
                   "dataset_filenames", "use_cache", "batch_size",
                   "validation", "inline_augmentations"});
  validate_groups_src(n.at("groups_src"), join(path, "groups_src"), reg,
                      DestShape::Full);
  validate_augmentations(n.at("augmentations"), join(path, "augmentations"),
                         reg);
  validate_patch(n.at("Patch"), join(path, "Patch"));
  validate_subset(n.at("subset"), join(path, "subset"));
  as_bool(n.at("shuffle"), join(path, "shuffle"));
  validate_dataset_filenames(n.at("dataset_filenames"),
                             join(path, "dataset_filenames"));
  as_bool(n.at("use_cache"), join(path, "use_cache"));
  if (as_int(n.at("batch_size"), join(path, "batch_size")) < 1)
    schema_error(join(path, "batch_size"), "must be >= 1");
  validate_validation(n.at("validation"), join(path, "validation"));
  as_bool(n.at("inline_augmentations"), join(path, "inline_augmentations"));
}

void validate_dataset_predict(const ConfigNode& n, const std::string& path,
                              const Registry& reg) {
  need_exact_keys(n, path, {"groups_src", "augmentations", "Patch", "subset",
                            "dataset_filenames", "batch_size"});
  validate_groups_src(n.at("groups_src"), join(path, "groups_src"), reg,
                      DestShape::Full);
  validate_augmentations(n.at("augmentations"), join(path, "augmentations"),
                         reg);
  validate_patch(n.at("Patch"), join(path, "Patch"));
  validate_subset(n.at("subset"), join(path, "subset"));
  validate_dataset_filenames(n.at("dataset_filenames"),
                             join(path, "dataset_filenames"));
  if (as_int(n.at("batch_size"), join(path, "batch_size")) < 1)
    schema_error(join(path, "batch_size"), "must be >= 1");
}

void validate_dataset_eval(const ConfigNode& n, const std::string& path,
                           const Registry& reg) {
  need_exact_keys(n, path,
                  {"groups_src", "subset", "dataset_filenames", "validation"});
  validate_groups_src(n.at("groups_src"), join(path, "groups_src"), reg,
                      DestShape::TransformsOnly);
  validate_subset(n.at("subset"), join(path, "subset"));
  validate_dataset_filenames(n.at("dataset_filenames"),
                             join(path, "dataset_filenames"));
  validate_validation(n.at("validation"), join(path, "validation"));
}

void validate_outputs_dataset(const ConfigNode& n, const std::string& path,
                              const Registry& reg) {
  need_nonempty_map(n, path);
  for (const auto& [addr, body] : n.entries()) {
    const std::string apath = join(path, addr);
    split_address(addr);
    need_exact_keys(body, apath, {"OutputDataset"});
    const ConfigNode& od = body.at("OutputDataset");
    const std::string opath = join(apath, "OutputDataset");
    need_map(od, opath);
    const std::string& writer = as_string(need(od, opath, "name_class"),
                                          join(opath, "name_class"));
    const ComponentDef& wdef = reg.resolve(Category::OutputWriter, writer);
    ConfigNode rest = ConfigNode::mapping();
    for (const auto& [k, v] : od.entries())
      if (k != "name_class") rest.set(k, v);
    const ConfigNode bound = schema_bind(reg, Category::OutputWriter, writer,
                                         rest, opath);

    if (wdef.name != "OutSameAsGroupDataset") continue;
    validate_transform_map(bound.at("before_reduction_transforms"),
                           join(opath, "before_reduction_transforms"), reg);
    validate_transform_map(bound.at("after_reduction_transforms"),
                           join(opath, "after_reduction_transforms"), reg);
    validate_transform_map(bound.at("final_transforms"),
                           join(opath, "final_transforms"), reg);
    const std::string& sag = as_string(bound.at("same_as_group"),
                                       join(opath, "same_as_group"));
    const auto colon = sag.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == sag.size() ||
        sag.find(':', colon + 1) != std::string::npos)
      schema_error(join(opath, "same_as_group"),
                   "expected <src_group>:<dest_group>");
    parse_output_filename(as_string(bound.at("dataset_filename"),
                                    join(opath, "dataset_filename")));
    if (as_string(bound.at("group"), join(opath, "group")).empty())
      schema_error(join(opath, "group"), "must not be empty");
    const ConfigNode& pc = bound.at("patch_combine");
    if (!pc.is_null())
      need_value_in(pc, join(opath, "patch_combine"), {"Uniform", "Cosine"});
    reg.resolve(Category::Reduction,
                as_string(bound.at("reduction"), join(opath, "reduction")));
    as_bool(bound.at("inverse_transform"), join(opath, "inverse_transform"));
  }
}

void validate_train_root(const ConfigNode& root, const Registry& reg) {
  need_exact_keys(root, "", {"Trainer"});
  const ConfigNode& t = root.at("Trainer");
  const std::string p = "Trainer";
  need_exact_keys(t, p,
                  {"Model", "Dataset", "train_name", "manual_seed", "epochs",
                   "it_validation", "autocast", "gradient_checkpoints",
                   "gpu_checkpoints", "ema_decay", "data_log",
                   "save_checkpoint_mode", "EarlyStopping"});
  validate_model(t.at("Model"), join(p, "Model"), true, reg);
  validate_dataset_train(t.at("Dataset"), join(p, "Dataset"), reg);
  validate_train_name(t.at("train_name"), join(p, "train_name"));
  validate_manual_seed(t.at("manual_seed"), join(p, "manual_seed"));
  if (as_int(t.at("epochs"), join(p, "epochs")) < 1)
    schema_error(join(p, "epochs"), "must be >= 1");
  const ConfigNode& itv = t.at("it_validation");
  if (!itv.is_null() && as_int(itv, join(p, "it_validation")) < 1)
    schema_error(join(p, "it_validation"), "must be >= 1");
  if (as_bool(t.at("autocast"), join(p, "autocast")))
    unsupported(join(p, "autocast"), "mixed precision is not supported; "
                                     "set it to false");
  need_null(t.at("gradient_checkpoints"), join(p, "gradient_checkpoints"),
            "gradient checkpointing");
  need_null(t.at("gpu_checkpoints"), join(p, "gpu_checkpoints"),
            "device splitting");
  const double ema = as_number(t.at("ema_decay"), join(p, "ema_decay"));
  if (ema < 0.0 || ema >= 1.0)
    schema_error(join(p, "ema_decay"), "must be in [0, 1)");
  validate_data_log(t.at("data_log"), join(p, "data_log"));
  need_value_in(t.at("save_checkpoint_mode"), join(p, "save_checkpoint_mode"),
                {"BEST", "ALL"});

  const ConfigNode& es = t.at("EarlyStopping");
  const std::string epath = join(p, "EarlyStopping");
  need_exact_keys(es, epath, {"monitor", "patience", "min_delta", "mode"});
  const ConfigNode& monitor = es.at("monitor");
  if (!monitor.is_null()) as_string(monitor, join(epath, "monitor"));
  if (as_int(es.at("patience"), join(epath, "patience")) < 0)
    schema_error(join(epath, "patience"), "must be >= 0");
  if (as_number(es.at("min_delta"), join(epath, "min_delta")) < 0.0)
    schema_error(join(epath, "min_delta"), "must be >= 0");
  need_value_in(es.at("mode"), join(epath, "mode"), {"min", "max"});
}

void validate_prediction_root(const ConfigNode& root, const Registry& reg) {
  need_exact_keys(root, "", {"Predictor"});
  const ConfigNode& pr = root.at("Predictor");
  const std::string p = "Predictor";
  need_exact_keys(pr, p,
                  {"Model", "Dataset", "outputs_dataset", "combine",
                   "train_name", "manual_seed", "gpu_checkpoints", "autocast",
                   "data_log"});
  validate_model(pr.at("Model"), join(p, "Model"), false, reg);
  validate_dataset_predict(pr.at("Dataset"), join(p, "Dataset"), reg);
  validate_outputs_dataset(pr.at("outputs_dataset"),
                           join(p, "outputs_dataset"), reg);
  reg.resolve(Category::Reduction,
              as_string(pr.at("combine"), join(p, "combine")));
  validate_train_name(pr.at("train_name"), join(p, "train_name"));
  validate_manual_seed(pr.at("manual_seed"), join(p, "manual_seed"));
  need_null(pr.at("gpu_checkpoints"), join(p, "gpu_checkpoints"),
            "device splitting");
  if (as_bool(pr.at("autocast"), join(p, "autocast")))
    unsupported(join(p, "autocast"), "mixed precision is not supported; "
                                     "set it to false");
  validate_data_log(pr.at("data_log"), join(p, "data_log"));
}

void validate_evaluation_root(const ConfigNode& root, const Registry& reg) {
  need_exact_keys(root, "", {"Evaluator"});
  const ConfigNode& ev = root.at("Evaluator");
  const std::string p = "Evaluator";
  need_exact_keys(ev, p, {"metrics", "Dataset", "train_name"});

  const ConfigNode& metrics = ev.at("metrics");
  const std::string mpath = join(p, "metrics");
  need_nonempty_map(metrics, mpath);
  for (const auto& [target, body] : metrics.entries()) {
    const std::string tpath = join(mpath, target);
    need_exact_keys(body, tpath, {"targets_criterions"});
    const ConfigNode& preds = body.at("targets_criterions");
    const std::string ppath = join(tpath, "targets_criterions");
    need_nonempty_map(preds, ppath);
    for (const auto& [pred, pbody] : preds.entries()) {
      const std::string gpath = join(ppath, pred);
      need_exact_keys(pbody, gpath, {"criterions_loader"});
      const ConfigNode& loader = pbody.at("criterions_loader");
      const std::string lpath = join(gpath, "criterions_loader");
      need_nonempty_map(loader, lpath);
      for (const auto& [cname, cargs] : loader.entries())
        schema_bind(reg, Category::Metric, cname, cargs, join(lpath, cname));
    }
  }

  validate_dataset_eval(ev.at("Dataset"), join(p, "Dataset"), reg);
  validate_train_name(ev.at("train_name"), join(p, "train_name"));
}

}  // namespace

// ---------------------------------------------------------------------------

const ConfigNode* ConfigDocument::find_path(const std::string& dotted) const {
  const ConfigNode* cur = &root;
  size_t start = 0;
  while (start <= dotted.size()) {
    const size_t dot = dotted.find('.', start);
    const std::string key = dotted.substr(
        start, dot == std::string::npos ? std::string::npos : dot - start);
    if (cur->kind() != NodeKind::Mapping) return nullptr;
    cur = cur->find(key);
    if (!cur) return nullptr;
    if (dot == std::string::npos) return cur;
    start = dot + 1;
  }
  return nullptr;
}

const ConfigNode& ConfigDocument::at_path(const std::string& dotted) const {
  const ConfigNode* n = find_path(dotted);
  if (!n) throw Error(ErrKind::Schema, "config path not found", dotted);
  return *n;
}

ConfigDocument parse_config(const std::string& text, ConfigKind kind,
                            const Registry& reg,
                            const std::string& source_name) {
  ConfigDocument doc;
  doc.kind = kind;
  doc.root = parse_yaml(text, source_name);
  doc.source_path = source_name;
  switch (kind) {
    case ConfigKind::Train: validate_train_root(doc.root, reg); break;
    case ConfigKind::Prediction: validate_prediction_root(doc.root, reg); break;
    case ConfigKind::Evaluation: validate_evaluation_root(doc.root, reg); break;
  }
  return doc;
}

ConfigDocument load_config_file(const std::filesystem::path& file,
                                ConfigKind kind, const Registry& reg) {
  std::ifstream in(file, std::ios::binary);
  if (!in)
    throw Error(ErrKind::Io, "cannot open config file", file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), kind, reg, file.string());
}

DatasetFilenameSpec parse_dataset_filename(const std::string& s) {
  const auto last = s.rfind(':');
  const auto mid = last == std::string::npos ? std::string::npos
                                             : s.rfind(':', last - 1);
  if (last == std::string::npos || mid == std::string::npos || mid == 0)
    throw Error(ErrKind::Schema,
                "'" + s + "' does not match <path>:<tag>:<ext>");
  DatasetFilenameSpec spec;
  spec.path = s.substr(0, mid);
  spec.tag = s.substr(mid + 1, last - mid - 1);
  spec.ext = s.substr(last + 1);
  spec.raw = s;
  if (spec.tag.size() != 1)
    throw Error(ErrKind::Schema,
                "'" + s + "': role tag must be a single character");
  if (spec.ext.empty())
    throw Error(ErrKind::Schema, "'" + s + "': extension must not be empty");
  return spec;
}

OutputFilenameSpec parse_output_filename(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == s.size())
    throw Error(ErrKind::Schema, "'" + s + "' does not match <path>:<ext>");
  return {s.substr(0, colon), s.substr(colon + 1)};
}

std::vector<std::string> split_address(const std::string& addr) {
  if (addr.empty())
    throw Error(ErrKind::Schema, "model address must not be empty");
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    const size_t colon = addr.find(':', start);
    const std::string part = addr.substr(
        start, colon == std::string::npos ? std::string::npos : colon - start);
    if (part.empty())
      throw Error(ErrKind::Schema,
                  "'" + addr + "': address segments must not be empty");
    parts.push_back(part);
    if (colon == std::string::npos) return parts;
    start = colon + 1;
  }
}

DataLogEntry parse_data_log_entry(const std::string& s) {
  const auto last = s.rfind('/');
  const auto mid = last == std::string::npos ? std::string::npos
                                             : s.rfind('/', last - 1);
  if (last == std::string::npos || mid == std::string::npos || mid == 0)
    throw Error(ErrKind::Schema,
                "'" + s + "' does not match <group-or-address>/IMAGES/<n>");
  if (s.substr(mid + 1, last - mid - 1) != "IMAGES")
    throw Error(ErrKind::Schema,
                "'" + s + "': only IMAGES entries are supported");
  DataLogEntry e;
  e.source = s.substr(0, mid);
  const std::string count = s.substr(last + 1);
  try {
    size_t pos = 0;
    e.count = std::stoll(count, &pos);
    if (pos != count.size()) throw std::invalid_argument(count);
  } catch (const std::exception&) {
    throw Error(ErrKind::Schema, "'" + s + "': image count must be an integer");
  }
  if (e.count < 1)
    throw Error(ErrKind::Schema, "'" + s + "': image count must be >= 1");
  return e;
}

ResolvedComponent resolve_component(const Registry& reg, Category category,
                                    const std::string& name,
                                    const ConfigNode& args,
                                    const std::string& path) {
  const ComponentDef& def = reg.resolve(category, name);
  return {&def, bind_args(def, args, path)};
}

std::filesystem::path write_snapshot(const ConfigDocument& cfg,
                                     const std::filesystem::path& workspace_root,
                                     const std::string& train_name) {
  const std::filesystem::path dir = workspace_root / "Setups" / train_name;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw Error(ErrKind::Io, "cannot create setups directory: " + ec.message(),
                dir.string());
  for (int k = 0;; ++k) {
    const std::filesystem::path file =
        dir / ("Config_" + std::to_string(k) + ".yml");
    if (std::filesystem::exists(file)) continue;
    std::ofstream out(file, std::ios::binary);
    if (!out)
      throw Error(ErrKind::Io, "cannot write snapshot", file.string());
    out << emit_yaml(cfg.root);
    out.close();
    if (!out)
      throw Error(ErrKind::Io, "cannot write snapshot", file.string());
    return file;
  }
}

}  // namespace voxelpipe
