// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "voxelpipe/model/unet.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "voxelpipe/common/error.hpp"
#include "voxelpipe/common/rng.hpp"

namespace voxelpipe {

namespace {

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> parts;
  size_t pos = 0;
  while (true) {
    const size_t next = s.find(sep, pos);
    parts.push_back(s.substr(pos, next == std::string::npos ? std::string::npos
                                                            : next - pos));
    if (next == std::string::npos) return parts;
    pos = next + 1;
  }
}

}  // namespace

const ModuleNode* ModuleNode::child(const std::string& n) const {
  for (const ModuleNode& c : children)
    if (c.name == n) return &c;
  return nullptr;
}

const ModuleNode* find_node(const ModuleNode& root,
                            const std::string& address) {
  if (address.empty()) return nullptr;
  const ModuleNode* cur = &root;
  for (const std::string& seg : split_on(address, ':')) {
    cur = cur->child(seg);
    if (!cur) return nullptr;
  }
  return cur;
}

namespace {

void walk_addresses(const ModuleNode& n, const std::string& prefix,
                    std::vector<std::string>& out) {
  for (const ModuleNode& c : n.children) {
    const std::string addr = prefix.empty() ? c.name : prefix + ":" + c.name;
    out.push_back(addr);
    walk_addresses(c, addr, out);
  }
}

}  // namespace

std::vector<std::string> list_addresses(const ModuleNode& root) {
  std::vector<std::string> out;
  walk_addresses(root, "", out);
  return out;
}

UNetSpec unet_spec_from_args(const ConfigNode& args, double init_gain) {
  if (args.kind() != NodeKind::Mapping)
    throw Error(ErrKind::Type, "model arguments must be a mapping");
  if (!(init_gain > 0.0))
    throw Error(ErrKind::Argument, "init_gain must be > 0");

  UNetSpec s;
  s.init_gain = init_gain;

  const ConfigNode* ch = args.find("channels");
  if (!ch) throw Error(ErrKind::Argument, "channels is required");
  for (size_t i = 0; i < ch->size(); ++i)
    s.channels.push_back(ch->at(i).as_int());
  if (s.channels.size() < 2)
    throw Error(ErrKind::Argument,
                "channels needs the input width and at least one stage");
  for (int64_t c : s.channels)
    if (c < 1) throw Error(ErrKind::Argument, "channel widths must be >= 1");

  const ConfigNode* nc = args.find("nb_class");
  if (!nc) throw Error(ErrKind::Argument, "nb_class is required");
  s.nb_class = nc->as_int();
  if (s.nb_class < 2) throw Error(ErrKind::Argument, "nb_class must be >= 2");

  if (const ConfigNode* n = args.find("nb_conv_per_stage"))
    s.nb_conv_per_stage = n->as_int();
  if (s.nb_conv_per_stage < 1)
    throw Error(ErrKind::Argument, "nb_conv_per_stage must be >= 1");

  if (const ConfigNode* n = args.find("dim"); n && n->as_int() != 2)
    throw Error(ErrKind::Unsupported,
                "only dim 2 is available (2.5D uses extend_slice)");
  if (const ConfigNode* n = args.find("downsample_mode");
      n && n->as_string() != "MAXPOOL")
    throw Error(ErrKind::Unsupported, "only MAXPOOL downsampling is available");
  if (const ConfigNode* n = args.find("upsample_mode");
      n && n->as_string() != "CONV_TRANSPOSE")
    throw Error(ErrKind::Unsupported,
                "only CONV_TRANSPOSE upsampling is available");
  if (const ConfigNode* n = args.find("attention"); n && n->as_bool())
    throw Error(ErrKind::Unsupported, "attention blocks are not available");
  if (const ConfigNode* n = args.find("block_type");
      n && n->as_string() != "Conv")
    throw Error(ErrKind::Unsupported, "only Conv blocks are available");

  if (const ConfigNode* bc = args.find("BlockConfig")) {
    if (bc->kind() != NodeKind::Mapping)
      throw Error(ErrKind::Type, "BlockConfig must be a mapping");
    if (const ConfigNode* n = bc->find("kernel_size"))
      s.block.kernel_size = n->as_int();
    if (const ConfigNode* n = bc->find("stride")) s.block.stride = n->as_int();
    if (const ConfigNode* n = bc->find("padding"))
      s.block.padding = n->as_int();
    if (const ConfigNode* n = bc->find("bias")) s.block.bias = n->as_bool();
    if (const ConfigNode* n = bc->find("activation")) {
      const std::string& act = n->as_string();
      if (act == "ReLU") s.block.relu = true;
      else if (act == "NONE") s.block.relu = false;
      else
        throw Error(ErrKind::Unsupported,
                    "only ReLU or NONE activation is available");
    }
    if (const ConfigNode* n = bc->find("norm_mode");
        n && n->as_string() != "NONE")
      throw Error(ErrKind::Unsupported,
                  "normalization layers are not available; use NONE");
  }
  if (s.block.kernel_size < 1 || s.block.kernel_size % 2 == 0)
    throw Error(ErrKind::Argument, "kernel_size must be odd and >= 1");
  if (s.block.stride != 1)
    throw Error(ErrKind::Unsupported, "convolution blocks require stride 1");
  if (s.block.padding != (s.block.kernel_size - 1) / 2)
    throw Error(ErrKind::Argument,
                "size-preserving convolutions require padding == "
                "(kernel_size - 1) / 2");
  return s;
}

ModelSection split_model_section(const ConfigNode& model_map,
                                 const Registry& reg) {
  if (model_map.kind() != NodeKind::Mapping)
    throw Error(ErrKind::Type, "Model section must be a mapping");
  const std::string* name = nullptr;
  const ConfigNode* body = nullptr;
  for (const auto& [k, v] : model_map.entries()) {
    if (k == "classpath") continue;
    name = &k;
    body = &v;
    break;
  }
  if (!name)
    throw Error(ErrKind::Schema, "a model entry is required next to classpath");
  if (body->kind() != NodeKind::Mapping)
    throw Error(ErrKind::Type, "model body must be a mapping");

  const ComponentDef& def = reg.resolve(Category::Model, *name);
  ModelSection sec;
  sec.model_name = *name;
  ConfigNode rest = ConfigNode::mapping();
  sec.engine = ConfigNode::mapping();
  for (const auto& [k, v] : body->entries()) {
    const bool component =
        std::any_of(def.params.begin(), def.params.end(),
                    [&](const ParamSpec& p) { return p.name == k; });
    if (component) rest.set(k, v);
    else sec.engine.set(k, v);
  }
  sec.bound_args = bind_args(def, rest, sec.model_name);
  return sec;
}

ModuleNode build_unet(const UNetSpec& spec) {
  if (spec.channels.size() < 2)
    throw Error(ErrKind::Argument,
                "channels needs the input width and at least one stage");
  ModuleNode root;
  const int64_t levels = spec.levels();
  for (int64_t i = 0; i < levels; ++i) {
    ModuleNode blk{"UNetBlock_" + std::to_string(i), {}};
    ModuleNode down{"DownConvBlock", {}};
    for (int64_t j = 0; j < spec.nb_conv_per_stage; ++j)
      down.children.push_back({"Conv_" + std::to_string(j), {}});
    blk.children.push_back(std::move(down));
    if (i < levels - 1) {
      blk.children.push_back({"Downsample", {}});
      blk.children.push_back({"Upsample", {}});
      ModuleNode up{"UpConvBlock", {}};
      for (int64_t j = 0; j < spec.nb_conv_per_stage; ++j)
        up.children.push_back({"Conv_" + std::to_string(j), {}});
      blk.children.push_back(std::move(up));
    }
    if (i == 0) {
      ModuleNode head{"Head", {}};
      head.children.push_back({"Softmax", {}});
      head.children.push_back({"Argmax", {}});
      blk.children.push_back(std::move(head));
    }
    root.children.push_back(std::move(blk));
  }
  return root;
}

UNetModel::UNetModel(UNetSpec spec, uint64_t seed) : spec_(std::move(spec)) {
  root_ = build_unet(spec_);
  Rng rng(seed);
  const auto& c = spec_.channels;
  const int64_t levels = spec_.levels();

  auto add_conv = [&](const std::string& addr, int64_t cout, int64_t cin,
                      int64_t k, int64_t stride, int64_t pad, bool relu,
                      bool transpose) {
    ConvRef ref;
    ref.stride = stride;
    ref.pad = pad;
    ref.relu = relu;
    ref.transpose = transpose;
    // transpose weights are [Cin, Cout, k, k], plain ones [Cout, Cin, k, k]
    const std::vector<int64_t> wshape =
        transpose ? std::vector<int64_t>{cin, cout, k, k}
                  : std::vector<int64_t>{cout, cin, k, k};
    Tensor w = Tensor::zeros(wshape, Dtype::F32);
    for (float& x : w.data<float>())
      x = static_cast<float>(rng.normal() * spec_.init_gain);
    ref.weight = params_.size();
    params_.push_back({addr + ":weight", std::move(w)});
    if (spec_.block.bias) {
      ref.bias = static_cast<int64_t>(params_.size());
      params_.push_back({addr + ":bias", Tensor::zeros({cout}, Dtype::F32)});
    }
    convs_[addr] = ref;
  };
  auto add_block = [&](const std::string& addr, int64_t cin, int64_t cout) {
    for (int64_t j = 0; j < spec_.nb_conv_per_stage; ++j)
      add_conv(addr + ":Conv_" + std::to_string(j), cout, j == 0 ? cin : cout,
               spec_.block.kernel_size, 1, spec_.block.padding,
               spec_.block.relu, false);
  };

  for (int64_t i = 0; i < levels; ++i) {
    const std::string blk = "UNetBlock_" + std::to_string(i);
    add_block(blk + ":DownConvBlock", c[i], c[i + 1]);
    if (i < levels - 1) {
      add_conv(blk + ":Upsample", c[i + 1], c[i + 2], 2, 2, 0, false, true);
      add_block(blk + ":UpConvBlock", 2 * c[i + 1], c[i + 1]);
    }
    if (i == 0)
      add_conv(blk + ":Head", spec_.nb_class, c[1], 1, 1, 0, false, false);
  }
}

Parameter* UNetModel::find_parameter(const std::string& name) {
  for (Parameter& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

std::vector<ValueId> UNetModel::lift_parameters(Tape& tape,
                                                bool requires_grad) const {
  std::vector<ValueId> ids;
  ids.reserve(params_.size());
  for (const Parameter& p : params_)
    ids.push_back(tape.leaf(p.value, requires_grad));
  return ids;
}

ValueId UNetModel::run_conv(Tape& tape, const std::string& address, ValueId x,
                            const std::vector<ValueId>& param_ids) const {
  const ConvRef& ref = convs_.at(address);
  std::optional<ValueId> bias;
  if (ref.bias >= 0) bias = param_ids[static_cast<size_t>(ref.bias)];
  const ValueId y =
      ref.transpose
          ? tape.conv_transpose2d(x, param_ids[ref.weight], bias, ref.stride,
                                  ref.pad)
          : tape.conv2d(x, param_ids[ref.weight], bias, ref.stride, ref.pad);
  return ref.relu ? tape.relu(y) : y;
}

std::map<std::string, ValueId> UNetModel::forward(
    Tape& tape, ValueId input, const std::vector<ValueId>& param_ids) const {
  if (param_ids.size() != params_.size())
    throw Error(ErrKind::Argument,
                "expected " + std::to_string(params_.size()) +
                    " parameter ids, got " + std::to_string(param_ids.size()));
  const Tensor& x0 = tape.value(input);
  if (x0.rank() != 4)
    throw Error(ErrKind::Shape,
                "model input must be [B, C, H, W], got " + x0.shape_str());
  const auto& c = spec_.channels;
  if (x0.dim(1) != c[0])
    throw Error(ErrKind::Shape,
                "input has " + std::to_string(x0.dim(1)) +
                    " channels, the model declares " + std::to_string(c[0]));
  const int64_t levels = spec_.levels();
  const int64_t div = int64_t(1) << (levels - 1);
  if (x0.dim(2) % div != 0 || x0.dim(3) % div != 0)
    throw Error(ErrKind::Shape,
                "spatial dims of " + x0.shape_str() +
                    " must be divisible by " + std::to_string(div) + " across " +
                    std::to_string(levels) + " stages");

  std::map<std::string, ValueId> taps;
  auto run_block = [&](const std::string& addr, ValueId x) {
    for (int64_t j = 0; j < spec_.nb_conv_per_stage; ++j) {
      const std::string conv = addr + ":Conv_" + std::to_string(j);
      x = run_conv(tape, conv, x, param_ids);
      taps[conv] = x;
    }
    taps[addr] = x;
    return x;
  };

  std::vector<ValueId> skips(static_cast<size_t>(levels));
  ValueId x = input;
  for (int64_t i = 0; i < levels; ++i) {
    const std::string blk = "UNetBlock_" + std::to_string(i);
    x = run_block(blk + ":DownConvBlock", x);
    skips[static_cast<size_t>(i)] = x;
    if (i == levels - 1) {
      taps[blk] = x;  // bottleneck: the block output is the encoder output
    } else {
      x = tape.maxpool2d(x, 2, 2);
      taps[blk + ":Downsample"] = x;
    }
  }
  for (int64_t i = levels - 2; i >= 0; --i) {
    const std::string blk = "UNetBlock_" + std::to_string(i);
    const ValueId up = run_conv(tape, blk + ":Upsample", x, param_ids);
    taps[blk + ":Upsample"] = up;
    const ValueId cat =
        tape.concat_channel({skips[static_cast<size_t>(i)], up});
    x = run_block(blk + ":UpConvBlock", cat);
    taps[blk] = x;
  }
  const ValueId logits = run_conv(tape, "UNetBlock_0:Head", x, param_ids);
  taps["UNetBlock_0:Head"] = logits;
  const ValueId probs = tape.softmax_channel(logits);
  taps["UNetBlock_0:Head:Softmax"] = probs;
  taps["UNetBlock_0:Head:Argmax"] = tape.argmax_channel(probs);
  return taps;
}

std::map<std::string, Tensor> UNetModel::forward_collect(
    const Tensor& input, const std::vector<std::string>& addresses) const {
  Tape tape;
  const ValueId in = tape.leaf(input);
  const std::vector<ValueId> ids = lift_parameters(tape, false);
  const std::map<std::string, ValueId> taps = forward(tape, in, ids);
  std::map<std::string, Tensor> out;
  for (const std::string& a : addresses) {
    if (out.count(a)) continue;
    const auto it = taps.find(a);
    if (it == taps.end())
      throw Error(ErrKind::Graph,
                  "address '" + a + "' does not resolve to a model output");
    out.emplace(a, tape.value(it->second));
  }
  return out;
}

double schedule_weight(const std::vector<ScheduleEntry>& schedule,
                       int64_t step) {
  if (schedule.empty()) return 1.0;
  bool hit = false;
  int64_t best = 0;
  double w = 0.0;
  for (const ScheduleEntry& e : schedule) {
    if (e.nb_step > step) continue;
    if (!hit || e.nb_step >= best) {
      hit = true;
      best = e.nb_step;
      w = e.value;
    }
  }
  return hit ? w : 0.0;
}

std::string CriterionBinding::id() const {
  return output_address + "|" + group_key + "|" + label;
}

std::vector<CriterionBinding> bindings_from_config(
    const ConfigNode& outputs_criterions, const Registry& reg,
    const std::string& path) {
  std::vector<CriterionBinding> out;
  if (outputs_criterions.is_null()) return out;
  for (const auto& [addr, body] : outputs_criterions.entries()) {
    const ConfigNode& targets = body.at("targets_criterions");
    for (const auto& [group, gbody] : targets.entries()) {
      const ConfigNode& loader = gbody.at("criterions_loader");
      for (const auto& [cname, cargs] : loader.entries()) {
        const std::string cpath = path + "." + addr + ".targets_criterions." +
                                  group + ".criterions_loader." + cname;
        CriterionBinding b;
        b.output_address = addr;
        b.group_key = group;
        b.target_groups = split_on(group, ';');
        b.label = cname;
        b.is_loss = cargs.at("is_loss").as_bool();

        const ConfigNode& sch = cargs.at("schedulers");
        if (!sch.is_null()) {
          for (const auto& [sname, sargs] : sch.entries()) {
            const std::string spath = cpath + ".schedulers." + sname;
            const ComponentDef& sdef = reg.resolve(Category::Scheduler, sname);
            if (sdef.name != "Constant")
              throw Error(ErrKind::Unsupported,
                          "only Constant schedules drive loss weights", spath);
            const ConfigNode bound = bind_args(sdef, sargs, spath);
            b.schedule.push_back({bound.at("nb_step").as_int(),
                                  bound.at("value").as_float()});
          }
          for (size_t i = 1; i < b.schedule.size(); ++i)
            if (b.schedule[i].nb_step < b.schedule[i - 1].nb_step)
              throw Error(ErrKind::Schema,
                          "schedule thresholds must be non-decreasing",
                          cpath + ".schedulers");
        }

        ConfigNode rest = ConfigNode::mapping();
        for (const auto& [k, v] : cargs.entries())
          if (k != "is_loss" && k != "schedulers") rest.set(k, v);
        const ResolvedComponent rc =
            resolve_component(reg, Category::Loss, cname, rest, cpath);
        b.criterion = rc.def->name;
        b.args = rc.args;
        out.push_back(std::move(b));
      }
    }
  }
  return out;
}

namespace {

// maps a binding onto the tape op evaluating its criterion
ValueId build_criterion(Tape& tape, const CriterionBinding& b, ValueId output,
                        const Tensor& target) {
  if (b.criterion == "FocalLoss") {
    FocalParams p;
    p.gamma = b.args.at("gamma").as_float();
    const ConfigNode& alpha = b.args.at("alpha");
    if (alpha.is_null()) {
      const Tensor& probs = tape.value(output);
      if (probs.rank() < 2)
        throw Error(ErrKind::Shape, "focal probabilities need [B, C, ...]");
      p.alpha.assign(static_cast<size_t>(probs.dim(1)), 1.0);
    } else {
      for (size_t i = 0; i < alpha.size(); ++i)
        p.alpha.push_back(alpha.at(i).as_float());
    }
    const std::string& red = b.args.at("reduction").as_string();
    if (red == "mean") p.mean_reduction = true;
    else if (red == "sum") p.mean_reduction = false;
    else
      throw Error(ErrKind::Unsupported,
                  "reduction must be 'mean' or 'sum', got '" + red + "'");
    return tape.focal_loss(output, target, std::move(p));
  }
  if (b.criterion == "DiceLoss")
    return tape.dice_loss(output, target, b.args.at("smooth").as_float());
  if (b.criterion == "MAE") {
    if (b.args.at("reduction").as_string() != "mean")
      throw Error(ErrKind::Unsupported, "MAE supports reduction 'mean' only");
    return tape.mae_loss(output, target);
  }
  throw Error(ErrKind::Unsupported,
              "criterion '" + b.criterion + "' has no built-in evaluation");
}

}  // namespace

LossReport compute_losses(Tape& tape,
                          const std::vector<CriterionBinding>& bindings,
                          const std::map<std::string, ValueId>& outputs,
                          const std::map<std::string, Tensor>& targets,
                          int64_t step) {
  LossReport rep;
  ValueId total = -1;
  for (const CriterionBinding& b : bindings) {
    const auto oit = outputs.find(b.output_address);
    if (oit == outputs.end())
      throw Error(ErrKind::Graph, "binding '" + b.id() +
                                      "' reads an address missing from the "
                                      "forward outputs");
    if (b.target_groups.size() != 1)
      throw Error(ErrKind::Unsupported,
                  "binding '" + b.id() +
                      "': built-in criteria take exactly one target group");
    const auto tit = targets.find(b.target_groups[0]);
    if (tit == targets.end())
      throw Error(ErrKind::MissingTarget,
                  "binding '" + b.id() + "' has no tensor for target group '" +
                      b.target_groups[0] + "'");

    const ValueId crit = build_criterion(tape, b, oit->second, tit->second);
    const double v = tape.value(crit).at(0);
    if (!std::isfinite(v))
      throw Error(ErrKind::NonFiniteLoss,
                  "criterion '" + b.id() + "' evaluated to " +
                      std::to_string(v));
    const double w = schedule_weight(b.schedule, step);
    rep.values.push_back({b.id(), v, w, b.is_loss});
    if (b.is_loss && w != 0.0) {
      const ValueId term = tape.mul_scalar(crit, w);
      total = total < 0 ? term : tape.add(total, term);
    }
  }
  if (total < 0) total = tape.leaf(Tensor::scalar(0.0, Dtype::F32));
  rep.total = total;
  rep.total_value = tape.value(total).at(0);
  if (!std::isfinite(rep.total_value))
    throw Error(ErrKind::NonFiniteLoss,
                "total loss evaluated to " + std::to_string(rep.total_value));
  return rep;
}

std::vector<std::string> validate_cross_refs(const ConfigDocument& cfg,
                                             const ModuleNode& model_tree) {
  std::vector<std::string> diags;
  if (cfg.root.kind() != NodeKind::Mapping || cfg.root.entries().empty())
    return diags;
  const ConfigNode& top = cfg.root.entries().front().second;
  if (top.kind() != NodeKind::Mapping) return diags;

  // dataset groups: union of source names and their internal dest names
  std::set<std::string> groups;
  int64_t extend = 0;
  if (const ConfigNode* ds = top.find("Dataset");
      ds && ds->kind() == NodeKind::Mapping) {
    if (const ConfigNode* gs = ds->find("groups_src");
        gs && gs->kind() == NodeKind::Mapping) {
      for (const auto& [src, sbody] : gs->entries()) {
        groups.insert(src);
        if (sbody.kind() != NodeKind::Mapping) continue;
        if (const ConfigNode* gd = sbody.find("groups_dest");
            gd && gd->kind() == NodeKind::Mapping)
          for (const auto& [dst, dbody] : gd->entries()) {
            (void)dbody;
            groups.insert(dst);
          }
      }
    }
    if (const ConfigNode* patch = ds->find("Patch");
        patch && patch->kind() == NodeKind::Mapping)
      if (const ConfigNode* es = patch->find("extend_slice");
          es && es->kind() == NodeKind::Int)
        extend = es->as_int();
  }

  // model body: the single non-classpath entry under Model
  const ConfigNode* body = nullptr;
  if (const ConfigNode* model = top.find("Model");
      model && model->kind() == NodeKind::Mapping)
    for (const auto& [k, v] : model->entries()) {
      if (k == "classpath" || v.kind() != NodeKind::Mapping) continue;
      body = &v;
      break;
    }

  int64_t nb_class = 0;
  int64_t input_ch = 0;
  if (body) {
    if (const ConfigNode* n = body->find("nb_class");
        n && n->kind() == NodeKind::Int)
      nb_class = n->as_int();
    if (const ConfigNode* ch = body->find("channels");
        ch && ch->kind() == NodeKind::Sequence && ch->size() > 0 &&
        ch->at(0).kind() == NodeKind::Int)
      input_ch = ch->at(0).as_int();
  }

  // a slab of 2e+1 slices multiplies every source channel count
  if (input_ch > 0 && extend > 0) {
    const int64_t span = 2 * extend + 1;
    if (input_ch % span != 0)
      diags.push_back("channel mismatch: expected " + std::to_string(span) +
                      " input channels for extend_slice " +
                      std::to_string(extend) + ", the model declares " +
                      std::to_string(input_ch));
  }

  auto check_groups = [&](const std::string& key) {
    for (const std::string& g : split_on(key, ';'))
      if (!groups.count(g))
        diags.push_back("target group '" + g +
                        "' is not produced by the dataset section");
  };

  if (body)
    if (const ConfigNode* oc = body->find("outputs_criterions");
        oc && oc->kind() == NodeKind::Mapping)
      for (const auto& [addr, abody] : oc->entries()) {
        if (!find_node(model_tree, addr))
          diags.push_back("unresolved address '" + addr + "'");
        if (abody.kind() != NodeKind::Mapping) continue;
        const ConfigNode* tc = abody.find("targets_criterions");
        if (!tc || tc->kind() != NodeKind::Mapping) continue;
        for (const auto& [gkey, gbody] : tc->entries()) {
          check_groups(gkey);
          if (gbody.kind() != NodeKind::Mapping) continue;
          const ConfigNode* loader = gbody.find("criterions_loader");
          if (!loader || loader->kind() != NodeKind::Mapping) continue;
          for (const auto& [cname, cargs] : loader->entries()) {
            if (cargs.kind() != NodeKind::Mapping) continue;
            const ConfigNode* alpha = cargs.find("alpha");
            if (nb_class > 0 && alpha &&
                alpha->kind() == NodeKind::Sequence &&
                static_cast<int64_t>(alpha->size()) > nb_class)
              diags.push_back("criterion '" + cname + "' alpha has " +
                              std::to_string(alpha->size()) +
                              " entries for " + std::to_string(nb_class) +
                              " classes");
          }
        }
      }

  // prediction outputs tap model addresses the same way
  if (const ConfigNode* od = top.find("outputs_dataset");
      od && od->kind() == NodeKind::Mapping)
    for (const auto& [addr, obody] : od->entries()) {
      (void)obody;
      if (!find_node(model_tree, addr))
        diags.push_back("unresolved address '" + addr + "'");
    }

  return diags;
}

}  // namespace voxelpipe
