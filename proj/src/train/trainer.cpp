// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "voxelpipe/train/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "voxelpipe/common/error.hpp"
#include "voxelpipe/common/rng.hpp"
#include "voxelpipe/dataio/metaimage.hpp"
#include "voxelpipe/pipeline/data.hpp"
#include "voxelpipe/tensor/adamw.hpp"
#include "voxelpipe/workspace/workspace.hpp"

namespace voxelpipe {

namespace {

namespace fs = std::filesystem;

// sub-stream tags folded into the run seed
constexpr uint64_t kSeedModel = 1;
constexpr uint64_t kSeedOrder = 2;
constexpr uint64_t kSeedAugment = 3;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// one JSON object per scalar per line; log.txt carries free-form notes.
// Both files open in append mode so reruns never destroy history.
struct ScalarLogger {
  std::ofstream jsonl;
  std::ofstream text;
  bool verbose = false;

  void open(const fs::path& dir) {
    jsonl.open(dir / "scalars.jsonl", std::ios::app);
    text.open(dir / "log.txt", std::ios::app);
    if (!jsonl || !text)
      throw Error(ErrKind::Io, "cannot open training logs", dir.string());
  }

  void scalar(int64_t step, int64_t epoch, const std::string& name,
              double value, double lr) {
    jsonl << "{\"step\":" << step << ",\"epoch\":" << epoch << ",\"loss\":\""
          << name << "\",\"value\":" << fmt_double(value)
          << ",\"lr\":" << fmt_double(lr) << "}\n";
    jsonl.flush();
  }

  void note(const std::string& line) {
    text << line << "\n";
    text.flush();
    if (verbose) std::cout << line << "\n";
  }
};

ElementType element_for(Dtype d) {
  switch (d) {
    case Dtype::F32: return ElementType::F32;
    case Dtype::F64: return ElementType::F64;
    case Dtype::U8: return ElementType::U8;
    case Dtype::I64: return ElementType::I32;
  }
  return ElementType::F32;
}

std::string sanitize_source(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (c == ':' || c == '/' || c == '\\') c = '_';
  return out;
}

}  // namespace

double plateau_step(PlateauState& st, double metric) {
  if (!st.has_best) {
    st.has_best = true;
    st.best = metric;
    st.bad = 0;
    return st.lr;
  }
  if (metric < st.best - st.threshold) {
    st.best = metric;
    st.bad = 0;
    return st.lr;
  }
  if (++st.bad > st.patience) {
    st.lr *= st.factor;
    st.bad = 0;
  }
  return st.lr;
}

EarlyStopDecision early_stopping_check(EarlyStopState& st, double metric) {
  EarlyStopDecision d;
  const bool better =
      !st.has_best || (st.mode_min ? metric < st.best - st.min_delta
                                   : metric > st.best + st.min_delta);
  if (better) {
    st.has_best = true;
    st.best = metric;
    st.stale = 0;
    d.improved = true;
  } else {
    ++st.stale;
  }
  d.stop = st.stale > st.patience;
  return d;
}

void ema_update(std::vector<Tensor>& shadow,
                const std::vector<Parameter>& params, double decay) {
  if (decay == 0.0) return;
  if (shadow.size() != params.size())
    throw Error(ErrKind::Argument, "ema_update: " +
                                       std::to_string(shadow.size()) +
                                       " shadows vs " +
                                       std::to_string(params.size()) +
                                       " parameters");
  for (size_t i = 0; i < shadow.size(); ++i) {
    Tensor& e = shadow[i];
    const Tensor& p = params[i].value;
    if (e.numel() != p.numel() || e.dtype() != p.dtype())
      throw Error(ErrKind::Shape,
                  "ema_update: shadow mismatch at '" + params[i].name + "'");
    if (e.dtype() == Dtype::F32) {
      auto es = e.data<float>();
      auto ps = p.data<float>();
      for (int64_t j = 0; j < e.numel(); ++j)
        es[j] = static_cast<float>(decay * static_cast<double>(es[j]) +
                                   (1.0 - decay) * static_cast<double>(ps[j]));
    } else if (e.dtype() == Dtype::F64) {
      auto es = e.data<double>();
      auto ps = p.data<double>();
      for (int64_t j = 0; j < e.numel(); ++j)
        es[j] = decay * es[j] + (1.0 - decay) * ps[j];
    } else {
      throw Error(ErrKind::Type, "ema_update: parameters must be float");
    }
  }
}

// ---------------------------------------------------------------------------
// checkpoint container

namespace {

constexpr char kMagic[8] = {'V', 'P', 'C', 'K', 'P', 'T', '0', '1'};

Error bad_checkpoint(const fs::path& file, const std::string& why) {
  return Error(ErrKind::CheckpointLoad, why, file.string());
}

}  // namespace

void write_checkpoint(const std::filesystem::path& file,
                      const std::vector<Parameter>& params,
                      const CheckpointInfo& info) {
  nlohmann::json manifest;
  manifest["format"] = "voxelpipe-checkpoint";
  manifest["version"] = 1;
  manifest["train_name"] = info.train_name;
  manifest["epoch"] = info.epoch;
  manifest["step"] = info.step;
  manifest["lr"] = info.lr;
  manifest["monitored"] = info.monitored;
  nlohmann::json tensors = nlohmann::json::array();
  for (const Parameter& p : params) {
    nlohmann::json t;
    t["name"] = p.name;
    t["dtype"] = dtype_name(p.value.dtype());
    t["shape"] = p.value.shape();
    tensors.push_back(std::move(t));
  }
  manifest["tensors"] = std::move(tensors);
  const std::string m = manifest.dump();

  std::ofstream out(file, std::ios::binary);
  if (!out)
    throw Error(ErrKind::Io, "cannot write checkpoint", file.string());
  out.write(kMagic, sizeof kMagic);
  char lenb[8];
  const uint64_t len = m.size();
  for (size_t i = 0; i < 8; ++i)
    lenb[i] = static_cast<char>((len >> (8 * i)) & 0xff);
  out.write(lenb, sizeof lenb);
  out.write(m.data(), static_cast<std::streamsize>(m.size()));
  for (const Parameter& p : params)
    out.write(static_cast<const char*>(p.value.raw()),
              static_cast<std::streamsize>(p.value.byte_size()));
  out.close();
  if (!out)
    throw Error(ErrKind::Io, "cannot write checkpoint", file.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw bad_checkpoint(file, "cannot open checkpoint");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();

  if (bytes.size() < sizeof kMagic + 8 ||
      std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw bad_checkpoint(file, "not a checkpoint file");
  uint64_t len = 0;
  for (size_t i = 0; i < 8; ++i)
    len |= static_cast<uint64_t>(
               static_cast<unsigned char>(bytes[sizeof kMagic + i]))
           << (8 * i);
  const size_t header = sizeof kMagic + 8;
  if (bytes.size() < header + len)
    throw bad_checkpoint(file, "manifest truncated");

  Checkpoint ck;
  size_t offset = header + len;
  try {
    const nlohmann::json manifest =
        nlohmann::json::parse(bytes.substr(header, len));
    if (manifest.at("format").get<std::string>() != "voxelpipe-checkpoint")
      throw bad_checkpoint(file, "unknown checkpoint format");
    if (manifest.at("version").get<int64_t>() != 1)
      throw bad_checkpoint(file, "unsupported checkpoint version");
    ck.info.train_name = manifest.at("train_name").get<std::string>();
    ck.info.epoch = manifest.at("epoch").get<int64_t>();
    ck.info.step = manifest.at("step").get<int64_t>();
    ck.info.lr = manifest.at("lr").get<double>();
    ck.info.monitored = manifest.at("monitored").get<double>();
    for (const nlohmann::json& t : manifest.at("tensors")) {
      Parameter p;
      p.name = t.at("name").get<std::string>();
      const Dtype dt = dtype_from_name(t.at("dtype").get<std::string>());
      const std::vector<int64_t> shape =
          t.at("shape").get<std::vector<int64_t>>();
      p.value = Tensor::zeros(shape, dt);
      const size_t nbytes = p.value.byte_size();
      if (offset + nbytes > bytes.size())
        throw bad_checkpoint(file, "payload truncated");
      std::memcpy(p.value.raw(), bytes.data() + offset, nbytes);
      offset += nbytes;
      ck.params.push_back(std::move(p));
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw bad_checkpoint(file, std::string("malformed manifest: ") + e.what());
  }
  if (offset != bytes.size())
    throw bad_checkpoint(file, "trailing bytes after payload");
  return ck;
}

void load_parameters(UNetModel& model, const std::vector<Parameter>& params) {
  if (model.parameters().size() != params.size())
    throw Error(ErrKind::CheckpointLoad,
                "checkpoint has " + std::to_string(params.size()) +
                    " tensors, the model has " +
                    std::to_string(model.parameters().size()));
  for (const Parameter& p : params) {
    Parameter* slot = model.find_parameter(p.name);
    if (!slot)
      throw Error(ErrKind::CheckpointLoad,
                  "parameter '" + p.name + "' does not exist in the model");
    if (slot->value.shape() != p.value.shape() ||
        slot->value.dtype() != p.value.dtype())
      throw Error(ErrKind::CheckpointLoad,
                  "parameter '" + p.name + "' has a shape or dtype mismatch");
    slot->value = p.value;
  }
}

std::filesystem::path next_checkpoint_path(const std::filesystem::path& dir,
                                           std::time_t now) {
  for (;; ++now) {
    const fs::path p = dir / (timestamp_name(now) + ".pt");
    if (!fs::exists(p)) return p;
  }
}

// ---------------------------------------------------------------------------
// gradient accumulation

void GradAccumulator::add(const Tape& tape,
                          const std::vector<ValueId>& param_ids) {
  if (sums_.empty()) sums_.resize(param_ids.size());
  if (sums_.size() != param_ids.size())
    throw Error(ErrKind::Argument, "GradAccumulator: parameter set changed");
  for (size_t i = 0; i < param_ids.size(); ++i) {
    const Tensor g = tape.grad(param_ids[i]);
    std::vector<double>& s = sums_[i];
    if (s.empty()) s.assign(static_cast<size_t>(g.numel()), 0.0);
    if (static_cast<int64_t>(s.size()) != g.numel())
      throw Error(ErrKind::Shape, "GradAccumulator: gradient resized");
    if (g.dtype() == Dtype::F32) {
      auto gs = g.data<float>();
      for (int64_t j = 0; j < g.numel(); ++j) s[j] += gs[j];
    } else if (g.dtype() == Dtype::F64) {
      auto gs = g.data<double>();
      for (int64_t j = 0; j < g.numel(); ++j) s[j] += gs[j];
    } else {
      throw Error(ErrKind::Type, "GradAccumulator: gradients must be float");
    }
  }
  ++count_;
}

void GradAccumulator::add_zero(size_t n_params) {
  if (sums_.empty()) sums_.resize(n_params);
  if (sums_.size() != n_params)
    throw Error(ErrKind::Argument, "GradAccumulator: parameter set changed");
  ++count_;
}

std::vector<Tensor> GradAccumulator::take(
    const std::vector<Parameter>& params) {
  if (count_ == 0)
    throw Error(ErrKind::Argument, "GradAccumulator: empty window");
  if (sums_.size() != params.size())
    throw Error(ErrKind::Argument, "GradAccumulator: parameter set changed");
  const double inv = 1.0 / static_cast<double>(count_);
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    const Tensor& p = params[i].value;
    Tensor g = Tensor::zeros(p.shape(), p.dtype());
    if (!sums_[i].empty()) {
      if (static_cast<int64_t>(sums_[i].size()) != p.numel())
        throw Error(ErrKind::Shape, "GradAccumulator: gradient resized");
      if (p.dtype() == Dtype::F32) {
        auto gs = g.data<float>();
        for (int64_t j = 0; j < p.numel(); ++j)
          gs[j] = static_cast<float>(sums_[i][j] * inv);
      } else {
        auto gs = g.data<double>();
        for (int64_t j = 0; j < p.numel(); ++j) gs[j] = sums_[i][j] * inv;
      }
    }
    out.push_back(std::move(g));
  }
  sums_.clear();
  count_ = 0;
  return out;
}

// ---------------------------------------------------------------------------
// the training loop

TrainResult train(const ConfigDocument& cfg, const Registry& reg,
                  const TrainOptions& opts) {
  if (cfg.kind != ConfigKind::Train)
    throw Error(ErrKind::Argument, "train() needs a training configuration");
  const ConfigNode& t = cfg.root.at("Trainer");
  const std::string train_name = t.at("train_name").as_string();

  uint64_t seed = 0;
  if (opts.seed)
    seed = *opts.seed;
  else if (!t.at("manual_seed").is_null())
    seed = static_cast<uint64_t>(t.at("manual_seed").as_int());

  const int64_t epochs = t.at("epochs").as_int();
  const ConfigNode& itv = t.at("it_validation");
  const int64_t it_validation = itv.is_null() ? 0 : itv.as_int();
  const double ema_decay = t.at("ema_decay").as_float();
  const bool save_best = t.at("save_checkpoint_mode").as_string() == "BEST";

  const ConfigNode& es = t.at("EarlyStopping");
  EarlyStopState stopper;
  stopper.patience = es.at("patience").as_int();
  stopper.min_delta = es.at("min_delta").as_float();
  stopper.mode_min = es.at("mode").as_string() == "min";
  std::string monitor;
  if (!es.at("monitor").is_null()) monitor = es.at("monitor").as_string();

  // model and engine keys
  const ModelSection ms = split_model_section(t.at("Model"), reg);
  const double init_gain = ms.engine.at("init_gain").as_float();
  const UNetSpec spec = unet_spec_from_args(ms.bound_args, init_gain);
  UNetModel model(spec, derive_seed(seed, kSeedModel));
  const int64_t nb_batch_per_step = ms.engine.at("nb_batch_per_step").as_int();

  const std::string opath =
      "Trainer.Model." + ms.model_name + ".outputs_criterions";
  const std::vector<CriterionBinding> bindings =
      bindings_from_config(ms.engine.at("outputs_criterions"), reg, opath);
  if (!monitor.empty() && monitor != "total") {
    bool known = false;
    for (const CriterionBinding& b : bindings) known |= b.id() == monitor;
    if (!known)
      throw Error(ErrKind::Schema,
                  "monitor '" + monitor + "' does not name a criterion",
                  "Trainer.EarlyStopping.monitor");
  }

  // optimizer; unset keys fall back to the declared defaults
  const ConfigNode& optn = ms.engine.at("Optimizer");
  AdamWConfig ocfg;
  if (const ConfigNode* v = optn.find("lr")) ocfg.lr = v->as_float();
  if (const ConfigNode* v = optn.find("betas")) {
    ocfg.beta1 = v->at(0).as_float();
    ocfg.beta2 = v->at(1).as_float();
  }
  if (const ConfigNode* v = optn.find("weight_decay"))
    ocfg.weight_decay = v->as_float();
  if (const ConfigNode* v = optn.find("eps")) ocfg.eps = v->as_float();
  AdamW adamw(ocfg);
  double lr = ocfg.lr;

  std::optional<PlateauState> plateau;
  if (const ConfigNode& sch = ms.engine.at("schedulers"); !sch.is_null()) {
    for (const auto& [name, args] : sch.entries()) {
      const ResolvedComponent rc = resolve_component(
          reg, Category::Scheduler, name, args, "Trainer.Model.schedulers");
      if (rc.def->name != "ReduceLROnPlateau")
        throw Error(ErrKind::Unsupported,
                    "only ReduceLROnPlateau can schedule the learning rate",
                    "Trainer.Model.schedulers." + name);
      if (plateau)
        throw Error(ErrKind::Unsupported,
                    "at most one learning-rate scheduler is allowed",
                    "Trainer.Model.schedulers." + name);
      PlateauState st;
      st.nb_step = rc.args.at("nb_step").as_int();
      st.factor = rc.args.at("factor").as_float();
      st.patience = rc.args.at("patience").as_int();
      st.threshold = rc.args.at("threshold").as_float();
      st.lr = lr;
      plateau = st;
    }
  }

  // dataset
  const DataSection data = parse_data_section(t.at("Dataset"), reg);
  if (data.patch.patch_size[0] != 1)
    throw Error(ErrKind::Unsupported,
                "the 2D engine needs patch_size [1, H, W]",
                "Trainer.Dataset.Patch.patch_size");
  std::set<std::string> dests;
  std::vector<std::string> src_names;
  for (const GroupSpec& g : data.groups) {
    dests.insert(g.dest);
    bool seen = false;
    for (const std::string& s : src_names) seen |= s == g.src;
    if (!seen) src_names.push_back(g.src);
  }

  // target groups the criteria read; unknown groups fail before training
  std::set<std::string> referenced;
  for (const CriterionBinding& b : bindings) {
    if (b.target_groups.size() != 1)
      throw Error(ErrKind::Unsupported,
                  "built-in criteria take exactly one target group", opath);
    if (!dests.count(b.target_groups[0]))
      throw Error(ErrKind::MissingTarget,
                  "criterion '" + b.id() + "' targets group '" +
                      b.target_groups[0] +
                      "' which the dataset does not produce",
                  opath);
    referenced.insert(b.target_groups[0]);
  }

  const DatasetIndex index =
      index_dataset(data.sources, src_names, data.subset, data.shuffle, seed);
  SplitResult split = split_validation(index.cases, data.validation);
  if (split.train.empty())
    throw Error(ErrKind::EmptyDataset,
                "validation split leaves no training cases",
                "Trainer.Dataset.validation");

  VolumeCache cache(data.use_cache);
  if (data.use_cache) cache.preload(index);
  std::vector<PreparedCase> train_cases, val_cases;
  for (const Case& c : split.train)
    train_cases.push_back(prepare_case(c, data, cache));
  for (const Case& c : split.validation)
    val_cases.push_back(prepare_case(c, data, cache));

  // data_log sources must resolve before the run starts
  std::vector<DataLogEntry> dumps;
  if (!t.at("data_log").is_null()) {
    const ConfigNode& dl = t.at("data_log");
    for (size_t i = 0; i < dl.size(); ++i) {
      DataLogEntry e = parse_data_log_entry(dl.at(i).as_string());
      if (!dests.count(e.source) && !find_node(model.tree(), e.source))
        throw Error(ErrKind::Graph,
                    "data_log source '" + e.source +
                        "' is neither a dataset group nor a model address",
                    "Trainer.data_log");
      dumps.push_back(std::move(e));
    }
  }

  // workspace: lock, snapshot before the first step, open logs
  const Workspace ws(opts.workspace_root);
  const WorkspaceLock lock(ws.root());
  TrainResult res;
  res.snapshot = write_snapshot(cfg, ws.root(), train_name);
  const fs::path stats_dir = ws.statistics(train_name);
  ScalarLogger log;
  log.verbose = opts.verbose;
  log.open(stats_dir);

  const std::vector<const AugmentationBlock*> copies =
      copy_blocks(data.augmentations);
  const size_t n_copies = copies.empty() ? 1 : copies.size();

  std::vector<Tensor> shadow;
  if (ema_decay > 0.0)
    for (const Parameter& p : model.parameters())
      shadow.push_back(p.value.clone());

  int64_t total_params = 0;
  for (const Parameter& p : model.parameters()) total_params += p.value.numel();
  {
    size_t per_epoch = 0;
    for (const PreparedCase& pc : train_cases)
      per_epoch += pc.grid.size() * n_copies;
    log.note("training '" + train_name + "': " +
             std::to_string(train_cases.size()) + " train / " +
             std::to_string(val_cases.size()) + " validation cases, " +
             std::to_string(per_epoch) + " samples per epoch, " +
             std::to_string(total_params) + " parameters, seed " +
             std::to_string(seed));
  }

  // per-case cache of flipped arrays, keyed by dest and flip mask
  std::vector<std::map<std::string, std::map<size_t, Tensor>>> flip_cache(
      train_cases.size());
  auto flipped = [&](size_t ci, const std::string& dest,
                     const AugmentationRecord& rec) -> Tensor {
    const size_t mask = (rec.flipped[0] ? 4u : 0u) |
                        (rec.flipped[1] ? 2u : 0u) | (rec.flipped[2] ? 1u : 0u);
    const Tensor& base = train_cases[ci].groups.at(dest).array;
    if (mask == 0) return base;
    auto& per_group = flip_cache[ci][dest];
    auto it = per_group.find(mask);
    if (it == per_group.end())
      it = per_group.emplace(mask, flip_tensor(base, rec.flipped)).first;
    return it->second;
  };

  // extracts one sample into the batch builders
  auto add_sample = [&](PreparedCase& pc, auto&& array_of, size_t pos,
                        std::vector<Tensor>& inputs,
                        std::map<std::string, std::vector<Tensor>>& tparts) {
    std::vector<Tensor> parts;
    for (const GroupSpec& g : data.groups)
      if (g.is_input)
        parts.push_back(
            group_patch(g, data.patch, array_of(g.dest), pc.grid, pos));
    inputs.push_back(concat_channels_f32(parts));
    for (const GroupSpec& g : data.groups)
      if (referenced.count(g.dest)) {
        GroupSpec tg = g;
        tg.is_input = false;  // targets take the center slice, zero fill
        tparts[g.dest].push_back(
            group_patch(tg, data.patch, array_of(g.dest), pc.grid, pos));
      }
  };

  auto build_targets =
      [](std::map<std::string, std::vector<Tensor>>& tparts) {
        std::map<std::string, Tensor> targets;
        for (auto& [k, v] : tparts)
          targets.emplace(k, stack_batch(v, v[0].dtype()));
        return targets;
      };

  int64_t gstep = 0;
  int64_t val_index = 0;
  bool stop = false;
  double best_monitored = 0.0;
  fs::path best_file;
  std::vector<fs::path> checkpoint_files;

  // training means since the last validation, used when no split exists
  double run_total = 0.0;
  double run_n = 0.0;
  std::map<std::string, double> run_sums;

  GradAccumulator acc;

  auto evaluate_split = [&]() {
    std::map<std::string, double> sums;
    double wsum = 0.0;
    for (PreparedCase& pc : val_cases) {
      for (size_t p0 = 0; p0 < pc.grid.size();
           p0 += static_cast<size_t>(data.batch_size)) {
        const size_t nb = std::min(static_cast<size_t>(data.batch_size),
                                   pc.grid.size() - p0);
        std::vector<Tensor> inputs;
        std::map<std::string, std::vector<Tensor>> tparts;
        auto identity = [&](const std::string& dest) -> Tensor {
          return pc.groups.at(dest).array;
        };
        for (size_t k = 0; k < nb; ++k)
          add_sample(pc, identity, p0 + k, inputs, tparts);
        const Tensor x = stack_batch(inputs, Dtype::F32);
        std::map<std::string, Tensor> targets = build_targets(tparts);
        Tape tape;
        const ValueId xin = tape.leaf(x);
        const std::vector<ValueId> pids = model.lift_parameters(tape, false);
        const std::map<std::string, ValueId> outs =
            model.forward(tape, xin, pids);
        const LossReport rep =
            compute_losses(tape, bindings, outs, targets, gstep);
        const double bw = static_cast<double>(nb);
        sums["total"] += rep.total_value * bw;
        for (const BindingValue& v : rep.values) sums[v.id] += v.value * bw;
        wsum += bw;
      }
    }
    for (auto& [k, v] : sums) v /= wsum;
    return sums;
  };

  auto dump_data_log = [&](int64_t k) {
    for (const DataLogEntry& e : dumps) {
      const fs::path dir = stats_dir / "data_log" / sanitize_source(e.source);
      std::error_code ec;
      fs::create_directories(dir, ec);
      if (ec)
        throw Error(ErrKind::Io, "cannot create data_log directory",
                    dir.string());
      int64_t written = 0;
      for (size_t ci = 0; ci < train_cases.size() && written < e.count; ++ci) {
        PreparedCase& pc = train_cases[ci];
        for (size_t pos = 0; pos < pc.grid.size() && written < e.count;
             ++pos) {
          Tensor out3;
          if (dests.count(e.source)) {
            const GroupSpec* gs = nullptr;
            for (const GroupSpec& g : data.groups)
              if (g.dest == e.source) gs = &g;
            out3 = group_patch(*gs, data.patch,
                               pc.groups.at(e.source).array, pc.grid, pos);
          } else {
            std::vector<Tensor> parts;
            for (const GroupSpec& g : data.groups)
              if (g.is_input)
                parts.push_back(group_patch(g, data.patch,
                                            pc.groups.at(g.dest).array,
                                            pc.grid, pos));
            const Tensor x =
                stack_batch({concat_channels_f32(parts)}, Dtype::F32);
            const Tensor out = model.forward_collect(x, {e.source})
                                   .at(e.source);
            std::vector<int64_t> s(out.shape().begin() + 1,
                                   out.shape().end());
            out3 = out.reshaped(s);
          }
          Volume v;
          v.array = out3.reshaped({out3.dim(0), 1, out3.dim(1), out3.dim(2)});
          v.element_type = element_for(out3.dtype());
          write_metaimage(v, dir / ("val_" + std::to_string(k) + "_sample_" +
                                    std::to_string(written) + ".mha"));
          ++written;
        }
      }
    }
  };

  auto do_validation = [&](int64_t epoch) {
    ++val_index;
    std::map<std::string, double> means;
    if (!val_cases.empty()) {
      means = evaluate_split();
    } else {
      // no held-out cases: monitor the mean training loss instead
      means["total"] = run_n > 0.0 ? run_total / run_n : 0.0;
      for (const CriterionBinding& b : bindings)
        means[b.id()] = run_n > 0.0 ? run_sums[b.id()] / run_n : 0.0;
    }
    for (const CriterionBinding& b : bindings)
      log.scalar(gstep, epoch, "val:" + b.id(), means.at(b.id()), lr);
    log.scalar(gstep, epoch, "val:total", means.at("total"), lr);
    const double monitored = (monitor.empty() || monitor == "total")
                                 ? means.at("total")
                                 : means.at(monitor);
    run_total = 0.0;
    run_n = 0.0;
    run_sums.clear();

    if (plateau && gstep >= plateau->nb_step) {
      lr = plateau_step(*plateau, monitored);
      adamw.set_lr(lr);
    }
    const EarlyStopDecision d = early_stopping_check(stopper, monitored);
    if (d.improved) best_monitored = monitored;
    if (!save_best || d.improved) {
      std::vector<Parameter> snap;
      const std::vector<Parameter>* src = &model.parameters();
      if (!shadow.empty()) {
        for (size_t i = 0; i < shadow.size(); ++i)
          snap.push_back({model.parameters()[i].name, shadow[i]});
        src = &snap;
      }
      const CheckpointInfo info{train_name, epoch, gstep, lr, monitored};
      const fs::path file =
          next_checkpoint_path(ws.checkpoints(train_name), std::time(nullptr));
      write_checkpoint(file, *src, info);
      log.note("[validation " + std::to_string(val_index) + "] checkpoint " +
               file.filename().string() + " monitored " +
               fmt_double(monitored));
      if (save_best) {
        if (!best_file.empty()) {
          std::error_code ec;
          fs::remove(best_file, ec);
        }
        best_file = file;
        checkpoint_files.assign(1, file);
      } else {
        checkpoint_files.push_back(file);
      }
    } else {
      log.note("[validation " + std::to_string(val_index) + "] monitored " +
               fmt_double(monitored) + " (no improvement)");
    }
    if (d.stop) {
      stop = true;
      log.note("early stopping: " + std::to_string(stopper.stale) +
               " validations without improvement");
    }
    dump_data_log(val_index);
  };

  struct Sample {
    size_t case_idx;
    size_t copy;
    size_t pos;
  };

  for (int64_t epoch = 0; epoch < epochs && !stop; ++epoch) {
    res.epochs_run = epoch + 1;

    std::vector<Sample> samples;
    for (size_t ci = 0; ci < train_cases.size(); ++ci)
      for (size_t copy = 0; copy < n_copies; ++copy)
        for (size_t pos = 0; pos < train_cases[ci].grid.size(); ++pos)
          samples.push_back({ci, copy, pos});
    Rng order_rng(derive_seed(seed, kSeedOrder, static_cast<uint64_t>(epoch)));
    shuffle_indices(samples, order_rng);

    // one draw per (case, copy) per epoch unless augmentations are inline
    std::vector<std::vector<AugmentationRecord>> recs(
        train_cases.size(), std::vector<AugmentationRecord>(n_copies));
    if (!copies.empty() && !data.inline_augmentations)
      for (size_t ci = 0; ci < train_cases.size(); ++ci)
        for (size_t copy = 0; copy < n_copies; ++copy) {
          Rng r(derive_seed(seed, kSeedAugment, static_cast<uint64_t>(epoch),
                            ci, copy));
          recs[ci][copy] = draw_block(*copies[copy], r);
        }

    // step scalars accumulated over the current accumulation window
    std::map<std::string, double> win_sums;
    double win_total = 0.0;
    double win_n = 0.0;

    for (size_t b0 = 0; b0 < samples.size() && !stop;
         b0 += static_cast<size_t>(data.batch_size)) {
      const size_t nb = std::min(static_cast<size_t>(data.batch_size),
                                 samples.size() - b0);
      std::vector<Tensor> inputs;
      std::map<std::string, std::vector<Tensor>> tparts;
      for (size_t k = 0; k < nb; ++k) {
        const Sample& s = samples[b0 + k];
        PreparedCase& pc = train_cases[s.case_idx];
        AugmentationRecord rec;
        if (!copies.empty()) {
          if (data.inline_augmentations) {
            Rng r(derive_seed(seed, kSeedAugment,
                              static_cast<uint64_t>(epoch), s.case_idx,
                              s.copy, s.pos));
            rec = draw_block(*copies[s.copy], r);
          } else {
            rec = recs[s.case_idx][s.copy];
          }
        }
        auto augmented = [&](const std::string& dest) -> Tensor {
          return flipped(s.case_idx, dest, rec);
        };
        add_sample(pc, augmented, s.pos, inputs, tparts);
      }
      const Tensor x = stack_batch(inputs, Dtype::F32);
      std::map<std::string, Tensor> targets = build_targets(tparts);

      Tape tape;
      const ValueId xin = tape.leaf(x);
      const std::vector<ValueId> pids = model.lift_parameters(tape, true);
      const std::map<std::string, ValueId> outs =
          model.forward(tape, xin, pids);
      LossReport rep;
      try {
        rep = compute_losses(tape, bindings, outs, targets, gstep);
      } catch (const Error& e) {
        if (e.kind() == ErrKind::NonFiniteLoss)
          throw Error(e.kind(),
                      e.message() + " at optimizer step " +
                          std::to_string(gstep),
                      e.path());
        throw;
      }
      if (tape.requires_grad(rep.total)) {
        tape.backward(rep.total);
        acc.add(tape, pids);
      } else {
        acc.add_zero(model.parameters().size());
      }

      const double bw = static_cast<double>(nb);
      win_total += rep.total_value * bw;
      run_total += rep.total_value * bw;
      win_n += bw;
      run_n += bw;
      for (const BindingValue& v : rep.values) {
        win_sums[v.id] += v.value * bw;
        run_sums[v.id] += v.value * bw;
      }

      const bool epoch_done = b0 + nb >= samples.size();
      if (acc.batches() == nb_batch_per_step || epoch_done) {
        const std::vector<Tensor> grads = acc.take(model.parameters());
        std::vector<Tensor> views;
        views.reserve(model.parameters().size());
        for (Parameter& p : model.parameters()) views.push_back(p.value);
        adamw.set_lr(lr);
        adamw.step(views, grads);
        if (!shadow.empty())
          ema_update(shadow, model.parameters(), ema_decay);
        ++gstep;
        res.steps = gstep;

        for (const CriterionBinding& b : bindings)
          log.scalar(gstep, epoch, b.id(), win_sums[b.id()] / win_n, lr);
        log.scalar(gstep, epoch, "total", win_total / win_n, lr);
        win_sums.clear();
        win_total = 0.0;
        win_n = 0.0;

        if (it_validation > 0 && gstep % it_validation == 0)
          do_validation(epoch);
      }
    }
    if (!stop && it_validation == 0) do_validation(epoch);
  }

  res.validations = val_index;
  res.early_stopped = stop;
  res.final_lr = lr;
  res.best_monitored = stopper.has_best ? stopper.best : best_monitored;
  res.checkpoints = checkpoint_files;
  log.note("training '" + train_name + "' finished: " +
           std::to_string(res.steps) + " steps, " +
           std::to_string(res.validations) + " validations" +
           (res.early_stopped ? " (early stopped)" : ""));
  return res;
}

}  // namespace voxelpipe
