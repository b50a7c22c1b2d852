// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0
//
// Configuration layer: YAML tree, registry, schemas, snapshots. The three
// files under tests/corpus/ are the normative examples; they must parse
// with zero diagnostics and round-trip structurally.

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "voxelpipe/common/error.hpp"
#include "voxelpipe/config/schema.hpp"
#include "voxelpipe/config/yaml_io.hpp"

using namespace voxelpipe;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path corpus(const char* name) { return fs::path(VP_CORPUS_DIR) / name; }

const Registry& reg() {
  static const Registry r = Registry::with_builtins();
  return r;
}

// a unique scratch directory, removed on destruction
struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("vp_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static inline int counter = 0;
};

ConfigNode without_key(const ConfigNode& map, const std::string& key) {
  ConfigNode out = ConfigNode::mapping();
  for (const auto& [k, v] : map.entries())
    if (k != key) out.set(k, v);
  return out;
}

ConfigNode delete_at(const ConfigNode& node,
                     const std::vector<std::string>& segs, size_t depth = 0) {
  if (depth + 1 == segs.size()) return without_key(node, segs[depth]);
  ConfigNode out = ConfigNode::mapping();
  for (const auto& [k, v] : node.entries())
    out.set(k, k == segs[depth] ? delete_at(v, segs, depth + 1) : v);
  return out;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    const size_t pos = s.find(sep, start);
    parts.push_back(s.substr(
        start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) return parts;
    start = pos + 1;
  }
}

// collects every mapping key path, '/'-separated
void collect_key_paths(const ConfigNode& node, const std::string& prefix,
                       std::vector<std::string>& out) {
  if (node.kind() != NodeKind::Mapping) return;
  for (const auto& [k, v] : node.entries()) {
    const std::string p = prefix.empty() ? k : prefix + "/" + k;
    out.push_back(p);
    collect_key_paths(v, p, out);
  }
}

}  // namespace

TEST_CASE("yaml: scalar classification") {
  const ConfigNode n = parse_yaml(
      "a: None\n"
      "b: 'None'\n"
      "c: null\n"
      "d: ~\n"
      "e: true\n"
      "f: False\n"
      "g: 42\n"
      "h: -17\n"
      "i: 1e-06\n"
      "j: 0.5\n"
      "k: hello\n"
      "l: '123'\n"
      "m: MASK:MASK\n");
  CHECK(n.at("a").is_null());
  CHECK(n.at("b").kind() == NodeKind::String);
  CHECK(n.at("b").as_string() == "None");
  CHECK(n.at("c").is_null());
  CHECK(n.at("d").is_null());
  CHECK(n.at("e").as_bool());
  CHECK_FALSE(n.at("f").as_bool());
  CHECK(n.at("g").as_int() == 42);
  CHECK(n.at("h").as_int() == -17);
  CHECK(n.at("i").kind() == NodeKind::Float);
  CHECK(n.at("i").as_float() == doctest::Approx(1e-06).epsilon(1e-12));
  CHECK(n.at("i").lexeme() == "1e-06");
  CHECK(n.at("j").as_float() == 0.5);
  CHECK(n.at("k").as_string() == "hello");
  CHECK(n.at("l").kind() == NodeKind::String);
  CHECK(n.at("m").as_string() == "MASK:MASK");
}

TEST_CASE("yaml: duplicate keys are a syntax error") {
  try {
    parse_yaml("a: 1\na: 2\n");
    FAIL("expected SyntaxError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrKind::Syntax);
    CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
  }
}

TEST_CASE("yaml: syntax errors carry a location") {
  try {
    parse_yaml("a: [1, 2\n");
    FAIL("expected SyntaxError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrKind::Syntax);
    CHECK(std::string(e.what()).find("line") != std::string::npos);
  }
}

TEST_CASE("yaml: corpus files round-trip structurally and textually") {
  for (const char* name : {"Config.yml", "Prediction.yml", "Evaluation.yml"}) {
    CAPTURE(name);
    const std::string text = read_file(corpus(name));
    const ConfigNode a = parse_yaml(text, name);
    const std::string s1 = emit_yaml(a);
    const ConfigNode b = parse_yaml(s1, name);
    CHECK(a == b);
    // emission is a fixpoint after one round
    CHECK(emit_yaml(b) == s1);
  }
}

TEST_CASE("yaml: corpus key order is preserved") {
  const ConfigNode root = parse_yaml(read_file(corpus("Config.yml")));
  const auto& entries = root.at("Trainer").entries();
  const std::vector<std::string> expected = {
      "Model",          "Dataset",      "train_name",
      "manual_seed",    "epochs",       "it_validation",
      "autocast",       "gradient_checkpoints", "gpu_checkpoints",
      "ema_decay",      "data_log",     "save_checkpoint_mode",
      "EarlyStopping"};
  REQUIRE(entries.size() == expected.size());
  for (size_t i = 0; i < expected.size(); ++i)
    CHECK(entries[i].first == expected[i]);
}

TEST_CASE("registry: qualified names fall back to the plain name") {
  const ComponentDef& d = reg().resolve(Category::Loss, "FocalLoss:FocalLoss");
  CHECK(d.name == "FocalLoss");
  const ComponentDef& d2 = reg().resolve(Category::Loss, "CustomLoss:FocalLoss");
  CHECK(d2.name == "FocalLoss");
}

TEST_CASE("registry: unknown names suggest the nearest component") {
  try {
    reg().resolve(Category::Metric, "Dicee");
    FAIL("expected UnknownComponent");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrKind::UnknownComponent);
    CHECK(std::string(e.what()).find("Dicee") != std::string::npos);
    CHECK(std::string(e.what()).find("'Dice'") != std::string::npos);
  }
}

TEST_CASE("registry: bind_args fills defaults and checks shapes") {
  const ComponentDef& focal = reg().resolve(Category::Loss, "FocalLoss");

  SUBCASE("empty args get every default") {
    const ConfigNode out = bind_args(focal, ConfigNode::mapping(), "p");
    CHECK(out.at("gamma").as_float() == 2.0);
    CHECK(out.at("alpha").is_null());
    CHECK(out.at("reduction").as_string() == "mean");
  }
  SUBCASE("null args mean an empty mapping") {
    const ConfigNode out = bind_args(focal, ConfigNode::null(), "p");
    CHECK(out.at("gamma").as_float() == 2.0);
  }
  SUBCASE("unknown argument") {
    ConfigNode args = ConfigNode::mapping();
    args.set("gama", ConfigNode::floating(1.0));
    try {
      bind_args(focal, args, "p");
      FAIL("expected ArgumentError");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrKind::Argument);
      CHECK(e.path() == "p.gama");
    }
  }
  SUBCASE("missing required argument") {
    const ComponentDef& clip = reg().resolve(Category::Transform, "Clip");
    ConfigNode args = ConfigNode::mapping();
    args.set("min_value", ConfigNode::integer(0));
    try {
      bind_args(clip, args, "p");
      FAIL("expected ArgumentError");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrKind::Argument);
      CHECK(e.path() == "p.max_value");
    }
  }
  SUBCASE("wrong shape") {
    ConfigNode args = ConfigNode::mapping();
    args.set("gamma", ConfigNode::string("two"));
    try {
      bind_args(focal, args, "p");
      FAIL("expected TypeError");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrKind::Type);
      CHECK(e.path() == "p.gamma");
    }
  }
  SUBCASE("null rejected for non-nullable parameters") {
    ConfigNode args = ConfigNode::mapping();
    args.set("gamma", ConfigNode::null());
    CHECK_THROWS_AS(bind_args(focal, args, "p"), Error);
  }
}

TEST_CASE("registry: frozen registries reject registration") {
  Registry r = Registry::with_builtins();
  r.freeze();
  CHECK_THROWS_AS(r.add(Category::Loss, "X", {}), Error);
}

TEST_CASE("registry: duplicate names rejected") {
  Registry r;
  r.add(Category::Loss, "X", {});
  try {
    r.add(Category::Loss, "X", {});
    FAIL("expected DuplicateName");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrKind::DuplicateName);
  }
}

TEST_CASE("resolve_component binds declared args") {
  ConfigNode args = ConfigNode::mapping();
  args.set("gamma", ConfigNode::floating(2.0));
  ConfigNode alpha = ConfigNode::sequence(
      {ConfigNode::floating(0.5), ConfigNode::integer(3),
       ConfigNode::floating(1.5)});
  args.set("alpha", alpha);
  args.set("reduction", ConfigNode::string("mean"));
  const ResolvedComponent rc = resolve_component(
      reg(), Category::Loss, "CustomLoss:FocalLoss", args, "p");
  CHECK(rc.def->name == "FocalLoss");
  CHECK(rc.args.at("alpha").size() == 3);

  ConfigNode margs = ConfigNode::mapping();
  margs.set("smooth", ConfigNode::floating(1e-06, "1e-06"));
  const ResolvedComponent mc =
      resolve_component(reg(), Category::Metric, "Dice", margs, "p");
  CHECK(mc.def->name == "Dice");
  CHECK(mc.args.at("smooth").as_float() == doctest::Approx(1e-06));
}

TEST_CASE("parse_config: training corpus") {
  const ConfigDocument doc = load_config_file(corpus("Config.yml"),
                                              ConfigKind::Train, reg());
  CHECK(doc.kind == ConfigKind::Train);

  const ConfigNode& ps = doc.at_path("Trainer.Dataset.Patch.patch_size");
  REQUIRE(ps.size() == 3);
  CHECK(ps.at(size_t(0)).as_int() == 1);
  CHECK(ps.at(size_t(1)).as_int() == 224);
  CHECK(ps.at(size_t(2)).as_int() == 288);
  CHECK(doc.at_path("Trainer.Dataset.Patch.extend_slice").as_int() == 2);
  CHECK(doc.at_path("Trainer.Dataset.Patch.overlap").is_null());
  CHECK(doc.at_path("Trainer.manual_seed").as_int() == 32);
  CHECK(doc.at_path("Trainer.epochs").as_int() == 100);
  CHECK(doc.at_path("Trainer.save_checkpoint_mode").as_string() == "BEST");

  const ConfigNode& ch = doc.at_path("Trainer.Model.UNet.channels");
  REQUIRE(ch.size() == 5);
  CHECK(ch.at(size_t(0)).as_int() == 1);
  CHECK(ch.at(size_t(4)).as_int() == 512);

  const ConfigNode& alpha = doc.at_path(
      "Trainer.Model.UNet.outputs_criterions.UNetBlock_0:Head:Softmax."
      "targets_criterions.MASK.criterions_loader.FocalLoss:FocalLoss.alpha");
  REQUIRE(alpha.size() == 3);
  CHECK(alpha.at(size_t(0)).as_float() == 0.5);
  CHECK(alpha.at(size_t(1)).as_int() == 3);
  CHECK(alpha.at(size_t(2)).as_float() == 1.5);

  CHECK(doc.find_path("Trainer.Dataset.Patch.missing") == nullptr);
  CHECK_THROWS_AS(doc.at_path("Trainer.nope"), Error);
}

TEST_CASE("parse_config: prediction corpus") {
  const ConfigDocument doc = load_config_file(corpus("Prediction.yml"),
                                              ConfigKind::Prediction, reg());
  CHECK(doc.at_path("Predictor.combine").as_string() == "Mean");

  const ConfigNode& augs = doc.at_path("Predictor.Dataset.augmentations");
  REQUIRE(augs.size() == 2);
  CHECK(augs.entries()[0].first == "DataAugmentation_0");
  CHECK(augs.entries()[1].first == "DataAugmentation_1");
  const ConfigNode& f0 = doc.at_path(
      "Predictor.Dataset.augmentations.DataAugmentation_0."
      "data_augmentations.Flip.f_prob");
  CHECK(f0.at(size_t(1)).as_int() == 1);
  const ConfigNode& f1 = doc.at_path(
      "Predictor.Dataset.augmentations.DataAugmentation_1."
      "data_augmentations.Flip.f_prob");
  CHECK(f1.at(size_t(2)).as_int() == 1);

  CHECK(doc.at_path("Predictor.Model.UNet.outputs_criterions").is_null());
  const ConfigNode& od = doc.at_path("Predictor.outputs_dataset");
  REQUIRE(od.size() == 1);
  CHECK(od.entries()[0].first == "UNetBlock_0:Head:Softmax");
  CHECK(doc.at_path("Predictor.outputs_dataset.UNetBlock_0:Head:Softmax."
                    "OutputDataset.same_as_group")
            .as_string() == "MASK:MASK");
}

TEST_CASE("parse_config: evaluation corpus") {
  const ConfigDocument doc = load_config_file(corpus("Evaluation.yml"),
                                              ConfigKind::Evaluation, reg());
  CHECK(doc.at_path("Evaluator.metrics.MASK.targets_criterions.MASK_Pred."
                    "criterions_loader.Dice.smooth")
            .as_float() == doctest::Approx(1e-06).epsilon(1e-12));
  const ConfigNode& files = doc.at_path("Evaluator.Dataset.dataset_filenames");
  REQUIRE(files.size() == 2);
  const DatasetFilenameSpec s0 =
      parse_dataset_filename(files.at(size_t(0)).as_string());
  CHECK(s0.path == "./Dataset");
  CHECK(s0.tag == "a");
  CHECK(s0.ext == "mha");
  const DatasetFilenameSpec s1 =
      parse_dataset_filename(files.at(size_t(1)).as_string());
  CHECK(s1.path == "./Predictions/UNet/Dataset/");
  CHECK(s1.tag == "i");
  CHECK(s1.ext == "mha");
}

TEST_CASE("parse_config: empty trainer reports the first missing key") {
  try {
    parse_config("Trainer: {}", ConfigKind::Train, reg());
    FAIL("expected SchemaError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrKind::Schema);
    CHECK(e.path() == "Trainer.Model");
  }
}

TEST_CASE("parse_config: corpus revalidates after emission") {
  const struct {
    const char* name;
    ConfigKind kind;
  } cases[] = {{"Config.yml", ConfigKind::Train},
               {"Prediction.yml", ConfigKind::Prediction},
               {"Evaluation.yml", ConfigKind::Evaluation}};
  for (const auto& c : cases) {
    CAPTURE(c.name);
    const ConfigDocument doc =
        load_config_file(corpus(c.name), c.kind, reg());
    const ConfigDocument again =
        parse_config(emit_yaml(doc.root), c.kind, reg(), c.name);
    CHECK(doc == again);
  }
}

TEST_CASE("parse_config: rejected feature toggles") {
  const std::string text = read_file(corpus("Config.yml"));
  const ConfigNode root = parse_yaml(text);

  auto mutate = [&](const std::string& dotted, ConfigNode value) {
    ConfigNode copy = root;
    ConfigNode* cur = &copy;
    const auto segs = split_on(dotted, '.');
    for (size_t i = 0; i + 1 < segs.size(); ++i) cur = cur->find(segs[i]);
    cur->set(segs.back(), std::move(value));
    return emit_yaml(copy);
  };

  auto expect_kind = [&](const std::string& yaml, ErrKind kind,
                         const std::string& path) {
    try {
      parse_config(yaml, ConfigKind::Train, reg());
      FAIL("expected error at ", path);
    } catch (const Error& e) {
      CHECK(e.kind() == kind);
      CHECK(e.path() == path);
    }
  };

  expect_kind(mutate("Trainer.autocast", ConfigNode::boolean(true)),
              ErrKind::Unsupported, "Trainer.autocast");
  expect_kind(mutate("Trainer.gradient_checkpoints", ConfigNode::string("x")),
              ErrKind::Unsupported, "Trainer.gradient_checkpoints");
  expect_kind(mutate("Trainer.Model.UNet.attention", ConfigNode::boolean(true)),
              ErrKind::Unsupported, "Trainer.Model.UNet.attention");
  expect_kind(mutate("Trainer.Model.UNet.dim", ConfigNode::integer(3)),
              ErrKind::Unsupported, "Trainer.Model.UNet.dim");
  expect_kind(mutate("Trainer.Model.UNet.downsample_mode",
                     ConfigNode::string("AVGPOOL")),
              ErrKind::Unsupported, "Trainer.Model.UNet.downsample_mode");

  expect_kind(mutate("Trainer.epochs", ConfigNode::string("many")),
              ErrKind::Type, "Trainer.epochs");
  expect_kind(mutate("Trainer.Dataset.shuffle", ConfigNode::integer(1)),
              ErrKind::Type, "Trainer.Dataset.shuffle");
  expect_kind(mutate("Trainer.ema_decay", ConfigNode::floating(1.0)),
              ErrKind::Schema, "Trainer.ema_decay");
  expect_kind(mutate("Trainer.save_checkpoint_mode", ConfigNode::string("NO")),
              ErrKind::Schema, "Trainer.save_checkpoint_mode");
  expect_kind(mutate("Trainer.Dataset.Patch.overlap", ConfigNode::integer(1)),
              ErrKind::Schema, "Trainer.Dataset.Patch.overlap");
  expect_kind(mutate("Trainer.Dataset.Patch.patch_size",
                     ConfigNode::sequence({ConfigNode::integer(4),
                                           ConfigNode::integer(224),
                                           ConfigNode::integer(288)})),
              ErrKind::Schema, "Trainer.Dataset.Patch.extend_slice");

  // an unknown key anywhere is an error, not a warning
  {
    ConfigNode copy = root;
    copy.find("Trainer")->set("extra_key", ConfigNode::integer(1));
    expect_kind(emit_yaml(copy), ErrKind::Schema, "Trainer.extra_key");
  }

  // a misspelled component name names the nearest match
  {
    ConfigNode copy = root;
    ConfigNode* tr = copy.find("Trainer")
                         ->find("Dataset")
                         ->find("groups_src")
                         ->find("CT")
                         ->find("groups_dest")
                         ->find("CT")
                         ->find("transforms");
    ConfigNode renamed = ConfigNode::mapping();
    for (const auto& [k, v] : tr->entries())
      renamed.set(k == "Clip" ? "Clp" : k, v);
    *tr = renamed;
    try {
      parse_config(emit_yaml(copy), ConfigKind::Train, reg());
      FAIL("expected UnknownComponent");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrKind::UnknownComponent);
      CHECK(std::string(e.what()).find("'Clip'") != std::string::npos);
    }
  }
}

TEST_CASE("parse_config: single-key deletions from required paths") {
  const ConfigNode root = parse_yaml(read_file(corpus("Config.yml")));
  const std::string M = "Trainer/Model/UNet";
  const std::string OC = M + "/outputs_criterions/UNetBlock_0:Head:Softmax";
  const std::string CRIT =
      OC + "/targets_criterions/MASK/criterions_loader/FocalLoss:FocalLoss";
  const std::string D = "Trainer/Dataset";
  const std::string CTD = D + "/groups_src/CT/groups_dest/CT";

  // (deleted key path, path named by the resulting SchemaError)
  const std::vector<std::pair<std::string, std::string>> required = {
      {"Trainer", "Trainer"},
      {"Trainer/Model", "Trainer.Model"},
      {"Trainer/Model/classpath", "Trainer.Model.classpath"},
      {"Trainer/Model/UNet", "Trainer.Model"},
      {M + "/Optimizer", "Trainer.Model.UNet.Optimizer"},
      {M + "/Optimizer/name", "Trainer.Model.UNet.Optimizer.name"},
      {M + "/schedulers", "Trainer.Model.UNet.schedulers"},
      {M + "/schedulers/ReduceLROnPlateau", "Trainer.Model.UNet.schedulers"},
      {M + "/schedulers/ReduceLROnPlateau/factor",
       "Trainer.Model.UNet.schedulers.ReduceLROnPlateau.factor"},
      {M + "/schedulers/ReduceLROnPlateau/patience",
       "Trainer.Model.UNet.schedulers.ReduceLROnPlateau.patience"},
      {M + "/schedulers/ReduceLROnPlateau/threshold",
       "Trainer.Model.UNet.schedulers.ReduceLROnPlateau.threshold"},
      {M + "/outputs_criterions", "Trainer.Model.UNet.outputs_criterions"},
      {OC, "Trainer.Model.UNet.outputs_criterions"},
      {OC + "/targets_criterions",
       "Trainer.Model.UNet.outputs_criterions.UNetBlock_0:Head:Softmax."
       "targets_criterions"},
      {OC + "/targets_criterions/MASK",
       "Trainer.Model.UNet.outputs_criterions.UNetBlock_0:Head:Softmax."
       "targets_criterions"},
      {OC + "/targets_criterions/MASK/criterions_loader",
       "Trainer.Model.UNet.outputs_criterions.UNetBlock_0:Head:Softmax."
       "targets_criterions.MASK.criterions_loader"},
      {CRIT,
       "Trainer.Model.UNet.outputs_criterions.UNetBlock_0:Head:Softmax."
       "targets_criterions.MASK.criterions_loader"},
      {CRIT + "/is_loss",
       "Trainer.Model.UNet.outputs_criterions.UNetBlock_0:Head:Softmax."
       "targets_criterions.MASK.criterions_loader.FocalLoss:FocalLoss."
       "is_loss"},
      {CRIT + "/schedulers",
       "Trainer.Model.UNet.outputs_criterions.UNetBlock_0:Head:Softmax."
       "targets_criterions.MASK.criterions_loader.FocalLoss:FocalLoss."
       "schedulers"},
      {CRIT + "/schedulers/Constant",
       "Trainer.Model.UNet.outputs_criterions.UNetBlock_0:Head:Softmax."
       "targets_criterions.MASK.criterions_loader.FocalLoss:FocalLoss."
       "schedulers"},
      {CRIT + "/schedulers/Constant/value",
       "Trainer.Model.UNet.outputs_criterions.UNetBlock_0:Head:Softmax."
       "targets_criterions.MASK.criterions_loader.FocalLoss:FocalLoss."
       "schedulers.Constant.value"},
      {M + "/dim", "Trainer.Model.UNet.dim"},
      {M + "/nb_batch_per_step", "Trainer.Model.UNet.nb_batch_per_step"},
      {M + "/init_type", "Trainer.Model.UNet.init_type"},
      {M + "/init_gain", "Trainer.Model.UNet.init_gain"},
      {M + "/BlockConfig", "Trainer.Model.UNet.BlockConfig"},
      {M + "/BlockConfig/kernel_size",
       "Trainer.Model.UNet.BlockConfig.kernel_size"},
      {M + "/BlockConfig/stride", "Trainer.Model.UNet.BlockConfig.stride"},
      {M + "/BlockConfig/padding", "Trainer.Model.UNet.BlockConfig.padding"},
      {M + "/BlockConfig/bias", "Trainer.Model.UNet.BlockConfig.bias"},
      {M + "/BlockConfig/activation",
       "Trainer.Model.UNet.BlockConfig.activation"},
      {M + "/BlockConfig/norm_mode",
       "Trainer.Model.UNet.BlockConfig.norm_mode"},
      {M + "/channels", "Trainer.Model.UNet.channels"},
      {M + "/nb_class", "Trainer.Model.UNet.nb_class"},
      {M + "/nb_conv_per_stage", "Trainer.Model.UNet.nb_conv_per_stage"},
      {M + "/downsample_mode", "Trainer.Model.UNet.downsample_mode"},
      {M + "/upsample_mode", "Trainer.Model.UNet.upsample_mode"},
      {M + "/attention", "Trainer.Model.UNet.attention"},
      {M + "/block_type", "Trainer.Model.UNet.block_type"},
      {"Trainer/Dataset", "Trainer.Dataset"},
      {D + "/groups_src", "Trainer.Dataset.groups_src"},
      {D + "/groups_src/CT", "Trainer.Dataset.groups_src"},
      {D + "/groups_src/CT/groups_dest",
       "Trainer.Dataset.groups_src.CT.groups_dest"},
      {CTD, "Trainer.Dataset.groups_src.CT.groups_dest"},
      {CTD + "/transforms",
       "Trainer.Dataset.groups_src.CT.groups_dest.CT.transforms"},
      {CTD + "/patch_transforms",
       "Trainer.Dataset.groups_src.CT.groups_dest.CT.patch_transforms"},
      {CTD + "/is_input",
       "Trainer.Dataset.groups_src.CT.groups_dest.CT.is_input"},
      {CTD + "/transforms/Clip/min_value",
       "Trainer.Dataset.groups_src.CT.groups_dest.CT.transforms.Clip."
       "min_value"},
      {CTD + "/transforms/Clip/max_value",
       "Trainer.Dataset.groups_src.CT.groups_dest.CT.transforms.Clip."
       "max_value"},
      {CTD + "/transforms/Normalize/min_value",
       "Trainer.Dataset.groups_src.CT.groups_dest.CT.transforms.Normalize."
       "min_value"},
      {CTD + "/transforms/ResampleToResolution/spacing",
       "Trainer.Dataset.groups_src.CT.groups_dest.CT.transforms."
       "ResampleToResolution.spacing"},
      {D + "/groups_src/MASK/groups_dest/MASK/transforms/"
           "ResampleToResolution",
       "Trainer.Dataset.groups_src.MASK.groups_dest.MASK.transforms"},
      {D + "/augmentations", "Trainer.Dataset.augmentations"},
      {D + "/augmentations/DataAugmentation_0",
       "Trainer.Dataset.augmentations"},
      {D + "/augmentations/DataAugmentation_0/data_augmentations",
       "Trainer.Dataset.augmentations.DataAugmentation_0.data_augmentations"},
      {D + "/augmentations/DataAugmentation_0/data_augmentations/Flip",
       "Trainer.Dataset.augmentations.DataAugmentation_0.data_augmentations"},
      {D + "/augmentations/DataAugmentation_0/data_augmentations/Flip/prob",
       "Trainer.Dataset.augmentations.DataAugmentation_0.data_augmentations."
       "Flip.prob"},
      {D + "/augmentations/DataAugmentation_0/data_augmentations/Flip/f_prob",
       "Trainer.Dataset.augmentations.DataAugmentation_0.data_augmentations."
       "Flip.f_prob"},
      {D + "/augmentations/DataAugmentation_0/nb",
       "Trainer.Dataset.augmentations.DataAugmentation_0.nb"},
      {D + "/Patch", "Trainer.Dataset.Patch"},
      {D + "/Patch/patch_size", "Trainer.Dataset.Patch.patch_size"},
      {D + "/Patch/overlap", "Trainer.Dataset.Patch.overlap"},
      {D + "/Patch/extend_slice", "Trainer.Dataset.Patch.extend_slice"},
      {D + "/Patch/pad_value", "Trainer.Dataset.Patch.pad_value"},
      {D + "/subset", "Trainer.Dataset.subset"},
      {D + "/shuffle", "Trainer.Dataset.shuffle"},
      {D + "/dataset_filenames", "Trainer.Dataset.dataset_filenames"},
      {D + "/use_cache", "Trainer.Dataset.use_cache"},
      {D + "/batch_size", "Trainer.Dataset.batch_size"},
      {D + "/validation", "Trainer.Dataset.validation"},
      {D + "/inline_augmentations", "Trainer.Dataset.inline_augmentations"},
      {"Trainer/train_name", "Trainer.train_name"},
      {"Trainer/manual_seed", "Trainer.manual_seed"},
      {"Trainer/epochs", "Trainer.epochs"},
      {"Trainer/it_validation", "Trainer.it_validation"},
      {"Trainer/autocast", "Trainer.autocast"},
      {"Trainer/gradient_checkpoints", "Trainer.gradient_checkpoints"},
      {"Trainer/gpu_checkpoints", "Trainer.gpu_checkpoints"},
      {"Trainer/ema_decay", "Trainer.ema_decay"},
      {"Trainer/data_log", "Trainer.data_log"},
      {"Trainer/save_checkpoint_mode", "Trainer.save_checkpoint_mode"},
      {"Trainer/EarlyStopping", "Trainer.EarlyStopping"},
      {"Trainer/EarlyStopping/monitor", "Trainer.EarlyStopping.monitor"},
      {"Trainer/EarlyStopping/patience", "Trainer.EarlyStopping.patience"},
      {"Trainer/EarlyStopping/min_delta", "Trainer.EarlyStopping.min_delta"},
      {"Trainer/EarlyStopping/mode", "Trainer.EarlyStopping.mode"},
  };

  for (const auto& [del, expected_path] : required) {
    CAPTURE(del);
    const ConfigNode mutated = delete_at(root, split_on(del, '/'));
    try {
      parse_config(emit_yaml(mutated), ConfigKind::Train, reg());
      FAIL("expected SchemaError for deletion of ", del);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrKind::Schema);
      CHECK(e.path() == expected_path);
    }
  }

  // deleting a defaulted or replaceable key leaves the document valid
  const std::vector<std::string> still_valid = {
      M + "/Optimizer/lr",
      M + "/Optimizer/betas",
      M + "/Optimizer/weight_decay",
      M + "/schedulers/ReduceLROnPlateau/nb_step",
      CRIT + "/gamma",
      CRIT + "/alpha",
      CRIT + "/reduction",
      CRIT + "/schedulers/Constant/nb_step",
      CTD + "/transforms/Clip",
      CTD + "/transforms/Normalize",
      CTD + "/transforms/Normalize/lazy",
      CTD + "/transforms/Normalize/channels",
      D + "/groups_src/MASK",
  };
  for (const auto& del : still_valid) {
    CAPTURE(del);
    const ConfigNode mutated = delete_at(root, split_on(del, '/'));
    CHECK_NOTHROW(parse_config(emit_yaml(mutated), ConfigKind::Train, reg()));
  }

  // robustness: every key deletion either validates or reports a config
  // error, never anything else
  std::vector<std::string> all_paths;
  collect_key_paths(root, "", all_paths);
  CHECK(all_paths.size() > 100);
  for (const auto& del : all_paths) {
    CAPTURE(del);
    const ConfigNode mutated = delete_at(root, split_on(del, '/'));
    try {
      parse_config(emit_yaml(mutated), ConfigKind::Train, reg());
    } catch (const Error& e) {
      CHECK(is_config_error(e.kind()));
    }
  }
}

TEST_CASE("spec parsers: filenames, addresses, data_log") {
  const DatasetFilenameSpec s = parse_dataset_filename("./Dataset/:a:mha");
  CHECK(s.path == "./Dataset/");
  CHECK(s.tag == "a");
  CHECK(s.ext == "mha");
  CHECK_THROWS_AS(parse_dataset_filename("noseparators"), Error);
  CHECK_THROWS_AS(parse_dataset_filename("./Dataset/:ab:mha"), Error);
  CHECK_THROWS_AS(parse_dataset_filename("./Dataset/:a:"), Error);

  const OutputFilenameSpec o = parse_output_filename("./Dataset:mha");
  CHECK(o.path == "./Dataset");
  CHECK(o.ext == "mha");
  CHECK_THROWS_AS(parse_output_filename("nada"), Error);

  const auto parts = split_address("UNetBlock_0:Head:Softmax");
  REQUIRE(parts.size() == 3);
  CHECK(parts[0] == "UNetBlock_0");
  CHECK(parts[2] == "Softmax");
  CHECK(split_address("Model").size() == 1);
  CHECK_THROWS_AS(split_address(""), Error);
  CHECK_THROWS_AS(split_address("A::B"), Error);

  const DataLogEntry e = parse_data_log_entry("UNetBlock_0:Head:Argmax/IMAGES/5");
  CHECK(e.source == "UNetBlock_0:Head:Argmax");
  CHECK(e.count == 5);
  const DataLogEntry e2 = parse_data_log_entry("CT/IMAGES/5");
  CHECK(e2.source == "CT");
  CHECK_THROWS_AS(parse_data_log_entry("CT/FRAMES/5"), Error);
  CHECK_THROWS_AS(parse_data_log_entry("CT/IMAGES/none"), Error);
  CHECK_THROWS_AS(parse_data_log_entry("CT/IMAGES/0"), Error);
}

TEST_CASE("snapshot: indices increment and round-trip") {
  const ConfigDocument doc = load_config_file(corpus("Config.yml"),
                                              ConfigKind::Train, reg());
  TempDir ws;
  const fs::path p0 = write_snapshot(doc, ws.path, "UNet");
  CHECK(p0.filename() == "Config_0.yml");
  CHECK(p0.parent_path().filename() == "UNet");
  const fs::path p1 = write_snapshot(doc, ws.path, "UNet");
  CHECK(p1.filename() == "Config_1.yml");

  const ConfigDocument back = load_config_file(p0, ConfigKind::Train, reg());
  CHECK(back == doc);
}
