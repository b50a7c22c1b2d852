// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0
//
// Component registry. Every name a configuration can reference lives here,
// keyed by category. Entries carry a parameter signature used for argument
// validation and, for user extensions, a type-erased factory owned by the
// module that understands the concrete type. Registration happens during
// engine start-up; freeze() makes the registry immutable afterwards.

#pragma once

#include <any>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "voxelpipe/config/node.hpp"

namespace voxelpipe {

enum class Category {
  Model,
  Loss,
  Metric,
  Transform,
  Augmentation,
  Scheduler,
  OutputWriter,
  Reduction,  // TTA reduction functions (Mean/Median built in)
};

const char* category_name(Category c);

// Accepted value shape for one parameter; Number accepts Int or Float.
enum class ValueShape { Any, Bool, Int, Float, Number, String, Sequence, Mapping };

struct ParamSpec {
  std::string name;
  ValueShape shape = ValueShape::Any;
  bool nullable = false;
  // empty optional: the parameter is required
  std::optional<ConfigNode> def;

  static ParamSpec required(std::string n, ValueShape s, bool null_ok = false) {
    return {std::move(n), s, null_ok, std::nullopt};
  }
  static ParamSpec optional(std::string n, ValueShape s, ConfigNode d,
                            bool null_ok = false) {
    return {std::move(n), s, null_ok, std::move(d)};
  }
};

struct ComponentDef {
  std::string name;
  Category category;
  std::vector<ParamSpec> params;
  std::any factory;  // set for user extensions; empty for built-ins
};

class Registry {
 public:
  // populated with every built-in component signature
  static Registry with_builtins();

  void add(Category c, std::string name, std::vector<ParamSpec> params,
           std::any factory = {});
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  // exact lookup; qualified names `A:B` fall back to the plain name `B`
  const ComponentDef* lookup(Category c, const std::string& name) const;

  // lookup that throws UnknownComponent with a nearest-name suggestion
  const ComponentDef& resolve(Category c, const std::string& name) const;

  // closest registered name in the category, empty when none exist
  std::string nearest(Category c, const std::string& name) const;

  std::vector<std::string> names(Category c) const;

 private:
  std::map<std::pair<Category, std::string>, ComponentDef> entries_;
  bool frozen_ = false;
};

// Validates args against def's signature: unknown keys and missing
// required parameters throw ArgumentError naming `path.key`; declared
// defaults are filled in. Returns the completed argument mapping.
ConfigNode bind_args(const ComponentDef& def, const ConfigNode& args,
                     const std::string& path);

}  // namespace voxelpipe
