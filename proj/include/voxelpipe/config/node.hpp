// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0
//
// Ordered configuration tree. Mappings preserve key order so serialized
// snapshots diff cleanly against the files they came from. Scalars keep the
// lexeme they were parsed from; equality ignores it (structural equality is
// kind + value + children + key order).

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "voxelpipe/common/error.hpp"

namespace voxelpipe {

enum class NodeKind { Null, Bool, Int, Float, String, Sequence, Mapping };

const char* node_kind_name(NodeKind k);

class ConfigNode {
 public:
  ConfigNode() : kind_(NodeKind::Null) {}

  static ConfigNode null();
  static ConfigNode boolean(bool v);
  static ConfigNode integer(int64_t v, std::string lexeme = {});
  static ConfigNode floating(double v, std::string lexeme = {});
  static ConfigNode string(std::string v);
  static ConfigNode sequence();
  static ConfigNode sequence(std::initializer_list<ConfigNode> items);
  static ConfigNode mapping();

  NodeKind kind() const { return kind_; }
  bool is_null() const { return kind_ == NodeKind::Null; }
  bool is_scalar() const {
    return kind_ != NodeKind::Sequence && kind_ != NodeKind::Mapping;
  }

  // typed access; as_float accepts Int, everything else is exact
  bool as_bool() const;
  int64_t as_int() const;
  double as_float() const;
  const std::string& as_string() const;
  const std::string& lexeme() const { return lexeme_; }

  // sequence
  size_t size() const;
  const ConfigNode& at(size_t i) const;
  void push_back(ConfigNode n);

  // mapping
  using Entry = std::pair<std::string, ConfigNode>;
  const std::vector<Entry>& entries() const;
  // throws IndexError when the key is absent
  const ConfigNode& at(const std::string& key) const;
  bool has(const std::string& key) const;
  const ConfigNode* find(const std::string& key) const;
  ConfigNode* find(const std::string& key);
  // inserts at the end when absent
  ConfigNode& ref(const std::string& key);
  void set(const std::string& key, ConfigNode value);

  bool operator==(const ConfigNode& o) const;
  bool operator!=(const ConfigNode& o) const { return !(*this == o); }

 private:
  void want(NodeKind k, const char* what) const;

  NodeKind kind_;
  bool bool_ = false;
  int64_t int_ = 0;
  double float_ = 0.0;
  std::string str_;     // String payload
  std::string lexeme_;  // original source text of numeric scalars
  std::vector<ConfigNode> seq_;
  std::vector<Entry> map_;
};

}  // namespace voxelpipe
