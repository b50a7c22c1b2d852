// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "voxelpipe/config/node.hpp"

namespace voxelpipe {

const char* node_kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::Null: return "null";
    case NodeKind::Bool: return "bool";
    case NodeKind::Int: return "int";
    case NodeKind::Float: return "float";
    case NodeKind::String: return "string";
    case NodeKind::Sequence: return "sequence";
    case NodeKind::Mapping: return "mapping";
  }
  return "?";
}

ConfigNode ConfigNode::null() { return ConfigNode{}; }

ConfigNode ConfigNode::boolean(bool v) {
  ConfigNode n;
  n.kind_ = NodeKind::Bool;
  n.bool_ = v;
  return n;
}

ConfigNode ConfigNode::integer(int64_t v, std::string lexeme) {
  ConfigNode n;
  n.kind_ = NodeKind::Int;
  n.int_ = v;
  n.lexeme_ = std::move(lexeme);
  return n;
}

ConfigNode ConfigNode::floating(double v, std::string lexeme) {
  ConfigNode n;
  n.kind_ = NodeKind::Float;
  n.float_ = v;
  n.lexeme_ = std::move(lexeme);
  return n;
}

ConfigNode ConfigNode::string(std::string v) {
  ConfigNode n;
  n.kind_ = NodeKind::String;
  n.str_ = std::move(v);
  return n;
}

ConfigNode ConfigNode::sequence() {
  ConfigNode n;
  n.kind_ = NodeKind::Sequence;
  return n;
}

ConfigNode ConfigNode::sequence(std::initializer_list<ConfigNode> items) {
  ConfigNode n = sequence();
  n.seq_.assign(items.begin(), items.end());
  return n;
}

ConfigNode ConfigNode::mapping() {
  ConfigNode n;
  n.kind_ = NodeKind::Mapping;
  return n;
}

void ConfigNode::want(NodeKind k, const char* what) const {
  if (kind_ != k)
    throw Error(ErrKind::Type, std::string("expected ") + what + ", got " +
                                   node_kind_name(kind_));
}

bool ConfigNode::as_bool() const {
  want(NodeKind::Bool, "bool");
  return bool_;
}

int64_t ConfigNode::as_int() const {
  want(NodeKind::Int, "int");
  return int_;
}

double ConfigNode::as_float() const {
  if (kind_ == NodeKind::Int) return static_cast<double>(int_);
  want(NodeKind::Float, "float");
  return float_;
}

const std::string& ConfigNode::as_string() const {
  want(NodeKind::String, "string");
  return str_;
}

size_t ConfigNode::size() const {
  if (kind_ == NodeKind::Mapping) return map_.size();
  want(NodeKind::Sequence, "sequence");
  return seq_.size();
}

const ConfigNode& ConfigNode::at(size_t i) const {
  want(NodeKind::Sequence, "sequence");
  if (i >= seq_.size())
    throw Error(ErrKind::Index, "sequence index " + std::to_string(i) +
                                    " out of range (size " +
                                    std::to_string(seq_.size()) + ")");
  return seq_[i];
}

void ConfigNode::push_back(ConfigNode n) {
  want(NodeKind::Sequence, "sequence");
  seq_.push_back(std::move(n));
}

const std::vector<ConfigNode::Entry>& ConfigNode::entries() const {
  want(NodeKind::Mapping, "mapping");
  return map_;
}

const ConfigNode& ConfigNode::at(const std::string& key) const {
  want(NodeKind::Mapping, "mapping");
  if (const ConfigNode* v = find(key)) return *v;
  throw Error(ErrKind::Index, "key '" + key + "' absent");
}

bool ConfigNode::has(const std::string& key) const {
  return find(key) != nullptr;
}

const ConfigNode* ConfigNode::find(const std::string& key) const {
  if (kind_ != NodeKind::Mapping) return nullptr;
  for (const auto& [k, v] : map_)
    if (k == key) return &v;
  return nullptr;
}

ConfigNode* ConfigNode::find(const std::string& key) {
  return const_cast<ConfigNode*>(
      static_cast<const ConfigNode*>(this)->find(key));
}

ConfigNode& ConfigNode::ref(const std::string& key) {
  want(NodeKind::Mapping, "mapping");
  for (auto& [k, v] : map_)
    if (k == key) return v;
  map_.emplace_back(key, ConfigNode{});
  return map_.back().second;
}

void ConfigNode::set(const std::string& key, ConfigNode value) {
  ref(key) = std::move(value);
}

bool ConfigNode::operator==(const ConfigNode& o) const {
  if (kind_ != o.kind_) return false;
  switch (kind_) {
    case NodeKind::Null: return true;
    case NodeKind::Bool: return bool_ == o.bool_;
    case NodeKind::Int: return int_ == o.int_;
    case NodeKind::Float: return float_ == o.float_;
    case NodeKind::String: return str_ == o.str_;
    case NodeKind::Sequence: return seq_ == o.seq_;
    case NodeKind::Mapping: return map_ == o.map_;
  }
  return false;
}

}  // namespace voxelpipe
