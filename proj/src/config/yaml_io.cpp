// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "voxelpipe/config/yaml_io.hpp"

#include <yaml-cpp/yaml.h>

#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>

namespace voxelpipe {

namespace {

bool is_int_lexeme(const std::string& s) {
  size_t i = (s[0] == '+' || s[0] == '-') ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

bool is_float_lexeme(const std::string& s) {
  size_t i = (s[0] == '+' || s[0] == '-') ? 1 : 0;
  bool digits = false, dot = false, exp = false;
  for (; i < s.size(); ++i) {
    const char c = s[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digits = true;
    } else if (c == '.' && !dot && !exp) {
      dot = true;
    } else if ((c == 'e' || c == 'E') && digits && !exp) {
      exp = true;
      digits = false;
      if (i + 1 < s.size() && (s[i + 1] == '+' || s[i + 1] == '-')) ++i;
    } else {
      return false;
    }
  }
  return digits && (dot || exp);
}

ConfigNode classify_plain(const std::string& s) {
  if (s.empty() || s == "~" || s == "null" || s == "Null" || s == "NULL" ||
      s == "None")
    return ConfigNode::null();
  if (s == "true" || s == "True" || s == "TRUE") return ConfigNode::boolean(true);
  if (s == "false" || s == "False" || s == "FALSE")
    return ConfigNode::boolean(false);
  if (is_int_lexeme(s)) {
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (errno == 0 && end && *end == '\0')
      return ConfigNode::integer(v, s);
    // out-of-range integer literal, keep the magnitude as a float
    return ConfigNode::floating(std::strtod(s.c_str(), nullptr), s);
  }
  if (is_float_lexeme(s))
    return ConfigNode::floating(std::strtod(s.c_str(), nullptr), s);
  return ConfigNode::string(s);
}

ConfigNode convert(const YAML::Node& y, const std::string& where) {
  switch (y.Type()) {
    case YAML::NodeType::Null:
      return ConfigNode::null();
    case YAML::NodeType::Scalar:
      // plain scalars carry tag "?", anything quoted or tagged is a string
      if (y.Tag() == "?") return classify_plain(y.Scalar());
      return ConfigNode::string(y.Scalar());
    case YAML::NodeType::Sequence: {
      ConfigNode n = ConfigNode::sequence();
      size_t i = 0;
      for (const auto& item : y)
        n.push_back(convert(item, where + "[" + std::to_string(i++) + "]"));
      return n;
    }
    case YAML::NodeType::Map: {
      ConfigNode n = ConfigNode::mapping();
      std::set<std::string> seen;
      for (const auto& item : y) {
        const std::string key = item.first.Scalar();
        if (!seen.insert(key).second)
          throw Error(ErrKind::Syntax,
                      "duplicate key '" + key + "' at " +
                          (where.empty() ? "top level" : where));
        n.set(key, convert(item.second, where.empty() ? key : where + "." + key));
      }
      return n;
    }
    case YAML::NodeType::Undefined:
      break;
  }
  throw Error(ErrKind::Syntax, "unsupported YAML node at " + where);
}

// ----------------------------------------------------------------- emitter

const char kSpecialLead[] = "!&*?|>%@`\"'#,[]{}:- ";

bool needs_quotes(const std::string& s) {
  if (s.empty()) return true;
  ConfigNode c = classify_plain(s);
  if (c.kind() != NodeKind::String) return true;  // would reparse as non-string
  for (const char* p = kSpecialLead; *p; ++p)
    if (s.front() == *p) return true;
  if (s.back() == ' ' || s.back() == ':') return true;
  for (size_t i = 0; i < s.size(); ++i) {
    const char c2 = s[i];
    if (c2 == '\n' || c2 == '\t' || c2 == ',' || c2 == '[' || c2 == ']' ||
        c2 == '{' || c2 == '}')
      return true;
    if (c2 == ':' && i + 1 < s.size() && s[i + 1] == ' ') return true;
    if (c2 == ' ' && i + 1 < s.size() && s[i + 1] == '#') return true;
  }
  return false;
}

std::string quoted(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    out += c;
    if (c == '\'') out += '\'';
  }
  out += '\'';
  return out;
}

std::string format_float(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  if (std::strtod(buf, nullptr) == v) {
    // make sure it still reads back as a float, not an int
    std::string s = buf;
    if (is_int_lexeme(s)) s += ".0";
    return s;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string scalar_text(const ConfigNode& n) {
  switch (n.kind()) {
    case NodeKind::Null: return "None";
    case NodeKind::Bool: return n.as_bool() ? "true" : "false";
    case NodeKind::Int:
      return n.lexeme().empty() ? std::to_string(n.as_int()) : n.lexeme();
    case NodeKind::Float:
      return n.lexeme().empty() ? format_float(n.as_float()) : n.lexeme();
    case NodeKind::String:
      return needs_quotes(n.as_string()) ? quoted(n.as_string())
                                         : n.as_string();
    default:
      throw Error(ErrKind::Argument, "scalar_text on a collection");
  }
}

bool all_scalars(const ConfigNode& seq) {
  for (size_t i = 0; i < seq.size(); ++i)
    if (!seq.at(i).is_scalar()) return false;
  return true;
}

std::string flow_seq(const ConfigNode& seq) {
  std::string out = "[";
  for (size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ", ";
    out += scalar_text(seq.at(i));
  }
  out += "]";
  return out;
}

void emit_node(const ConfigNode& n, int indent, std::ostringstream& out);

void emit_map_entries(const ConfigNode& n, int indent,
                      std::ostringstream& out) {
  const std::string pad(static_cast<size_t>(indent), ' ');
  for (const auto& [key, value] : n.entries()) {
    out << pad << (needs_quotes(key) ? quoted(key) : key) << ":";
    if (value.is_scalar()) {
      out << " " << scalar_text(value) << "\n";
    } else if (value.kind() == NodeKind::Sequence) {
      if (value.size() == 0) {
        out << " []\n";
      } else if (all_scalars(value)) {
        out << " " << flow_seq(value) << "\n";
      } else {
        out << "\n";
        emit_node(value, indent + 2, out);
      }
    } else {  // mapping
      if (value.size() == 0) {
        out << " {}\n";
      } else {
        out << "\n";
        emit_map_entries(value, indent + 2, out);
      }
    }
  }
}

void emit_node(const ConfigNode& n, int indent, std::ostringstream& out) {
  const std::string pad(static_cast<size_t>(indent), ' ');
  if (n.kind() == NodeKind::Mapping) {
    emit_map_entries(n, indent, out);
    return;
  }
  if (n.kind() == NodeKind::Sequence) {
    for (size_t i = 0; i < n.size(); ++i) {
      const ConfigNode& item = n.at(i);
      if (item.is_scalar()) {
        out << pad << "- " << scalar_text(item) << "\n";
      } else if (item.kind() == NodeKind::Sequence) {
        if (item.size() == 0) {
          out << pad << "- []\n";
        } else if (all_scalars(item)) {
          out << pad << "- " << flow_seq(item) << "\n";
        } else {
          out << pad << "-\n";
          emit_node(item, indent + 2, out);
        }
      } else {
        if (item.size() == 0) {
          out << pad << "- {}\n";
        } else {
          // first entry shares the dash line, the rest align under it
          std::ostringstream inner;
          emit_map_entries(item, indent + 2, inner);
          std::string text = inner.str();
          text.replace(0, static_cast<size_t>(indent) + 2, pad + "- ");
          out << text;
        }
      }
    }
    return;
  }
  out << pad << scalar_text(n) << "\n";
}

}  // namespace

ConfigNode parse_yaml(const std::string& text,
                      const std::string& source_name) {
  YAML::Node y;
  try {
    y = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    std::ostringstream msg;
    if (!source_name.empty()) msg << source_name << ": ";
    msg << "YAML syntax error at line " << e.mark.line + 1 << ", column "
        << e.mark.column + 1 << ": " << e.msg;
    throw Error(ErrKind::Syntax, msg.str());
  } catch (const YAML::Exception& e) {
    throw Error(ErrKind::Syntax,
                (source_name.empty() ? std::string{} : source_name + ": ") +
                    "YAML error: " + e.what());
  }
  return convert(y, "");
}

std::string emit_yaml(const ConfigNode& root) {
  std::ostringstream out;
  if (root.kind() == NodeKind::Mapping && root.size() == 0) return "{}\n";
  if (root.kind() == NodeKind::Sequence && root.size() == 0) return "[]\n";
  emit_node(root, 0, out);
  return out.str();
}

}  // namespace voxelpipe
