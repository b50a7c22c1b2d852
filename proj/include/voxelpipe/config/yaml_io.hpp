// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "voxelpipe/config/node.hpp"

namespace voxelpipe {

// Parses a YAML 1.1 subset (maps, sequences, scalars; no anchors or aliases)
// into a ConfigNode tree. Plain `None`, `null` and `~` become null; quoted
// scalars stay strings. Duplicate mapping keys and syntax problems throw
// SyntaxError with a 1-based line/column.
ConfigNode parse_yaml(const std::string& text,
                      const std::string& source_name = "");

// Canonical serialization: block mappings with 2-space indent, flow
// sequences when every element is a scalar, nulls spelled `None`. Numeric
// scalars keep the lexeme they were parsed with. parse_yaml(emit_yaml(n))
// reproduces n exactly.
std::string emit_yaml(const ConfigNode& root);

}  // namespace voxelpipe
