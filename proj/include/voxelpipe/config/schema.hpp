// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0
//
// The three configuration schemas (training, prediction, evaluation).
// parse_config validates structure, key sets, scalar types, and component
// references; the returned document keeps the parsed tree untouched so
// serializing it reproduces the input structure.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "voxelpipe/config/node.hpp"
#include "voxelpipe/config/registry.hpp"

namespace voxelpipe {

enum class ConfigKind { Train, Prediction, Evaluation };

const char* config_kind_name(ConfigKind k);

struct ConfigDocument {
  ConfigKind kind = ConfigKind::Train;
  ConfigNode root;
  std::string source_path;

  // dotted-path lookup for fixed schema locations (keys containing dots are
  // not addressable this way; iterate entries() for data-driven maps)
  const ConfigNode* find_path(const std::string& dotted) const;
  const ConfigNode& at_path(const std::string& dotted) const;

  bool operator==(const ConfigDocument& o) const {
    return kind == o.kind && root == o.root;
  }
};

ConfigDocument parse_config(const std::string& text, ConfigKind kind,
                            const Registry& reg,
                            const std::string& source_name = "");
ConfigDocument load_config_file(const std::filesystem::path& file,
                                ConfigKind kind, const Registry& reg);

// `<path>:<tag>:<ext>`; the tag is an opaque one-character role label
struct DatasetFilenameSpec {
  std::string path;
  std::string tag;
  std::string ext;
  std::string raw;
};
DatasetFilenameSpec parse_dataset_filename(const std::string& s);

// `<path>:<ext>` as used by outputs_dataset.dataset_filename
struct OutputFilenameSpec {
  std::string path;
  std::string ext;
};
OutputFilenameSpec parse_output_filename(const std::string& s);

// colon-joined model address, e.g. `UNetBlock_0:Head:Softmax`
std::vector<std::string> split_address(const std::string& addr);

// `<group-or-address>/IMAGES/<count>`
struct DataLogEntry {
  std::string source;
  int64_t count = 0;
};
DataLogEntry parse_data_log_entry(const std::string& s);

// the resolved definition plus arguments completed with declared defaults
struct ResolvedComponent {
  const ComponentDef* def = nullptr;
  ConfigNode args;
};
ResolvedComponent resolve_component(const Registry& reg, Category category,
                                    const std::string& name,
                                    const ConfigNode& args,
                                    const std::string& path);

// Writes Setups/<train_name>/Config_<k>.yml under the workspace root with
// the smallest unused k and returns the path.
std::filesystem::path write_snapshot(const ConfigDocument& cfg,
                                     const std::filesystem::path& workspace_root,
                                     const std::string& train_name);

}  // namespace voxelpipe
