// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0
//
// Dataset indexing: each configured source root holds one subdirectory per
// case, and a case directory holds one file per group (<Group>.<ext>).
// Cases are discovered across all roots, sorted, subset-filtered, then
// optionally shuffled with the run seed.

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "voxelpipe/config/node.hpp"
#include "voxelpipe/config/schema.hpp"
#include "voxelpipe/dataio/volume.hpp"

namespace voxelpipe {

struct Case {
  std::string name;
  std::map<std::string, std::filesystem::path> groups;
};

struct DatasetIndex {
  std::vector<Case> cases;
  std::vector<DatasetFilenameSpec> sources;
};

// subset: null (all), a string (file of case names, one per line), or a
// sequence of indices into the sorted case list
DatasetIndex index_dataset(const std::vector<DatasetFilenameSpec>& specs,
                           const std::vector<std::string>& groups_src,
                           const ConfigNode& subset, bool shuffle,
                           uint64_t seed);

// loads volumes, optionally keeping them resident; loading is deterministic
// so cache on/off cannot change results
class VolumeCache {
 public:
  explicit VolumeCache(bool enabled) : enabled_(enabled) {}

  std::shared_ptr<const Volume> get(const std::filesystem::path& path);

  // loads every group of every case up front
  void preload(const DatasetIndex& index);

  bool enabled() const { return enabled_; }
  size_t resident() const { return cache_.size(); }

 private:
  bool enabled_;
  std::map<std::string, std::shared_ptr<const Volume>> cache_;
};

}  // namespace voxelpipe
