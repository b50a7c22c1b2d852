// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "voxelpipe/dataio/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "voxelpipe/common/error.hpp"
#include "voxelpipe/common/rng.hpp"
#include "voxelpipe/dataio/metaimage.hpp"

namespace voxelpipe {

namespace {

std::vector<std::string> subset_names_from_file(
    const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in)
    throw Error(ErrKind::Io, "cannot open subset file", file.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.pop_back();
    if (!line.empty()) names.push_back(line);
  }
  return names;
}

}  // namespace

DatasetIndex index_dataset(const std::vector<DatasetFilenameSpec>& specs,
                           const std::vector<std::string>& groups_src,
                           const ConfigNode& subset, bool shuffle,
                           uint64_t seed) {
  if (specs.empty())
    throw Error(ErrKind::EmptyDataset, "no dataset sources configured");

  // case names are the union of subdirectories across all source roots
  std::set<std::string> case_names;
  for (const DatasetFilenameSpec& spec : specs) {
    const std::filesystem::path root(spec.path);
    if (!std::filesystem::is_directory(root))
      throw Error(ErrKind::Io, "dataset root is not a directory",
                  root.string());
    for (const auto& entry : std::filesystem::directory_iterator(root))
      if (entry.is_directory())
        case_names.insert(entry.path().filename().string());
  }

  std::vector<std::string> ordered(case_names.begin(), case_names.end());
  std::sort(ordered.begin(), ordered.end());

  if (subset.kind() == NodeKind::Sequence) {
    std::vector<std::string> picked;
    for (size_t i = 0; i < subset.size(); ++i) {
      const int64_t idx = subset.at(i).as_int();
      if (idx < 0 || size_t(idx) >= ordered.size())
        throw Error(ErrKind::Index,
                    "subset index " + std::to_string(idx) +
                        " out of range (dataset has " +
                        std::to_string(ordered.size()) + " cases)");
      picked.push_back(ordered[size_t(idx)]);
    }
    ordered = std::move(picked);
  } else if (subset.kind() == NodeKind::String) {
    const auto wanted = subset_names_from_file(subset.as_string());
    std::vector<std::string> picked;
    for (const std::string& name : wanted) {
      if (!case_names.count(name))
        throw Error(ErrKind::CaseMismatch,
                    "subset names unknown case '" + name + "'");
      picked.push_back(name);
    }
    ordered = std::move(picked);
  } else if (!subset.is_null()) {
    throw Error(ErrKind::Type,
                std::string("subset must be None, a file, or an index list, "
                            "got ") +
                    node_kind_name(subset.kind()));
  }

  if (ordered.empty())
    throw Error(ErrKind::EmptyDataset, "dataset has no cases after subset");

  if (shuffle) {
    Rng rng(seed);
    shuffle_indices(ordered, rng);
  }

  DatasetIndex index;
  index.sources = specs;
  for (const std::string& name : ordered) {
    Case c;
    c.name = name;
    for (const std::string& group : groups_src) {
      bool found = false;
      for (const DatasetFilenameSpec& spec : specs) {
        const std::filesystem::path candidate =
            std::filesystem::path(spec.path) / name / (group + "." + spec.ext);
        if (std::filesystem::is_regular_file(candidate)) {
          c.groups[group] = candidate;
          found = true;
          break;
        }
      }
      if (!found)
        throw Error(ErrKind::MissingGroup,
                    "case '" + name + "' has no file for group '" + group +
                        "'");
    }
    index.cases.push_back(std::move(c));
  }
  return index;
}

std::shared_ptr<const Volume> VolumeCache::get(
    const std::filesystem::path& path) {
  const std::string key = path.string();
  if (enabled_) {
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  auto v = std::make_shared<Volume>(read_metaimage(path));
  if (enabled_) cache_.emplace(key, v);
  return v;
}

void VolumeCache::preload(const DatasetIndex& index) {
  if (!enabled_) return;
  for (const Case& c : index.cases)
    for (const auto& [group, path] : c.groups) {
      (void)group;
      get(path);
    }
}

}  // namespace voxelpipe
