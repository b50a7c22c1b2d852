// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment workspace layout. Every run writes under fixed per-experiment
// directories derived from one root; accessors create the directory on
// first use. A lock file under the root rejects concurrent writers.

#pragma once

#include <ctime>
#include <filesystem>
#include <string>

namespace voxelpipe {

class Workspace {
 public:
  explicit Workspace(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }

  // each accessor returns the directory after creating it if needed
  std::filesystem::path checkpoints(const std::string& train_name) const;
  std::filesystem::path setups(const std::string& train_name) const;
  std::filesystem::path statistics(const std::string& train_name) const;
  std::filesystem::path predictions(const std::string& train_name) const;
  std::filesystem::path evaluations(const std::string& train_name) const;

 private:
  std::filesystem::path ensure(const char* kind,
                               const std::string& train_name) const;

  std::filesystem::path root_;
};

// Exclusive writer lock: construction creates the lock file or raises
// WorkspaceLocked if it already exists; destruction removes it. A crashed
// run can leave a stale lock that must be deleted by hand.
class WorkspaceLock {
 public:
  explicit WorkspaceLock(const std::filesystem::path& root);
  ~WorkspaceLock();

  WorkspaceLock(const WorkspaceLock&) = delete;
  WorkspaceLock& operator=(const WorkspaceLock&) = delete;

  const std::filesystem::path& file() const { return file_; }

 private:
  std::filesystem::path file_;
};

// local wall-clock time as YYYY_MM_DD_HH_MM_SS
std::string timestamp_name(std::time_t t);

}  // namespace voxelpipe
