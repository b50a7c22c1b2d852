// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "voxelpipe/workspace/workspace.hpp"

#include <cstdio>
#include <system_error>

#include "voxelpipe/common/error.hpp"

namespace voxelpipe {

std::filesystem::path Workspace::ensure(const char* kind,
                                        const std::string& train_name) const {
  const std::filesystem::path dir = root_ / kind / train_name;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw Error(ErrKind::Io,
                std::string("cannot create ") + kind +
                    " directory: " + ec.message(),
                dir.string());
  return dir;
}

std::filesystem::path Workspace::checkpoints(
    const std::string& train_name) const {
  return ensure("Checkpoints", train_name);
}

std::filesystem::path Workspace::setups(const std::string& train_name) const {
  return ensure("Setups", train_name);
}

std::filesystem::path Workspace::statistics(
    const std::string& train_name) const {
  return ensure("Statistics", train_name);
}

std::filesystem::path Workspace::predictions(
    const std::string& train_name) const {
  return ensure("Predictions", train_name);
}

std::filesystem::path Workspace::evaluations(
    const std::string& train_name) const {
  return ensure("Evaluations", train_name);
}

WorkspaceLock::WorkspaceLock(const std::filesystem::path& root) {
  std::error_code ec;
  std::filesystem::create_directories(root, ec);
  if (ec)
    throw Error(ErrKind::Io,
                "cannot create workspace root: " + ec.message(),
                root.string());
  file_ = root / ".voxelpipe.lock";
  // "wx" fails when the file exists, which makes creation the atomic test
  std::FILE* f = std::fopen(file_.string().c_str(), "wx");
  if (!f)
    throw Error(ErrKind::WorkspaceLocked,
                "workspace is in use by another run (delete the lock file "
                "if that run crashed)",
                file_.string());
  std::fclose(f);
}

WorkspaceLock::~WorkspaceLock() {
  std::error_code ec;
  std::filesystem::remove(file_, ec);
}

std::string timestamp_name(std::time_t t) {
  std::tm tm{};
  localtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y_%m_%d_%H_%M_%S", &tm);
  return buf;
}

}  // namespace voxelpipe
