// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace voxelpipe {

// Error kinds, split into configuration-time errors (a bad YAML document or
// component reference, reported with a dotted key path) and runtime errors.
enum class ErrKind {
  // config / validation
  Syntax,
  Schema,
  Type,
  UnknownComponent,
  Argument,
  Unsupported,
  DuplicateName,
  // data
  Io,
  Format,
  UnsupportedElementType,
  TruncatedPayload,
  MissingGroup,
  EmptyDataset,
  CaseMismatch,
  // numeric
  Shape,
  Graph,
  Index,
  InvalidOverlap,
  InvalidDim,
  DegenerateRange,
  MissingState,
  MissingTarget,
  NonFiniteLoss,
  LabelOutOfRange,
  EmptyReduction,
  UncoveredVoxel,
  CheckpointLoad,
  WorkspaceLocked,
};

const char* err_kind_name(ErrKind k);

// True for errors a user fixes by editing the configuration; the CLI maps
// these to exit code 1 and everything else to exit code 2.
bool is_config_error(ErrKind k);

class Error : public std::runtime_error {
 public:
  Error(ErrKind kind, std::string message, std::string path = {})
      : std::runtime_error(format(kind, message, path)),
        kind_(kind),
        message_(std::move(message)),
        path_(std::move(path)) {}

  ErrKind kind() const { return kind_; }
  // the unformatted message, without kind name and path
  const std::string& message() const { return message_; }
  const std::string& path() const { return path_; }

 private:
  static std::string format(ErrKind kind, const std::string& message,
                            const std::string& path);

  ErrKind kind_;
  std::string message_;
  std::string path_;
};

}  // namespace voxelpipe
