// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "voxelpipe/common/error.hpp"

namespace voxelpipe {

const char* err_kind_name(ErrKind k) {
  switch (k) {
    case ErrKind::Syntax: return "SyntaxError";
    case ErrKind::Schema: return "SchemaError";
    case ErrKind::Type: return "TypeError";
    case ErrKind::UnknownComponent: return "UnknownComponent";
    case ErrKind::Argument: return "ArgumentError";
    case ErrKind::Unsupported: return "Unsupported";
    case ErrKind::DuplicateName: return "DuplicateName";
    case ErrKind::Io: return "IoError";
    case ErrKind::Format: return "FormatError";
    case ErrKind::UnsupportedElementType: return "UnsupportedElementType";
    case ErrKind::TruncatedPayload: return "TruncatedPayload";
    case ErrKind::MissingGroup: return "MissingGroup";
    case ErrKind::EmptyDataset: return "EmptyDataset";
    case ErrKind::CaseMismatch: return "CaseMismatch";
    case ErrKind::Shape: return "ShapeError";
    case ErrKind::Graph: return "GraphError";
    case ErrKind::Index: return "IndexError";
    case ErrKind::InvalidOverlap: return "InvalidOverlap";
    case ErrKind::InvalidDim: return "InvalidDim";
    case ErrKind::DegenerateRange: return "DegenerateRange";
    case ErrKind::MissingState: return "MissingState";
    case ErrKind::MissingTarget: return "MissingTarget";
    case ErrKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrKind::LabelOutOfRange: return "LabelOutOfRange";
    case ErrKind::EmptyReduction: return "EmptyReduction";
    case ErrKind::UncoveredVoxel: return "UncoveredVoxel";
    case ErrKind::CheckpointLoad: return "CheckpointLoadError";
    case ErrKind::WorkspaceLocked: return "WorkspaceLocked";
  }
  return "Error";
}

bool is_config_error(ErrKind k) {
  switch (k) {
    case ErrKind::Syntax:
    case ErrKind::Schema:
    case ErrKind::Type:
    case ErrKind::UnknownComponent:
    case ErrKind::Argument:
    case ErrKind::Unsupported:
    case ErrKind::DuplicateName:
      return true;
    default:
      return false;
  }
}

std::string Error::format(ErrKind kind, const std::string& message,
                          const std::string& path) {
  std::string out = err_kind_name(kind);
  if (!path.empty()) {
    out += " at ";
    out += path;
  }
  out += ": ";
  out += message;
  return out;
}

}  // namespace voxelpipe
