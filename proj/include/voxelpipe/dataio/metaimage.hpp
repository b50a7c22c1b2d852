// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0
//
// MetaImage (.mha) reader/writer. Single-file form only: the header ends at
// `ElementDataFile = LOCAL` and the binary payload follows immediately,
// little-endian, optionally zlib-compressed. The writer emits a canonical
// header with a fixed key order so identical volumes produce identical bytes.

#pragma once

#include <filesystem>
#include <string>

#include "voxelpipe/dataio/volume.hpp"

namespace voxelpipe {

Volume read_metaimage(const std::filesystem::path& path);
void write_metaimage(const Volume& v, const std::filesystem::path& path);

// in-memory equivalents used by tests and the data log
Volume parse_metaimage(const std::string& bytes, const std::string& name);
std::string serialize_metaimage(const Volume& v);

}  // namespace voxelpipe
