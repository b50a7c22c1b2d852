// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "voxelpipe/dataio/metaimage.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "voxelpipe/common/error.hpp"

namespace voxelpipe {

const char* element_type_met_name(ElementType t) {
  switch (t) {
    case ElementType::U8: return "MET_UCHAR";
    case ElementType::I16: return "MET_SHORT";
    case ElementType::U16: return "MET_USHORT";
    case ElementType::I32: return "MET_INT";
    case ElementType::F32: return "MET_FLOAT";
    case ElementType::F64: return "MET_DOUBLE";
  }
  return "?";
}

ElementType element_type_from_met(const std::string& name) {
  if (name == "MET_UCHAR") return ElementType::U8;
  if (name == "MET_SHORT") return ElementType::I16;
  if (name == "MET_USHORT") return ElementType::U16;
  if (name == "MET_INT") return ElementType::I32;
  if (name == "MET_FLOAT") return ElementType::F32;
  if (name == "MET_DOUBLE") return ElementType::F64;
  throw Error(ErrKind::UnsupportedElementType,
              "element type '" + name + "' is not supported");
}

size_t element_size(ElementType t) {
  switch (t) {
    case ElementType::U8: return 1;
    case ElementType::I16:
    case ElementType::U16: return 2;
    case ElementType::I32:
    case ElementType::F32: return 4;
    case ElementType::F64: return 8;
  }
  return 0;
}

Dtype element_dtype(ElementType t) {
  switch (t) {
    case ElementType::U8: return Dtype::U8;
    case ElementType::I16:
    case ElementType::U16:
    case ElementType::I32: return Dtype::I64;
    case ElementType::F32: return Dtype::F32;
    case ElementType::F64: return Dtype::F64;
  }
  return Dtype::F32;
}

void Volume::check_valid() const {
  if (array.rank() != 4)
    throw Error(ErrKind::Shape, "volume arrays are C x D x H x W, got rank " +
                                    std::to_string(array.rank()));
  for (double s : spacing)
    if (!(s > 0.0))
      throw Error(ErrKind::Format, "spacing components must be > 0");
  // rows of the direction matrix must be orthonormal
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c <= r; ++c) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k)
        dot += direction[size_t(3 * r + k)] * direction[size_t(3 * c + k)];
      const double want = (r == c) ? 1.0 : 0.0;
      if (std::abs(dot - want) > 1e-4)
        throw Error(ErrKind::Format,
                    "direction matrix is not orthonormal within 1e-4");
    }
}

namespace {

// shortest decimal text that strtod parses back to the same double
std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  if (std::strtod(buf, nullptr) == v) return buf;
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<double> parse_doubles(const std::string& text,
                                  const std::string& line) {
  std::istringstream in(text);
  std::vector<double> out;
  double v;
  while (in >> v) out.push_back(v);
  std::string rest;
  if (!(in >> rest).eof() && !rest.empty())
    throw Error(ErrKind::Format, "malformed numeric list in '" + line + "'");
  return out;
}

bool parse_met_bool(const std::string& v, const std::string& line) {
  if (v == "True" || v == "true") return true;
  if (v == "False" || v == "false") return false;
  throw Error(ErrKind::Format, "expected True or False in '" + line + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// payload bytes are little-endian, as is every platform this builds on;
// memcpy avoids unaligned access on the string buffer
template <typename T>
T load_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <typename T>
void decode_payload(const std::string& raw, Tensor& t) {
  const int64_t n = t.numel();
  const char* src = raw.data();
  switch (t.dtype()) {
    case Dtype::U8: {
      auto dst = t.data<uint8_t>();
      for (int64_t i = 0; i < n; ++i)
        dst[size_t(i)] = uint8_t(load_le<T>(src + size_t(i) * sizeof(T)));
      break;
    }
    case Dtype::I64: {
      auto dst = t.data<int64_t>();
      for (int64_t i = 0; i < n; ++i)
        dst[size_t(i)] = int64_t(load_le<T>(src + size_t(i) * sizeof(T)));
      break;
    }
    case Dtype::F32: {
      auto dst = t.data<float>();
      for (int64_t i = 0; i < n; ++i)
        dst[size_t(i)] = float(load_le<T>(src + size_t(i) * sizeof(T)));
      break;
    }
    case Dtype::F64: {
      auto dst = t.data<double>();
      for (int64_t i = 0; i < n; ++i)
        dst[size_t(i)] = double(load_le<T>(src + size_t(i) * sizeof(T)));
      break;
    }
  }
}

template <typename T>
void encode_payload(const Tensor& t, std::string& out) {
  const int64_t n = t.numel();
  out.resize(size_t(n) * sizeof(T));
  char* dst = out.data();
  auto store = [&](int64_t i, T v) {
    std::memcpy(dst + size_t(i) * sizeof(T), &v, sizeof(T));
  };
  switch (t.dtype()) {
    case Dtype::U8: {
      auto src = t.data<uint8_t>();
      for (int64_t i = 0; i < n; ++i) store(i, T(src[size_t(i)]));
      break;
    }
    case Dtype::I64: {
      auto src = t.data<int64_t>();
      for (int64_t i = 0; i < n; ++i) store(i, T(src[size_t(i)]));
      break;
    }
    case Dtype::F32: {
      auto src = t.data<float>();
      for (int64_t i = 0; i < n; ++i) store(i, T(src[size_t(i)]));
      break;
    }
    case Dtype::F64: {
      auto src = t.data<double>();
      for (int64_t i = 0; i < n; ++i) store(i, T(src[size_t(i)]));
      break;
    }
  }
}

std::string inflate_payload(const std::string& raw, size_t expected,
                            const std::string& name) {
  std::string out(expected, '\0');
  uLongf dst_len = expected;
  const int rc = ::uncompress(reinterpret_cast<Bytef*>(out.data()), &dst_len,
                              reinterpret_cast<const Bytef*>(raw.data()),
                              static_cast<uLong>(raw.size()));
  if (rc != Z_OK || dst_len != expected)
    throw Error(ErrKind::TruncatedPayload,
                "compressed payload does not inflate to " +
                    std::to_string(expected) + " bytes",
                name);
  return out;
}

std::string deflate_payload(const std::string& raw) {
  uLongf dst_len = compressBound(static_cast<uLong>(raw.size()));
  std::string out(dst_len, '\0');
  const int rc =
      ::compress2(reinterpret_cast<Bytef*>(out.data()), &dst_len,
                  reinterpret_cast<const Bytef*>(raw.data()),
                  static_cast<uLong>(raw.size()), Z_DEFAULT_COMPRESSION);
  if (rc != Z_OK)
    throw Error(ErrKind::Io, "zlib compression failed");
  out.resize(dst_len);
  return out;
}

}  // namespace

Volume parse_metaimage(const std::string& bytes, const std::string& name) {
  size_t pos = 0;
  bool saw_ndims = false, saw_dimsize = false, saw_type = false;
  bool header_done = false;
  int ndims = 0;
  std::vector<int64_t> dims;  // file order, x fastest
  Volume v;
  size_t compressed_size = 0;

  while (pos < bytes.size() && !header_done) {
    const size_t eol = bytes.find('\n', pos);
    if (eol == std::string::npos)
      throw Error(ErrKind::Format, "header has no ElementDataFile line", name);
    const std::string line = trim(bytes.substr(pos, eol - pos));
    pos = eol + 1;
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrKind::Format, "malformed header line '" + line + "'",
                  name);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "ObjectType") {
      if (value != "Image")
        throw Error(ErrKind::Format, "ObjectType must be Image", name);
    } else if (key == "NDims") {
      ndims = std::atoi(value.c_str());
      if (ndims < 2 || ndims > 4)
        throw Error(ErrKind::Format, "NDims must be 2, 3, or 4", name);
      saw_ndims = true;
    } else if (key == "BinaryData") {
      if (!parse_met_bool(value, line))
        throw Error(ErrKind::Format, "only binary payloads are supported",
                    name);
    } else if (key == "BinaryDataByteOrderMSB") {
      if (parse_met_bool(value, line))
        throw Error(ErrKind::Format, "big-endian payloads are not supported",
                    name);
    } else if (key == "CompressedData") {
      v.compressed = parse_met_bool(value, line);
    } else if (key == "CompressedDataSize") {
      compressed_size = size_t(std::atoll(value.c_str()));
    } else if (key == "TransformMatrix") {
      const auto m = parse_doubles(value, line);
      if (m.size() != 9)
        throw Error(ErrKind::Format, "TransformMatrix needs 9 values", name);
      std::copy(m.begin(), m.end(), v.direction.begin());
    } else if (key == "Offset" || key == "Origin" || key == "Position") {
      const auto o = parse_doubles(value, line);
      if (o.size() < 2 || o.size() > 3)
        throw Error(ErrKind::Format, "Offset needs 2 or 3 values", name);
      // file order is (x, y, z); internal order is (D, H, W) = (z, y, x)
      for (size_t i = 0; i < o.size(); ++i) v.origin[2 - i] = o[i];
    } else if (key == "CenterOfRotation") {
      const auto c = parse_doubles(value, line);
      if (c.size() < 2 || c.size() > 3)
        throw Error(ErrKind::Format, "CenterOfRotation needs 2 or 3 values",
                    name);
      for (size_t i = 0; i < c.size(); ++i) v.center_of_rotation[2 - i] = c[i];
    } else if (key == "ElementSpacing" || key == "ElementSize") {
      const auto s = parse_doubles(value, line);
      if (s.size() < 2 || s.size() > 3)
        throw Error(ErrKind::Format, "ElementSpacing needs 2 or 3 values",
                    name);
      for (size_t i = 0; i < s.size(); ++i) v.spacing[2 - i] = s[i];
    } else if (key == "DimSize") {
      const auto d = parse_doubles(value, line);
      dims.clear();
      for (double x : d) {
        if (x < 1 || x != std::floor(x))
          throw Error(ErrKind::Format, "DimSize values must be positive "
                                       "integers", name);
        dims.push_back(int64_t(x));
      }
      saw_dimsize = true;
    } else if (key == "ElementType") {
      v.element_type = element_type_from_met(value);
      saw_type = true;
    } else if (key == "ElementNumberOfChannels") {
      if (std::atoi(value.c_str()) != 1)
        throw Error(ErrKind::UnsupportedElementType,
                    "multi-component elements are not supported", name);
    } else if (key == "ElementDataFile") {
      if (value != "LOCAL")
        throw Error(ErrKind::Format,
                    "only ElementDataFile = LOCAL is supported", name);
      header_done = true;
    }
    // other keys are ignored; the writer never emits them
  }

  if (!header_done)
    throw Error(ErrKind::Format, "header has no ElementDataFile line", name);
  if (!saw_ndims) throw Error(ErrKind::Format, "NDims missing", name);
  if (!saw_dimsize) throw Error(ErrKind::Format, "DimSize missing", name);
  if (!saw_type) throw Error(ErrKind::Format, "ElementType missing", name);
  if (int(dims.size()) != ndims)
    throw Error(ErrKind::Format, "DimSize does not match NDims", name);

  // reverse (x, y, z[, c]) into C x D x H x W, padding missing axes with 1
  int64_t c = 1, d = 1, h = 1, w = 1;
  if (ndims == 2) {
    w = dims[0];
    h = dims[1];
  } else if (ndims == 3) {
    w = dims[0];
    h = dims[1];
    d = dims[2];
  } else {
    w = dims[0];
    h = dims[1];
    d = dims[2];
    c = dims[3];
  }
  v.ndims = ndims;

  const size_t expected =
      size_t(c) * size_t(d) * size_t(h) * size_t(w) *
      element_size(v.element_type);
  std::string raw = bytes.substr(pos);
  if (v.compressed) {
    if (compressed_size != 0 && raw.size() != compressed_size)
      throw Error(ErrKind::TruncatedPayload,
                  "compressed payload is " + std::to_string(raw.size()) +
                      " bytes, header says " + std::to_string(compressed_size),
                  name);
    raw = inflate_payload(raw, expected, name);
  }
  if (raw.size() < expected)
    throw Error(ErrKind::TruncatedPayload,
                "payload is " + std::to_string(raw.size()) +
                    " bytes, expected " + std::to_string(expected),
                name);
  if (raw.size() > expected)
    throw Error(ErrKind::Format,
                "payload is " + std::to_string(raw.size()) +
                    " bytes, expected " + std::to_string(expected),
                name);

  v.array = Tensor::zeros({c, d, h, w}, element_dtype(v.element_type));
  switch (v.element_type) {
    case ElementType::U8: decode_payload<uint8_t>(raw, v.array); break;
    case ElementType::I16: decode_payload<int16_t>(raw, v.array); break;
    case ElementType::U16: decode_payload<uint16_t>(raw, v.array); break;
    case ElementType::I32: decode_payload<int32_t>(raw, v.array); break;
    case ElementType::F32: decode_payload<float>(raw, v.array); break;
    case ElementType::F64: decode_payload<double>(raw, v.array); break;
  }
  v.check_valid();
  return v;
}

std::string serialize_metaimage(const Volume& v) {
  v.check_valid();
  const int64_t c = v.channels(), d = v.depth(), h = v.height(),
                w = v.width();
  int ndims = v.ndims;
  if (c > 1) ndims = 4;  // channels force the 4th axis

  std::ostringstream head;
  head << "ObjectType = Image\n";
  head << "NDims = " << ndims << "\n";
  head << "BinaryData = True\n";
  head << "BinaryDataByteOrderMSB = False\n";
  head << "CompressedData = " << (v.compressed ? "True" : "False") << "\n";

  std::string payload;
  switch (v.element_type) {
    case ElementType::U8: encode_payload<uint8_t>(v.array, payload); break;
    case ElementType::I16: encode_payload<int16_t>(v.array, payload); break;
    case ElementType::U16: encode_payload<uint16_t>(v.array, payload); break;
    case ElementType::I32: encode_payload<int32_t>(v.array, payload); break;
    case ElementType::F32: encode_payload<float>(v.array, payload); break;
    case ElementType::F64: encode_payload<double>(v.array, payload); break;
  }
  if (v.compressed) {
    payload = deflate_payload(payload);
    head << "CompressedDataSize = " << payload.size() << "\n";
  }

  head << "TransformMatrix =";
  for (double m : v.direction) head << " " << fmt_double(m);
  head << "\n";

  const int spatial = std::min(ndims, 3);
  head << "Offset =";
  for (int i = 0; i < spatial; ++i)
    head << " " << fmt_double(v.origin[size_t(2 - i)]);
  head << "\nCenterOfRotation =";
  for (int i = 0; i < spatial; ++i)
    head << " " << fmt_double(v.center_of_rotation[size_t(2 - i)]);
  head << "\nElementSpacing =";
  for (int i = 0; i < spatial; ++i)
    head << " " << fmt_double(v.spacing[size_t(2 - i)]);
  head << "\nDimSize =";
  const int64_t file_dims[4] = {w, h, d, c};
  for (int i = 0; i < ndims; ++i) head << " " << file_dims[i];
  head << "\nElementType = " << element_type_met_name(v.element_type) << "\n";
  head << "ElementDataFile = LOCAL\n";

  std::string out = head.str();
  out += payload;
  return out;
}

Volume read_metaimage(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrKind::Io, "cannot open volume", path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_metaimage(buf.str(), path.string());
}

void write_metaimage(const Volume& v, const std::filesystem::path& path) {
  const std::string bytes = serialize_metaimage(v);
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec)
      throw Error(ErrKind::Io, "cannot create directory: " + ec.message(),
                  path.parent_path().string());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrKind::Io, "cannot write volume", path.string());
  out.write(bytes.data(), std::streamsize(bytes.size()));
  out.close();
  if (!out)
    throw Error(ErrKind::Io, "cannot write volume", path.string());
}

}  // namespace voxelpipe
