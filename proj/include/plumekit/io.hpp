#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "types.hpp"

namespace plumekit {

namespace detail {

inline std::string read_all_bytes(const std::string& path, const std::string& context) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_failure, context + ": cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorCode::io_failure, context + ": read error on '" + path + "'");
  return bytes;
}

inline void write_all_bytes(const std::string& path, const std::string& bytes,
                            const std::string& context) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io_failure, context + ": cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) fail(ErrorCode::io_failure, context + ": write error on '" + path + "'");
}

inline std::uint32_t u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline float f32_le(const unsigned char* p) {
  return std::bit_cast<float>(u32_le(p));
}

inline void put_f32_le(std::string& out, float f) {
  put_u32_le(out, std::bit_cast<std::uint32_t>(f));
}

// Converts for serialization; values too large for binary32 are rejected the
// same way NaN is, so files never contain non-finite payloads.
inline float to_f32_checked(double x, const std::string& context) {
  float f = static_cast<float>(x);
  if (!std::isfinite(f))
    fail(ErrorCode::non_finite_value, context + ": value does not fit a finite binary32");
  return f;
}

inline std::string trimmed(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline bool parse_double(const std::string& field, double& out) {
  const char* b = field.data();
  const char* e = b + field.size();
  auto r = std::from_chars(b, e, out);
  return r.ec == std::errc{} && r.ptr == e;
}

inline bool parse_long(const std::string& field, long long& out) {
  const char* b = field.data();
  const char* e = b + field.size();
  auto r = std::from_chars(b, e, out);
  return r.ec == std::errc{} && r.ptr == e;
}

struct BinaryHeader {
  std::uint32_t dim0 = 0;
  std::uint32_t dim1 = 0;
  std::uint32_t dim2 = 0;  // only for HSC1
};

// Shared header walk for the three native formats. `ndims` is 2 or 3.
inline BinaryHeader parse_binary_header(const std::string& bytes, const char* magic,
                                        int ndims, const std::string& context) {
  if (bytes.empty()) fail(ErrorCode::empty_file, context + ": file is empty");
  if (bytes.size() < 4 || std::memcmp(bytes.data(), magic, 4) != 0)
    fail(ErrorCode::malformed_header, context + ": wrong magic, expected " + magic);
  std::size_t header_size = 4 + 4 * static_cast<std::size_t>(ndims);
  if (bytes.size() < header_size)
    fail(ErrorCode::truncated_data, context + ": incomplete header");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + 4;
  BinaryHeader h;
  h.dim0 = u32_le(p);
  h.dim1 = u32_le(p + 4);
  if (ndims == 3) h.dim2 = u32_le(p + 8);
  if (h.dim0 == 0 || h.dim1 == 0 || (ndims == 3 && h.dim2 == 0))
    fail(ErrorCode::malformed_header, context + ": zero dimension in header");
  return h;
}

inline void check_payload_size(const std::string& bytes, std::size_t header_size,
                               std::size_t expected_payload, const std::string& context) {
  std::size_t have = bytes.size() - header_size;
  if (have < expected_payload)
    fail(ErrorCode::truncated_data,
         context + ": payload has " + std::to_string(have) + " bytes, expected " +
             std::to_string(expected_payload));
  if (have > expected_payload)
    fail(ErrorCode::malformed_header,
         context + ": trailing bytes after payload");
}

inline void decode_f32_payload(const std::string& bytes, std::size_t offset,
                               std::vector<double>& out, const std::string& context) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + offset;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double v = static_cast<double>(f32_le(p + 4 * i));
    if (!std::isfinite(v))
      fail(ErrorCode::non_finite_value,
           context + ": non-finite value at payload index " + std::to_string(i));
    out[i] = v;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// HSC1 hypercube and ENVI-BSQ ingestion

namespace detail {

struct EnviHeader {
  int samples = 0;
  int lines = 0;
  int bands = 0;
  std::size_t offset = 0;
};

inline EnviHeader parse_envi_header(const std::string& text, const std::string& context) {
  std::map<std::string, std::string> kv;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;  // "ENVI" sentinel and similar
    std::string key = trimmed(line.substr(0, eq));
    std::string value = trimmed(line.substr(eq + 1));
    for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (!value.empty() && value.front() == '{') {
      // Brace blocks (description, wavelength lists) may span lines; skip them.
      while (value.find('}') == std::string::npos && pos < text.size()) {
        eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        value += text.substr(pos, eol - pos);
        pos = eol + 1;
      }
      continue;
    }
    kv[key] = value;
  }

  auto require = [&](const char* key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end())
      fail(ErrorCode::malformed_header, context + ": ENVI header missing '" + key + "'");
    return it->second;
  };
  auto require_int = [&](const char* key) -> long long {
    long long v = 0;
    if (!parse_long(require(key), v) || v <= 0)
      fail(ErrorCode::malformed_header,
           context + ": ENVI header has bad value for '" + key + "'");
    return v;
  };

  EnviHeader h;
  h.samples = static_cast<int>(require_int("samples"));
  h.lines = static_cast<int>(require_int("lines"));
  h.bands = static_cast<int>(require_int("bands"));
  if (require("data type") != "4")
    fail(ErrorCode::malformed_header, context + ": only ENVI data type 4 (float32) is supported");
  std::string interleave = require("interleave");
  for (auto& c : interleave)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (interleave != "bsq")
    fail(ErrorCode::malformed_header, context + ": only BSQ interleave is supported");
  if (require("byte order") != "0")
    fail(ErrorCode::malformed_header, context + ": only byte order 0 (little-endian) is supported");
  if (kv.count("header offset")) {
    long long off = 0;
    if (!parse_long(kv["header offset"], off) || off < 0)
      fail(ErrorCode::malformed_header, context + ": bad header offset");
    h.offset = static_cast<std::size_t>(off);
  }
  return h;
}

inline Hypercube read_envi_pair(const std::string& hdr_path, const std::string& data_path,
                                const std::string& context) {
  EnviHeader h = parse_envi_header(read_all_bytes(hdr_path, context), context);
  std::string bytes = read_all_bytes(data_path, context);
  std::size_t n = static_cast<std::size_t>(h.lines) * h.samples * h.bands;
  if (bytes.size() < h.offset + 4 * n)
    fail(ErrorCode::truncated_data,
         context + ": ENVI data file too short for " + std::to_string(h.lines) + "x" +
             std::to_string(h.samples) + "x" + std::to_string(h.bands));
  Hypercube cube(h.lines, h.samples, h.bands);
  // BSQ matches the in-memory band-sequential layout element for element.
  decode_f32_payload(bytes, h.offset, cube.data, context);
  return cube;
}

}  // namespace detail

// Reads a native HSC1 cube, or ingests an ENVI-BSQ pair when given either the
// .hdr or the data file of one.
inline Hypercube read_hypercube(const std::string& path) {
  const std::string context = "read_hypercube";
  namespace fs = std::filesystem;

  fs::path p(path);
  if (p.extension() == ".hdr") {
    fs::path data = p;
    data.replace_extension();
    if (!fs::exists(data))
      fail(ErrorCode::malformed_header,
           context + ": no data file found next to ENVI header '" + path + "'");
    return detail::read_envi_pair(path, data.string(), context);
  }

  std::string bytes = detail::read_all_bytes(path, context);
  if (bytes.empty()) fail(ErrorCode::empty_file, context + ": file is empty");
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), "HSC1", 4) == 0) {
    auto h = detail::parse_binary_header(bytes, "HSC1", 3, context);
    std::size_t n = static_cast<std::size_t>(h.dim0) * h.dim1 * h.dim2;
    detail::check_payload_size(bytes, 16, 4 * n, context);
    Hypercube cube(static_cast<int>(h.dim0), static_cast<int>(h.dim1),
                   static_cast<int>(h.dim2));
    detail::decode_f32_payload(bytes, 16, cube.data, context);
    return cube;
  }

  fs::path hdr = fs::path(path).concat(".hdr");
  if (!fs::exists(hdr)) {
    hdr = fs::path(path).replace_extension(".hdr");
    if (!fs::exists(hdr))
      fail(ErrorCode::malformed_header,
           context + ": '" + path + "' is not HSC1 and no ENVI header was found");
  }
  return detail::read_envi_pair(hdr.string(), path, context);
}

inline void write_hypercube(const Hypercube& cube, const std::string& path) {
  const std::string context = "write_hypercube";
  validate(cube, context);
  std::string bytes;
  bytes.reserve(16 + 4 * cube.size());
  bytes.append("HSC1", 4);
  detail::put_u32_le(bytes, static_cast<std::uint32_t>(cube.height));
  detail::put_u32_le(bytes, static_cast<std::uint32_t>(cube.width));
  detail::put_u32_le(bytes, static_cast<std::uint32_t>(cube.bands));
  for (double x : cube.data)
    detail::put_f32_le(bytes, detail::to_f32_checked(x, context));
  detail::write_all_bytes(path, bytes, context);
}

// ---------------------------------------------------------------------------
// DMP1 detection maps

inline DetectionMap read_detection_map(const std::string& path) {
  const std::string context = "read_detection_map";
  std::string bytes = detail::read_all_bytes(path, context);
  auto h = detail::parse_binary_header(bytes, "DMP1", 2, context);
  std::size_t n = static_cast<std::size_t>(h.dim0) * h.dim1;
  detail::check_payload_size(bytes, 12, 4 * n, context);
  DetectionMap map(static_cast<int>(h.dim0), static_cast<int>(h.dim1));
  detail::decode_f32_payload(bytes, 12, map.scores, context);
  return map;
}

enum class MapFormat { dmp1, csv, pgm16 };

inline MapFormat map_format_from_name(const std::string& name) {
  if (name == "dmp1") return MapFormat::dmp1;
  if (name == "csv") return MapFormat::csv;
  if (name == "pgm16") return MapFormat::pgm16;
  fail(ErrorCode::unparseable_value, "unknown map format '" + name + "'");
}

inline void write_detection_map(const DetectionMap& map, const std::string& path,
                                MapFormat format = MapFormat::dmp1) {
  const std::string context = "write_detection_map";
  validate(map, context);
  std::string bytes;
  switch (format) {
    case MapFormat::dmp1: {
      bytes.reserve(12 + 4 * map.size());
      bytes.append("DMP1", 4);
      detail::put_u32_le(bytes, static_cast<std::uint32_t>(map.height));
      detail::put_u32_le(bytes, static_cast<std::uint32_t>(map.width));
      for (double x : map.scores)
        detail::put_f32_le(bytes, detail::to_f32_checked(x, context));
      break;
    }
    case MapFormat::csv: {
      char buf[64];
      for (int r = 0; r < map.height; ++r) {
        for (int c = 0; c < map.width; ++c) {
          std::snprintf(buf, sizeof buf, "%.17g", map.at(r, c));
          if (c) bytes.push_back(',');
          bytes += buf;
        }
        bytes.push_back('\n');
      }
      break;
    }
    case MapFormat::pgm16: {
      double lo = map.scores[0], hi = map.scores[0];
      for (double x : map.scores) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
      bytes = "P5\n" + std::to_string(map.width) + " " + std::to_string(map.height) +
              "\n65535\n";
      double span = hi - lo;
      for (double x : map.scores) {
        // Constant maps rescale to all zeros; otherwise min-max to [0, 65535].
        unsigned v = span > 0
                         ? static_cast<unsigned>(std::lround((x - lo) / span * 65535.0))
                         : 0u;
        bytes.push_back(static_cast<char>((v >> 8) & 0xff));  // big-endian
        bytes.push_back(static_cast<char>(v & 0xff));
      }
      break;
    }
  }
  detail::write_all_bytes(path, bytes, context);
}

// ---------------------------------------------------------------------------
// GTM1 ground-truth masks

inline GroundTruthMask read_mask(const std::string& path) {
  const std::string context = "read_mask";
  std::string bytes = detail::read_all_bytes(path, context);
  auto h = detail::parse_binary_header(bytes, "GTM1", 2, context);
  std::size_t n = static_cast<std::size_t>(h.dim0) * h.dim1;
  detail::check_payload_size(bytes, 12, n, context);
  GroundTruthMask mask(static_cast<int>(h.dim0), static_cast<int>(h.dim1));
  for (std::size_t i = 0; i < n; ++i) {
    auto b = static_cast<std::uint8_t>(bytes[12 + i]);
    if (b > 2)
      fail(ErrorCode::illegal_label,
           context + ": illegal label " + std::to_string(int(b)) + " at index " +
               std::to_string(i));
    mask.labels[i] = b;
  }
  return mask;
}

inline void write_mask(const GroundTruthMask& mask, const std::string& path) {
  const std::string context = "write_mask";
  validate(mask, context);
  std::string bytes;
  bytes.reserve(12 + mask.size());
  bytes.append("GTM1", 4);
  detail::put_u32_le(bytes, static_cast<std::uint32_t>(mask.height));
  detail::put_u32_le(bytes, static_cast<std::uint32_t>(mask.width));
  for (std::uint8_t l : mask.labels) bytes.push_back(static_cast<char>(l));
  detail::write_all_bytes(path, bytes, context);
}

// ---------------------------------------------------------------------------
// Signature CSV

// Accepts one value per line or "index,value" rows. '#' comments and blank
// lines are skipped; error messages give 1-based line numbers counting every
// physical line.
inline Signature read_signature(const std::string& path) {
  const std::string context = "read_signature";
  std::string text = detail::read_all_bytes(path, context);
  std::vector<double> values;
  std::size_t pos = 0;
  long line_no = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    ++line_no;
    std::string line = detail::trimmed(std::string_view(text).substr(pos, eol - pos));
    pos = eol + 1;
    if (line.empty() || line.front() == '#') continue;

    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      fields.push_back(detail::trimmed(
          std::string_view(line).substr(start, comma == std::string::npos
                                                   ? std::string::npos
                                                   : comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    auto bad_line = [&]() {
      fail(ErrorCode::unparseable_line,
           context + ": cannot parse line " + std::to_string(line_no));
    };
    if (fields.size() > 2) bad_line();
    double value = 0.0;
    if (fields.size() == 2) {
      long long index = 0;
      if (!detail::parse_long(fields[0], index)) bad_line();
      if (!detail::parse_double(fields[1], value)) bad_line();
    } else {
      if (!detail::parse_double(fields[0], value)) bad_line();
    }
    if (!std::isfinite(value))
      fail(ErrorCode::non_finite_value,
           context + ": non-finite value on line " + std::to_string(line_no));
    values.push_back(value);
  }
  if (values.empty())
    fail(ErrorCode::empty_file, context + ": '" + path + "' has no data rows");
  return Signature(std::move(values));
}

inline void write_signature(const Signature& sig, const std::string& path) {
  const std::string context = "write_signature";
  std::string bytes;
  char buf[64];
  for (double x : sig.values) {
    if (!std::isfinite(x))
      fail(ErrorCode::non_finite_value, context + ": non-finite value");
    std::snprintf(buf, sizeof buf, "%.17g", x);
    bytes += buf;
    bytes.push_back('\n');
  }
  detail::write_all_bytes(path, bytes, context);
}

}  // namespace plumekit
