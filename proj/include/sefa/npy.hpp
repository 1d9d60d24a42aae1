#pragma once

// Reader and writer for the NumPy .npy container, version 1.0, restricted to
// little-endian float32/float64 C-ordered arrays of one or two dimensions.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sefa/error.hpp"
#include "sefa/io.hpp"
#include "sefa/matrix.hpp"

namespace sefa::npy {

static_assert(std::endian::native == std::endian::little,
              "npy payloads are read and written in host byte order");

enum class Dtype { Float32, Float64 };

struct Header {
  Dtype dtype = Dtype::Float64;
  bool fortran_order = false;
  std::vector<std::size_t> shape;
};

struct Array {
  Header header;
  std::vector<double> data;
};

inline constexpr char kMagic[] = "\x93NUMPY";
inline constexpr std::size_t kMagicSize = 6;

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

/// Returns the raw text of the value stored under `key` in the header dict.
inline std::optional<std::string_view> dict_value(std::string_view dict, std::string_view key) {
  for (char quote : {'\'', '"'}) {
    const std::string needle = std::string(1, quote) + std::string(key) + quote;
    const auto pos = dict.find(needle);
    if (pos == std::string_view::npos) continue;
    auto rest = dict.substr(pos + needle.size());
    rest = trim(rest);
    if (rest.empty() || rest.front() != ':') return std::nullopt;
    rest = trim(rest.substr(1));
    std::size_t end = 0;
    if (!rest.empty() && rest.front() == '(') {
      end = rest.find(')');
      if (end == std::string_view::npos) return std::nullopt;
      return rest.substr(0, end + 1);
    }
    if (!rest.empty() && (rest.front() == '\'' || rest.front() == '"')) {
      end = rest.find(rest.front(), 1);
      if (end == std::string_view::npos) return std::nullopt;
      return rest.substr(0, end + 1);
    }
    end = rest.find_first_of(",}");
    return trim(rest.substr(0, end));
  }
  return std::nullopt;
}

inline Header parse_header(std::string_view text, const std::string& origin) {
  auto schema = [&](const std::string& what) {
    return Error(ErrorCode::BadMagic, origin + ": malformed header, " + what);
  };
  text = trim(text);
  if (text.empty() || text.front() != '{' || text.back() != '}') {
    throw schema("header is not a dict literal");
  }
  Header h;

  const auto descr = dict_value(text, "descr");
  if (!descr) throw schema("missing 'descr'");
  const std::string_view d = descr->substr(1, descr->size() - 2);
  if (d == "<f8") {
    h.dtype = Dtype::Float64;
  } else if (d == "<f4") {
    h.dtype = Dtype::Float32;
  } else {
    throw Error(ErrorCode::UnsupportedDtype,
                origin + ": dtype '" + std::string(d) + "' is not one of '<f4', '<f8'");
  }

  const auto fortran = dict_value(text, "fortran_order");
  if (!fortran) throw schema("missing 'fortran_order'");
  if (*fortran == "False") {
    h.fortran_order = false;
  } else if (*fortran == "True") {
    h.fortran_order = true;
  } else {
    throw schema("fortran_order must be True or False");
  }

  const auto shape = dict_value(text, "shape");
  if (!shape || shape->front() != '(') throw schema("missing 'shape' tuple");
  std::string_view dims = shape->substr(1, shape->size() - 2);
  while (!(dims = trim(dims)).empty()) {
    const auto comma = dims.find(',');
    const auto token = trim(dims.substr(0, comma));
    if (!token.empty()) {
      std::size_t value = 0;
      for (char c : token) {
        if (c < '0' || c > '9') throw schema("non-integer shape entry");
        value = value * 10 + static_cast<std::size_t>(c - '0');
      }
      h.shape.push_back(value);
    }
    if (comma == std::string_view::npos) break;
    dims.remove_prefix(comma + 1);
  }
  return h;
}

inline std::string header_text(const Header& h) {
  std::string shape = "(";
  for (std::size_t i = 0; i < h.shape.size(); ++i) {
    shape += std::to_string(h.shape[i]);
    if (h.shape.size() == 1 || i + 1 < h.shape.size()) shape += ", ";
  }
  if (h.shape.size() == 1) shape.resize(shape.size() - 1);
  shape += ")";
  std::string dict = std::string("{'descr': '") + (h.dtype == Dtype::Float64 ? "<f8" : "<f4") +
                     "', 'fortran_order': " + (h.fortran_order ? "True" : "False") +
                     ", 'shape': " + shape + ", }";
  // Pad with spaces so magic + version + length + header is a multiple of 64.
  const std::size_t unpadded = kMagicSize + 2 + 2 + dict.size() + 1;
  dict.append((64 - unpadded % 64) % 64, ' ');
  dict.push_back('\n');
  return dict;
}

}  // namespace detail

/// Decodes an in-memory .npy image. `origin` names the source in errors.
inline Array decode(std::string_view bytes, const std::string& origin = "<memory>") {
  if (bytes.size() < kMagicSize + 4) {
    if (bytes.substr(0, std::min(bytes.size(), kMagicSize)) !=
        std::string_view(kMagic, std::min(bytes.size(), kMagicSize))) {
      throw Error(ErrorCode::BadMagic, origin + ": missing \\x93NUMPY magic");
    }
    throw Error(ErrorCode::TruncatedFile, origin + ": file ends inside the preamble");
  }
  if (bytes.substr(0, kMagicSize) != std::string_view(kMagic, kMagicSize)) {
    throw Error(ErrorCode::BadMagic, origin + ": missing \\x93NUMPY magic");
  }
  if (bytes[6] != '\x01' || bytes[7] != '\x00') {
    throw Error(ErrorCode::BadMagic, origin + ": format version " +
                                         std::to_string(static_cast<unsigned char>(bytes[6])) +
                                         "." +
                                         std::to_string(static_cast<unsigned char>(bytes[7])) +
                                         " is not 1.0");
  }
  const std::size_t header_len = static_cast<unsigned char>(bytes[8]) |
                                 (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  const std::size_t offset = 10 + header_len;
  if (bytes.size() < offset) {
    throw Error(ErrorCode::TruncatedFile, origin + ": file ends inside the header");
  }

  Array array;
  array.header = detail::parse_header(bytes.substr(10, header_len), origin);
  if (array.header.fortran_order) {
    throw Error(ErrorCode::UnsupportedDtype, origin + ": fortran_order arrays are not supported");
  }
  std::size_t count = 1;
  for (std::size_t dim : array.header.shape) count *= dim;
  const std::size_t width = array.header.dtype == Dtype::Float64 ? 8 : 4;
  if (bytes.size() - offset < count * width) {
    throw Error(ErrorCode::TruncatedFile,
                origin + ": payload holds " + std::to_string(bytes.size() - offset) +
                    " bytes, shape requires " + std::to_string(count * width));
  }

  array.data.resize(count);
  const char* payload = bytes.data() + offset;
  if (width == 8) {
    std::memcpy(array.data.data(), payload, count * 8);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      float f;
      std::memcpy(&f, payload + i * 4, 4);
      array.data[i] = static_cast<double>(f);
    }
  }
  return array;
}

inline std::string encode(const Header& header, std::span<const double> data) {
  const std::string text = detail::header_text(header);
  std::string out(kMagic, kMagicSize);
  out.push_back('\x01');
  out.push_back('\x00');
  out.push_back(static_cast<char>(text.size() & 0xff));
  out.push_back(static_cast<char>((text.size() >> 8) & 0xff));
  out += text;
  if (header.dtype == Dtype::Float64) {
    out.append(reinterpret_cast<const char*>(data.data()), data.size() * 8);
  } else {
    for (double x : data) {
      const float f = static_cast<float>(x);
      out.append(reinterpret_cast<const char*>(&f), 4);
    }
  }
  return out;
}

inline Matrix to_matrix(Array array, const std::string& origin) {
  if (array.header.shape.size() != 2) {
    throw Error(ErrorCode::NotTwoDimensional,
                origin + ": array has " + std::to_string(array.header.shape.size()) +
                    " dimensions, expected 2");
  }
  const std::size_t rows = array.header.shape[0];
  const std::size_t cols = array.header.shape[1];
  array.data.resize(rows * cols);
  return Matrix(rows, cols, std::move(array.data));
}

inline std::string encode_matrix(const Matrix& m, Dtype dtype = Dtype::Float64) {
  return encode(Header{dtype, false, {m.rows(), m.cols()}}, m.values());
}

/// Loads a 2-D array; float32 payloads are widened exactly.
inline Matrix load_matrix(const std::filesystem::path& path) {
  return to_matrix(decode(io::read_file(path), path.string()), path.string());
}

/// Writes a float64 array through a temporary file and a rename.
inline void save_matrix(const Matrix& m, const std::filesystem::path& path,
                        Dtype dtype = Dtype::Float64) {
  io::write_atomically(path, encode_matrix(m, dtype));
}

inline Vector load_vector(const std::filesystem::path& path) {
  Array array = decode(io::read_file(path), path.string());
  if (array.header.shape.size() != 1) {
    throw Error(ErrorCode::BadShape, path.string() + ": array has " +
                                         std::to_string(array.header.shape.size()) +
                                         " dimensions, expected 1");
  }
  array.data.resize(array.header.shape[0]);
  return Vector(std::move(array.data));
}

inline void save_vector(const Vector& v, const std::filesystem::path& path,
                        Dtype dtype = Dtype::Float64) {
  io::write_atomically(path, encode(Header{dtype, false, {v.dim()}}, v.values()));
}

}  // namespace sefa::npy
