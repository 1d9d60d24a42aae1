#pragma once

// Minimal ZIP container: writes uncompressed ("stored") members with a fixed
// timestamp so identical contents give identical archives; reads stored and
// deflated members.

#include <zlib.h>

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sefa/error.hpp"

namespace sefa::archive {

struct Member {
  std::string name;
  std::string data;
};

namespace detail {

inline void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

inline void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get(std::string_view in, std::size_t pos, int bytes) {
  if (pos + static_cast<std::size_t>(bytes) > in.size()) {
    throw Error(ErrorCode::SchemaViolation, "zip structure runs past end of archive");
  }
  std::uint32_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return v;
}

inline std::uint32_t crc(std::string_view data) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
}

inline std::string inflate_raw(std::string_view in, std::size_t expected) {
  std::string out(expected, '\0');
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) {
    throw Error(ErrorCode::SchemaViolation, "cannot initialize inflate");
  }
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = ::inflate(&zs, Z_FINISH);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || zs.total_out != expected) {
    throw Error(ErrorCode::SchemaViolation, "corrupt deflate stream in zip member");
  }
  return out;
}

// 1980-01-01 00:00:00 in MS-DOS format.
inline constexpr std::uint16_t kDosTime = 0;
inline constexpr std::uint16_t kDosDate = (0 << 9) | (1 << 5) | 1;

}  // namespace detail

inline std::string write_zip(const std::vector<Member>& members) {
  std::string out;
  std::string central;
  for (const Member& m : members) {
    const std::uint32_t offset = static_cast<std::uint32_t>(out.size());
    const std::uint32_t crc = detail::crc(m.data);
    const auto size = static_cast<std::uint32_t>(m.data.size());
    const auto name_len = static_cast<std::uint16_t>(m.name.size());

    detail::put32(out, 0x04034b50);
    detail::put16(out, 20);  // version needed
    detail::put16(out, 0);   // flags
    detail::put16(out, 0);   // stored
    detail::put16(out, detail::kDosTime);
    detail::put16(out, detail::kDosDate);
    detail::put32(out, crc);
    detail::put32(out, size);
    detail::put32(out, size);
    detail::put16(out, name_len);
    detail::put16(out, 0);
    out += m.name;
    out += m.data;

    detail::put32(central, 0x02014b50);
    detail::put16(central, 20);  // version made by
    detail::put16(central, 20);
    detail::put16(central, 0);
    detail::put16(central, 0);
    detail::put16(central, detail::kDosTime);
    detail::put16(central, detail::kDosDate);
    detail::put32(central, crc);
    detail::put32(central, size);
    detail::put32(central, size);
    detail::put16(central, name_len);
    detail::put16(central, 0);  // extra
    detail::put16(central, 0);  // comment
    detail::put16(central, 0);  // disk
    detail::put16(central, 0);  // internal attrs
    detail::put32(central, 0);  // external attrs
    detail::put32(central, offset);
    central += m.name;
  }
  const auto central_offset = static_cast<std::uint32_t>(out.size());
  out += central;
  detail::put32(out, 0x06054b50);
  detail::put16(out, 0);
  detail::put16(out, 0);
  detail::put16(out, static_cast<std::uint16_t>(members.size()));
  detail::put16(out, static_cast<std::uint16_t>(members.size()));
  detail::put32(out, static_cast<std::uint32_t>(central.size()));
  detail::put32(out, central_offset);
  detail::put16(out, 0);
  return out;
}

/// All members of an archive keyed by name. Only stored and deflated members
/// are accepted; CRCs are verified.
inline std::map<std::string, std::string> read_zip(std::string_view in) {
  using detail::get;
  if (in.size() < 22) throw Error(ErrorCode::SchemaViolation, "file is too short to be a zip archive");
  std::size_t eocd = std::string_view::npos;
  for (std::size_t pos = in.size() - 22 + 1; pos-- > 0;) {
    if (get(in, pos, 4) == 0x06054b50) {
      eocd = pos;
      break;
    }
    if (in.size() - pos > 22 + 0xffff) break;
  }
  if (eocd == std::string_view::npos) {
    throw Error(ErrorCode::SchemaViolation, "no zip end-of-central-directory record");
  }
  const std::uint32_t count = get(in, eocd + 10, 2);
  std::size_t pos = get(in, eocd + 16, 4);

  std::map<std::string, std::string> members;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (get(in, pos, 4) != 0x02014b50) {
      throw Error(ErrorCode::SchemaViolation, "bad zip central directory entry");
    }
    const std::uint32_t method = get(in, pos + 10, 2);
    const std::uint32_t crc = get(in, pos + 16, 4);
    const std::uint32_t csize = get(in, pos + 20, 4);
    const std::uint32_t usize = get(in, pos + 24, 4);
    const std::uint32_t name_len = get(in, pos + 28, 2);
    const std::uint32_t extra_len = get(in, pos + 30, 2);
    const std::uint32_t comment_len = get(in, pos + 32, 2);
    const std::uint32_t local = get(in, pos + 42, 4);
    if (pos + 46 + name_len > in.size()) throw Error(ErrorCode::SchemaViolation, "truncated zip name");
    std::string name(in.substr(pos + 46, name_len));
    pos += 46 + name_len + extra_len + comment_len;

    if (get(in, local, 4) != 0x04034b50) {
      throw Error(ErrorCode::SchemaViolation, "bad zip local header for " + name);
    }
    const std::size_t data_at = local + 30 + get(in, local + 26, 2) + get(in, local + 28, 2);
    if (data_at + csize > in.size()) {
      throw Error(ErrorCode::SchemaViolation, "zip member " + name + " is truncated");
    }
    const std::string_view raw = in.substr(data_at, csize);
    std::string data;
    if (method == 0) {
      data = std::string(raw);
    } else if (method == 8) {
      data = detail::inflate_raw(raw, usize);
    } else {
      throw Error(ErrorCode::SchemaViolation,
                  "zip member " + name + " uses unsupported compression method " + std::to_string(method));
    }
    if (detail::crc(data) != crc) {
      throw Error(ErrorCode::SchemaViolation, "zip member " + name + " fails its CRC check");
    }
    members.emplace(std::move(name), std::move(data));
  }
  return members;
}

}  // namespace sefa::archive
