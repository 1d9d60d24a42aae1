#pragma once

#include <zlib.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sefa/error.hpp"
#include "sefa/io.hpp"

namespace sefa {

/// 8-bit RGB raster, row-major, three bytes per pixel.
struct RenderedImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  RenderedImage() = default;
  RenderedImage(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h * 3, 0) {}

  std::uint8_t* at(std::size_t x, std::size_t y) { return &pixels[(y * width + x) * 3]; }
  const std::uint8_t* at(std::size_t x, std::size_t y) const { return &pixels[(y * width + x) * 3]; }

  friend bool operator==(const RenderedImage&, const RenderedImage&) = default;
};

/// Places images side by side; all must share the same height.
inline RenderedImage hstack(const std::vector<RenderedImage>& frames) {
  if (frames.empty()) throw Error(ErrorCode::InvalidArgument, "no frames to stack");
  std::size_t width = 0;
  for (const auto& f : frames) {
    if (f.height != frames.front().height) throw Error(ErrorCode::DimMismatch, "frame heights differ");
    width += f.width;
  }
  RenderedImage strip(width, frames.front().height);
  for (std::size_t y = 0; y < strip.height; ++y) {
    std::size_t x0 = 0;
    for (const auto& f : frames) {
      std::copy_n(f.at(0, y), f.width * 3, strip.at(x0, y));
      x0 += f.width;
    }
  }
  return strip;
}

namespace detail {

inline void put_be32(std::string& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((v >> shift) & 0xff));
}

inline void png_chunk(std::string& out, const char* type, const std::string& data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  std::string body(type, 4);
  body += data;
  out += body;
  put_be32(out, static_cast<std::uint32_t>(
                    ::crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
}

}  // namespace detail

/// PNG, 8-bit truecolor, no filtering, zlib level 6.
inline std::string encode_png(const RenderedImage& img) {
  std::string raw;
  raw.reserve(img.height * (img.width * 3 + 1));
  for (std::size_t y = 0; y < img.height; ++y) {
    raw.push_back('\0');
    raw.append(reinterpret_cast<const char*>(img.at(0, y)), img.width * 3);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::string packed(bound, '\0');
  if (compress2(reinterpret_cast<Bytef*>(packed.data()), &bound,
                reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()), 6) != Z_OK) {
    throw Error(ErrorCode::IoFailure, "zlib compression failed");
  }
  packed.resize(bound);

  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  detail::put_be32(ihdr, static_cast<std::uint32_t>(img.width));
  detail::put_be32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr += std::string("\x08\x02\x00\x00\x00", 5);  // depth 8, RGB, deflate, no filter, no interlace
  detail::png_chunk(out, "IHDR", ihdr);
  detail::png_chunk(out, "IDAT", packed);
  detail::png_chunk(out, "IEND", "");
  return out;
}

inline void save_png(const RenderedImage& img, const std::filesystem::path& path) {
  io::write_atomically(path, encode_png(img));
}

}  // namespace sefa
