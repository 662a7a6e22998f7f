// Copyright 2026 The CPT Toolkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <png.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cpt/error.hpp"
#include "cpt/raster.hpp"

namespace cpt {

namespace detail {

struct PngImageGuard {
  png_image* image;
  ~PngImageGuard() { png_image_free(image); }
};

inline std::vector<std::uint8_t> decode_png(const void* data, std::size_t size,
                                            std::uint32_t format, int& width, int& height) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  PngImageGuard guard{&image};
  if (!png_image_begin_read_from_memory(&image, data, size)) {
    throw Error(ErrorKind::kParse, std::string("png decode failed: ") + image.message);
  }
  image.format = format;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    throw Error(ErrorKind::kParse, std::string("png decode failed: ") + image.message);
  }
  width = static_cast<int>(image.width);
  height = static_cast<int>(image.height);
  return buffer;
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

// 8-bit RGB PNG, no alpha channel, default zlib settings. Output bytes are a
// pure function of the pixels for a given libpng/zlib build.
inline std::string encode_png(const RasterImage& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> raw;
  raw.reserve(img.pixels().size() * 3);
  for (const auto& p : img.pixels()) {
    raw.push_back(p.r);
    raw.push_back(p.g);
    raw.push_back(p.b);
  }
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, raw.data(), 0, nullptr)) {
    throw Error(ErrorKind::kIo, std::string("png encode failed: ") + image.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, raw.data(), 0, nullptr)) {
    throw Error(ErrorKind::kIo, std::string("png encode failed: ") + image.message);
  }
  out.resize(size);
  png_image_free(&image);
  return out;
}

inline RasterImage decode_png_rgb(const std::string& bytes) {
  int w = 0, h = 0;
  const auto buf = detail::decode_png(bytes.data(), bytes.size(), PNG_FORMAT_RGB, w, h);
  std::vector<Rgb> pixels(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = Rgb{buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]};
  }
  return RasterImage(w, h, std::move(pixels));
}

inline RasterImage read_png(const std::filesystem::path& path) {
  try {
    return decode_png_rgb(detail::read_file_bytes(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kIo) throw;
    throw Error(ErrorKind::kParse, path.string() + ": " + e.what());
  }
}

inline void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "short write to " + path.string());
}

inline void write_png(const std::filesystem::path& path, const RasterImage& img) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_file_bytes(path, encode_png(img));
}

// Single-channel PNG mask: nonzero pixels are set.
inline SegmentMask read_mask_png(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  int w = 0, h = 0;
  const auto buf = detail::decode_png(bytes.data(), bytes.size(), PNG_FORMAT_GRAY, w, h);
  std::vector<bool> bits(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) bits[i] = buf[i] != 0;
  return SegmentMask(w, h, std::move(bits));
}

// Run-length mask text: `w,h:count,count,...`, runs alternate off/on starting
// with off, and must cover exactly w*h pixels.
inline SegmentMask parse_mask_rle(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw Error(ErrorKind::kParse, "rle mask missing ':'");
  std::istringstream dims(text.substr(0, colon));
  long long w = 0, h = 0;
  char comma = 0;
  if (!(dims >> w >> comma >> h) || comma != ',' || w < 1 || h < 1) {
    throw Error(ErrorKind::kParse, "rle mask has malformed dimensions");
  }
  std::vector<bool> bits;
  bits.reserve(static_cast<std::size_t>(w * h));
  bool on = false;
  std::string runs = text.substr(colon + 1);
  std::istringstream rs(runs);
  std::string tok;
  while (!runs.empty() && std::getline(rs, tok, ',')) {
    std::size_t used = 0;
    long long n = -1;
    try {
      n = std::stoll(tok, &used);
    } catch (const std::exception&) {
      throw Error(ErrorKind::kParse, "rle mask run '" + tok + "' is not an integer");
    }
    if (used != tok.size() || n < 0) throw Error(ErrorKind::kParse, "rle mask run '" + tok + "' is invalid");
    if (static_cast<long long>(bits.size()) + n > w * h) {
      throw Error(ErrorKind::kParse, "rle mask runs exceed w*h");
    }
    bits.insert(bits.end(), static_cast<std::size_t>(n), on);
    on = !on;
  }
  if (static_cast<long long>(bits.size()) != w * h) {
    throw Error(ErrorKind::kParse, "rle mask runs cover " + std::to_string(bits.size()) +
                                       " pixels, expected " + std::to_string(w * h));
  }
  return SegmentMask(static_cast<int>(w), static_cast<int>(h), std::move(bits));
}

inline std::string format_mask_rle(const SegmentMask& mask) {
  std::string out = std::to_string(mask.width()) + "," + std::to_string(mask.height()) + ":";
  bool on = false;
  std::size_t run = 0;
  bool first = true;
  auto flush = [&] {
    if (!first) out += ',';
    out += std::to_string(run);
    first = false;
  };
  for (bool b : mask.bits()) {
    if (b != on) {
      flush();
      on = b;
      run = 0;
    }
    ++run;
  }
  flush();
  return out;
}

}  // namespace cpt
