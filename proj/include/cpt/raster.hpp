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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cpt/colorspec.hpp"
#include "cpt/error.hpp"

namespace cpt {

class RasterImage {
 public:
  RasterImage(int width, int height, Rgb fill = {})
      : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw Error(ErrorKind::kInvalidArgument, "image dimensions must be positive");
    }
    pixels_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  RasterImage(int width, int height, std::vector<Rgb> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width < 1 || height < 1) {
      throw Error(ErrorKind::kInvalidArgument, "image dimensions must be positive");
    }
    if (pixels_.size() != static_cast<std::size_t>(width) * height) {
      throw Error(ErrorKind::kDimensionMismatch, "pixel buffer length does not match dimensions");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  const Rgb& at(int x, int y) const { return pixels_[index(x, y)]; }
  Rgb& at(int x, int y) { return pixels_[index(x, y)]; }

  std::span<const Rgb> pixels() const noexcept { return pixels_; }
  std::span<Rgb> pixels() noexcept { return pixels_; }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

  int width_;
  int height_;
  std::vector<Rgb> pixels_;
};

// Axis-aligned box, top-left origin, fractional pixel coordinates.
struct BoundingBox {
  double x = 0, y = 0, w = 1, h = 1;

  double area() const noexcept { return w * h; }
  bool valid() const noexcept {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) &&
           w > 0 && h > 0 && x >= 0 && y >= 0;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline BoundingBox make_box(double x, double y, double w, double h) {
  BoundingBox b{x, y, w, h};
  if (!b.valid()) throw Error(ErrorKind::kInvalidArgument, "box must have x,y >= 0 and w,h > 0");
  return b;
}

// Half-open integer pixel rectangle [x0,x1) x [y0,y1).
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool empty() const noexcept { return x1 <= x0 || y1 <= y0; }
  long long area() const noexcept { return empty() ? 0 : 1LL * (x1 - x0) * (y1 - y0); }
};

// Floor the origin, ceil the far corner, clip to the image.
inline PixelRect rasterize_box(const BoundingBox& box, int width, int height) {
  PixelRect r;
  r.x0 = static_cast<int>(std::clamp(std::floor(box.x), 0.0, double(width)));
  r.y0 = static_cast<int>(std::clamp(std::floor(box.y), 0.0, double(height)));
  r.x1 = static_cast<int>(std::clamp(std::ceil(box.x + box.w), 0.0, double(width)));
  r.y1 = static_cast<int>(std::clamp(std::ceil(box.y + box.h), 0.0, double(height)));
  return r;
}

class SegmentMask {
 public:
  SegmentMask(int width, int height, std::vector<bool> bits)
      : width_(width), height_(height), bits_(std::move(bits)) {
    if (width < 1 || height < 1) {
      throw Error(ErrorKind::kInvalidArgument, "mask dimensions must be positive");
    }
    if (bits_.size() != static_cast<std::size_t>(width) * height) {
      throw Error(ErrorKind::kDimensionMismatch, "mask bit count does not match dimensions");
    }
  }

  static SegmentMask from_box(const BoundingBox& box, int width, int height) {
    std::vector<bool> bits(static_cast<std::size_t>(width) * height, false);
    const auto r = rasterize_box(box, width, height);
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) bits[static_cast<std::size_t>(y) * width + x] = true;
    }
    return SegmentMask(width, height, std::move(bits));
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x]; }
  const std::vector<bool>& bits() const noexcept { return bits_; }
  std::size_t count() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true)); }

  friend bool operator==(const SegmentMask&, const SegmentMask&) = default;

 private:
  int width_;
  int height_;
  std::vector<bool> bits_;
};

// Overlay transparency: the weight kept by the original pixel, 0 < alpha < 1.
class Transparency {
 public:
  explicit Transparency(double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
      throw Error(ErrorKind::kInvalidArgument, "transparency must lie in (0,1)");
    }
  }
  double value() const noexcept { return alpha_; }

 private:
  double alpha_;
};

// round-half-up(alpha*orig + (1-alpha)*overlay). The epsilon absorbs binary
// representation error so that exact .5 products round up consistently.
inline std::uint8_t blend_channel(std::uint8_t orig, std::uint8_t overlay, double alpha) {
  const double v = alpha * orig + (1.0 - alpha) * overlay;
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5 + 1e-9), 0.0, 255.0));
}

inline Rgb blend_pixel(const Rgb& orig, const Rgb& overlay, double alpha) {
  return Rgb{blend_channel(orig.r, overlay.r, alpha), blend_channel(orig.g, overlay.g, alpha),
             blend_channel(orig.b, overlay.b, alpha)};
}

inline void check_blend_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "blend alpha must lie in [0,1]");
  }
}

inline RasterImage blend_block(const RasterImage& img, const BoundingBox& box, const Rgb& rgb,
                               double alpha) {
  check_blend_alpha(alpha);
  const auto rect = rasterize_box(box, img.width(), img.height());
  if (rect.empty()) {
    throw Error(ErrorKind::kEmptyIntersection, "box covers no pixels of the image");
  }
  RasterImage out = img;
  for (int y = rect.y0; y < rect.y1; ++y) {
    for (int x = rect.x0; x < rect.x1; ++x) out.at(x, y) = blend_pixel(img.at(x, y), rgb, alpha);
  }
  return out;
}

inline RasterImage blend_mask(const RasterImage& img, const SegmentMask& mask, const Rgb& rgb,
                              double alpha) {
  check_blend_alpha(alpha);
  if (mask.width() != img.width() || mask.height() != img.height()) {
    throw Error(ErrorKind::kDimensionMismatch, "mask is " + std::to_string(mask.width()) + "x" +
                                                   std::to_string(mask.height()) + ", image is " +
                                                   std::to_string(img.width()) + "x" +
                                                   std::to_string(img.height()));
  }
  RasterImage out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (mask.at(x, y)) out.at(x, y) = blend_pixel(img.at(x, y), rgb, alpha);
    }
  }
  return out;
}

inline RasterImage pure_color_block(const Rgb& rgb, int width, int height) {
  return RasterImage(width, height, rgb);
}

enum class PromptShape { kBlock, kMask };

struct RegionAssignment {
  BoundingBox box;
  std::optional<SegmentMask> mask;
  Color color;
};

// Colors each region in list order; later assignments blend over earlier output.
inline RasterImage apply_visual_subprompt(const RasterImage& img,
                                          const std::vector<RegionAssignment>& assignments,
                                          Transparency alpha, PromptShape shape) {
  std::set<std::string> texts;
  for (const auto& a : assignments) {
    if (!texts.insert(a.color.text.str()).second) {
      throw Error(ErrorKind::kDuplicateColor,
                  "color '" + a.color.text.str() + "' assigned to more than one region");
    }
  }
  RasterImage out = img;
  for (const auto& a : assignments) {
    if (shape == PromptShape::kMask) {
      if (!a.mask) throw Error(ErrorKind::kValidation, "mask-shaped prompt requires a segmentation mask");
      out = blend_mask(out, *a.mask, a.color.visual, alpha.value());
    } else {
      out = blend_block(out, a.box, a.color.visual, alpha.value());
    }
  }
  return out;
}

}  // namespace cpt
