// Copyright 2026 The CBI Authors
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
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cbi/error.hpp"

namespace cbi {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};
static_assert(sizeof(Rgb) == 3, "Rgb must be tightly packed");

inline constexpr Rgb kWhite{255, 255, 255};
/// Gray value reserved for background in filtered images.
inline constexpr std::uint8_t kBackground = 255;

struct Dims {
  int width = 0;
  int height = 0;

  std::size_t area() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  friend bool operator==(const Dims&, const Dims&) = default;
};

inline std::string to_string(Dims d) {
  return std::to_string(d.width) + "x" + std::to_string(d.height);
}

/// Half-open pixel rectangle [x, x+width) x [y, y+height).
struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  int right() const { return x + width; }
  int bottom() const { return y + height; }
  bool empty() const { return width <= 0 || height <= 0; }
  bool contains(int px, int py) const { return px >= x && px < right() && py >= y && py < bottom(); }
  bool contains(const Rect& o) const {
    return o.x >= x && o.y >= y && o.right() <= right() && o.bottom() <= bottom();
  }
  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Row-major raster of Pixel values. Pixel is Rgb for color images, uint8_t for
/// gray and mask images, double for density maps.
template <typename Pixel>
class Raster {
 public:
  using value_type = Pixel;

  Raster() = default;
  Raster(int width, int height, Pixel fill = Pixel{}) : width_(width), height_(height) {
    if (width < 0 || height < 0) {
      throw Error(ErrorKind::DimensionMismatch, "negative raster dimensions");
    }
    pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }
  explicit Raster(Dims d, Pixel fill = Pixel{}) : Raster(d.width, d.height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  Dims dims() const { return {width_, height_}; }
  Rect bounds() const { return {0, 0, width_, height_}; }
  bool empty() const { return pixels_.empty(); }
  std::size_t size() const { return pixels_.size(); }

  Pixel& operator()(int x, int y) { return pixels_[index(x, y)]; }
  const Pixel& operator()(int x, int y) const { return pixels_[index(x, y)]; }

  std::span<Pixel> row(int y) {
    return {pixels_.data() + static_cast<std::size_t>(y) * width_, static_cast<std::size_t>(width_)};
  }
  std::span<const Pixel> row(int y) const {
    return {pixels_.data() + static_cast<std::size_t>(y) * width_, static_cast<std::size_t>(width_)};
  }

  std::span<Pixel> pixels() { return pixels_; }
  std::span<const Pixel> pixels() const { return pixels_; }
  Pixel* data() { return pixels_.data(); }
  const Pixel* data() const { return pixels_.data(); }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<Pixel> pixels_;
};

using RasterImage = Raster<Rgb>;
using GrayImage = Raster<std::uint8_t>;
/// Binary raster, 0 or 1 per pixel.
using MaskImage = Raster<std::uint8_t>;
using DensityMap = Raster<double>;

template <typename Pixel>
Raster<Pixel> crop(const Raster<Pixel>& image, const Rect& r) {
  if (!image.bounds().contains(r)) {
    throw Error(ErrorKind::DimensionMismatch, "crop rectangle outside image");
  }
  Raster<Pixel> out(r.width, r.height);
  for (int y = 0; y < r.height; ++y) {
    auto src = image.row(r.y + y).subspan(static_cast<std::size_t>(r.x), static_cast<std::size_t>(r.width));
    std::copy(src.begin(), src.end(), out.row(y).begin());
  }
  return out;
}

/// Copies the region `src_rect` of `src` into `dst` with its top-left at (dst_x, dst_y).
template <typename Pixel>
void paste(Raster<Pixel>& dst, const Raster<Pixel>& src, const Rect& src_rect, int dst_x, int dst_y) {
  if (!src.bounds().contains(src_rect) ||
      !dst.bounds().contains(Rect{dst_x, dst_y, src_rect.width, src_rect.height})) {
    throw Error(ErrorKind::DimensionMismatch, "paste rectangle outside image");
  }
  for (int y = 0; y < src_rect.height; ++y) {
    auto s = src.row(src_rect.y + y).subspan(static_cast<std::size_t>(src_rect.x),
                                             static_cast<std::size_t>(src_rect.width));
    std::copy(s.begin(), s.end(), dst.row(dst_y + y).begin() + dst_x);
  }
}

inline void require_same_dims(Dims a, Dims b, const std::string& what) {
  if (!(a == b)) {
    throw Error(ErrorKind::DimensionMismatch, what + ": " + to_string(a) + " vs " + to_string(b));
  }
}

}  // namespace cbi
