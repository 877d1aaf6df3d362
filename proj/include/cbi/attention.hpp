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

// Co-localization attention mask: regions where every biomarker's filtered
// tissue is dense at the same time.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "cbi/error.hpp"
#include "cbi/image.hpp"
#include "cbi/morphology.hpp"
#include "cbi/tiling.hpp"

namespace cbi {

struct AttentionConfig {
  int window = 65;
  /// One threshold per biomarker; a single entry applies to all of them.
  std::vector<double> thresholds{0.05};
  int close_radius = 3;
  int min_region_area = 500;

  void validate() const {
    if (window <= 0 || window % 2 == 0) throw Error(ErrorKind::ConfigError, "attention window must be odd and positive");
    if (thresholds.empty()) throw Error(ErrorKind::ConfigError, "attention needs at least one threshold");
    for (double t : thresholds) {
      if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorKind::ConfigError, "attention thresholds must lie in [0,1]");
    }
    if (close_radius < 0 || min_region_area < 0) {
      throw Error(ErrorKind::ConfigError, "attention close_radius and min_region_area must be non-negative");
    }
  }

  double threshold_for(std::size_t biomarker) const {
    return thresholds.size() == 1 ? thresholds.front() : thresholds.at(biomarker);
  }
};

struct AttentionMask {
  MaskImage mask;
  AttentionConfig config;
};

/// Inclusive-exclusive summed-area table: at(x, y) counts foreground pixels in
/// [0, x) x [0, y).
class SummedAreaTable {
 public:
  explicit SummedAreaTable(const GrayImage& gray) : width_(gray.width() + 1), sums_(gray.dims().area() + gray.width() + gray.height() + 1, 0) {
    for (int y = 0; y < gray.height(); ++y) {
      auto row = gray.row(y);
      std::int64_t run = 0;
      for (int x = 0; x < gray.width(); ++x) {
        run += row[static_cast<std::size_t>(x)] < kBackground ? 1 : 0;
        at(x + 1, y + 1) = at(x + 1, y) + run;
      }
    }
  }

  /// Foreground count in the half-open rectangle [x0, x1) x [y0, y1).
  std::int64_t count(int x0, int y0, int x1, int y1) const {
    return at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0);
  }

 private:
  std::int64_t& at(int x, int y) { return sums_[static_cast<std::size_t>(y) * width_ + x]; }
  std::int64_t at(int x, int y) const { return sums_[static_cast<std::size_t>(y) * width_ + x]; }

  std::size_t width_;
  std::vector<std::int64_t> sums_;
};

/// Fraction of foreground (gray < 255) pixels in the window x window box around
/// each pixel, with the box clipped to the image.
inline DensityMap density_map(const GrayImage& gray, int window) {
  if (window <= 0 || window % 2 == 0) throw Error(ErrorKind::ConfigError, "density window must be odd and positive");
  const SummedAreaTable sat(gray);
  const int half = window / 2;
  DensityMap out(gray.dims(), 0.0);
  for (int y = 0; y < gray.height(); ++y) {
    const int y0 = std::max(0, y - half);
    const int y1 = std::min(gray.height(), y + half + 1);
    auto row = out.row(y);
    for (int x = 0; x < gray.width(); ++x) {
      const int x0 = std::max(0, x - half);
      const int x1 = std::min(gray.width(), x + half + 1);
      const auto area = static_cast<std::int64_t>(x1 - x0) * (y1 - y0);
      row[static_cast<std::size_t>(x)] = static_cast<double>(sat.count(x0, y0, x1, y1)) / static_cast<double>(area);
    }
  }
  return out;
}

/// Tile-parallel density_map; bit-identical to the whole-image version.
inline DensityMap density_map(const GrayImage& gray, int window, TileGrid grid, int workers) {
  grid.overlap = std::max(grid.overlap, window / 2);
  if (grid.overlap >= grid.tile_size) grid.tile_size = grid.overlap + 1;
  return map_tiles(gray, grid, workers, [window](const GrayImage& tile) { return density_map(tile, window); });
}

/// Conjunctive density threshold before any morphology.
inline MaskImage threshold_conjunction(std::span<const DensityMap> densities, const AttentionConfig& config) {
  config.validate();
  if (densities.empty()) throw Error(ErrorKind::ConfigError, "co-localization needs at least one density map");
  if (config.thresholds.size() != 1 && config.thresholds.size() != densities.size()) {
    throw Error(ErrorKind::ConfigError, "expected " + std::to_string(densities.size()) + " attention thresholds, got " +
                                            std::to_string(config.thresholds.size()));
  }
  const Dims dims = densities.front().dims();
  for (std::size_t b = 1; b < densities.size(); ++b) {
    require_same_dims(dims, densities[b].dims(), "density map " + std::to_string(b));
  }
  MaskImage mask(dims, 1);
  auto m = mask.pixels();
  for (std::size_t b = 0; b < densities.size(); ++b) {
    const double t = config.threshold_for(b);
    auto d = densities[b].pixels();
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!(d[i] >= t)) m[i] = 0;
    }
  }
  return mask;
}

inline AttentionMask co_localize(std::span<const DensityMap> densities, const AttentionConfig& config) {
  MaskImage mask = threshold_conjunction(densities, config);
  mask = remove_small_components(close(mask, config.close_radius), config.min_region_area);
  return {std::move(mask), config};
}

enum class OverlayStyle { Contour, Tint };

inline constexpr double kTintAlpha = 0.35;

/// Inner boundary of the mask: set pixels with a 4-neighbour that is unset or
/// outside the image. The resulting outline is 8-connected and 1 px wide.
inline MaskImage mask_boundary(const MaskImage& mask) {
  MaskImage out(mask.dims(), 0);
  const int w = mask.width();
  const int h = mask.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask(x, y)) continue;
      const bool edge = x == 0 || y == 0 || x == w - 1 || y == h - 1 || !mask(x - 1, y) || !mask(x + 1, y) ||
                        !mask(x, y - 1) || !mask(x, y + 1);
      out(x, y) = edge ? 1 : 0;
    }
  }
  return out;
}

inline RasterImage overlay_mask(const RasterImage& base, const MaskImage& mask, OverlayStyle style, Rgb color) {
  require_same_dims(base.dims(), mask.dims(), "overlay mask");
  RasterImage out = base;
  const MaskImage target = style == OverlayStyle::Contour ? mask_boundary(mask) : mask;
  auto px = out.pixels();
  auto m = target.pixels();
  auto mix = [](std::uint8_t b, std::uint8_t c) {
    return static_cast<std::uint8_t>(std::lround((1.0 - kTintAlpha) * b + kTintAlpha * c));
  };
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (!m[i]) continue;
    px[i] = style == OverlayStyle::Contour ? color : Rgb{mix(px[i].r, color.r), mix(px[i].g, color.g), mix(px[i].b, color.b)};
  }
  return out;
}

}  // namespace cbi
