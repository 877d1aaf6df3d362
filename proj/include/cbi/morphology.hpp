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

// Binary morphology with disc structuring elements and 8-connected component
// filtering. The structuring element is clipped to the image: pixels outside
// the frame are ignored, so erosion never eats in from the border and
// dilation never grows in from it.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "cbi/error.hpp"
#include "cbi/image.hpp"

namespace cbi {

struct MorphConfig {
  int open_radius = 1;
  int close_radius = 2;
  int min_component_area = 25;

  void validate() const {
    if (open_radius < 0 || close_radius < 0 || min_component_area < 0) {
      throw Error(ErrorKind::ConfigError, "morphology parameters must be non-negative");
    }
  }
  /// Context radius the open/close stage reads around each output pixel.
  int window_radius() const { return 2 * (open_radius + close_radius); }
};

/// Half-widths of the disc rows: entry dy + r is the largest h with h^2 + dy^2 <= r^2.
inline std::vector<int> disc_half_widths(int radius) {
  std::vector<int> hw(static_cast<std::size_t>(2 * radius + 1));
  for (int dy = -radius; dy <= radius; ++dy) {
    int h = 0;
    while ((h + 1) * (h + 1) + dy * dy <= radius * radius) ++h;
    hw[static_cast<std::size_t>(dy + radius)] = h;
  }
  return hw;
}

namespace detail {

enum class MorphOp { Erode, Dilate };

inline MaskImage morph(const MaskImage& mask, int radius, MorphOp op) {
  if (radius <= 0) return mask;
  const int w = mask.width();
  const int h = mask.height();
  // Row prefix sums: prefix[y * (w + 1) + x] = foreground count in row y before x.
  std::vector<std::int32_t> prefix(static_cast<std::size_t>(w + 1) * h, 0);
  for (int y = 0; y < h; ++y) {
    auto row = mask.row(y);
    std::int32_t* p = &prefix[static_cast<std::size_t>(y) * (w + 1)];
    for (int x = 0; x < w; ++x) p[x + 1] = p[x] + (row[static_cast<std::size_t>(x)] ? 1 : 0);
  }
  const auto hw = disc_half_widths(radius);
  MaskImage out(mask.dims(), 0);
  for (int y = 0; y < h; ++y) {
    auto orow = out.row(y);
    for (int x = 0; x < w; ++x) {
      bool result = op == MorphOp::Erode;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        const int half = hw[static_cast<std::size_t>(dy + radius)];
        const int x0 = std::max(0, x - half);
        const int x1 = std::min(w - 1, x + half);
        const std::int32_t* p = &prefix[static_cast<std::size_t>(yy) * (w + 1)];
        const std::int32_t count = p[x1 + 1] - p[x0];
        if (op == MorphOp::Erode && count != x1 - x0 + 1) {
          result = false;
          break;
        }
        if (op == MorphOp::Dilate && count > 0) {
          result = true;
          break;
        }
      }
      orow[static_cast<std::size_t>(x)] = result ? 1 : 0;
    }
  }
  return out;
}

}  // namespace detail

inline MaskImage erode(const MaskImage& mask, int radius) {
  return detail::morph(mask, radius, detail::MorphOp::Erode);
}
inline MaskImage dilate(const MaskImage& mask, int radius) {
  return detail::morph(mask, radius, detail::MorphOp::Dilate);
}
inline MaskImage open(const MaskImage& mask, int radius) { return dilate(erode(mask, radius), radius); }
inline MaskImage close(const MaskImage& mask, int radius) { return erode(dilate(mask, radius), radius); }

struct Components {
  Raster<std::int32_t> labels;     // -1 for background, else component id
  std::vector<std::int64_t> areas;  // indexed by component id
};

/// 8-connected components in raster-scan discovery order.
inline Components label_components(const MaskImage& mask) {
  Components c;
  c.labels = Raster<std::int32_t>(mask.dims(), -1);
  const int w = mask.width();
  const int h = mask.height();
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask(x, y) || c.labels(x, y) >= 0) continue;
      const auto id = static_cast<std::int32_t>(c.areas.size());
      std::int64_t area = 0;
      c.labels(x, y) = id;
      stack.assign(1, {x, y});
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        ++area;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx;
            const int ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            if (mask(nx, ny) && c.labels(nx, ny) < 0) {
              c.labels(nx, ny) = id;
              stack.emplace_back(nx, ny);
            }
          }
        }
      }
      c.areas.push_back(area);
    }
  }
  return c;
}

inline MaskImage remove_small_components(const MaskImage& mask, std::int64_t min_area) {
  if (min_area <= 0) return mask;
  const Components c = label_components(mask);
  MaskImage out(mask.dims(), 0);
  auto labels = c.labels.pixels();
  auto px = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = (labels[i] >= 0 && c.areas[static_cast<std::size_t>(labels[i])] >= min_area) ? 1 : 0;
  }
  return out;
}

inline MaskImage foreground_mask(const GrayImage& gray) {
  MaskImage m(gray.dims(), 0);
  auto src = gray.pixels();
  auto dst = m.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] < kBackground ? 1 : 0;
  return m;
}

/// Window part of morph_clean: opening then closing of the foreground mask.
/// Reads config.window_radius() pixels of context.
inline MaskImage open_close(const MaskImage& mask, const MorphConfig& config) {
  return close(open(mask, config.open_radius), config.close_radius);
}

/// Component part of morph_clean, run on the whole image. Drops components
/// below the area threshold; surviving pixels keep their original gray, pixels
/// added by closing take the rounded mean original gray of their component.
inline GrayImage finish_clean(const GrayImage& gray, const MaskImage& cleaned, const MorphConfig& config) {
  require_same_dims(gray.dims(), cleaned.dims(), "morph_clean");
  const Components c = label_components(cleaned);
  std::vector<std::int64_t> gray_sum(c.areas.size(), 0);
  std::vector<std::int64_t> gray_count(c.areas.size(), 0);
  auto labels = c.labels.pixels();
  auto src = gray.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (labels[i] >= 0 && src[i] < kBackground) {
      gray_sum[static_cast<std::size_t>(labels[i])] += src[i];
      ++gray_count[static_cast<std::size_t>(labels[i])];
    }
  }
  GrayImage out(gray.dims(), kBackground);
  auto dst = out.pixels();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (labels[i] < 0) continue;
    const auto id = static_cast<std::size_t>(labels[i]);
    if (c.areas[id] < config.min_component_area) continue;
    if (src[i] < kBackground) {
      dst[i] = src[i];
    } else if (gray_count[id] > 0) {
      dst[i] = static_cast<std::uint8_t>((2 * gray_sum[id] + gray_count[id]) / (2 * gray_count[id]));
    } else {
      // Closing can bridge a region with no original foreground of its own.
      dst[i] = kBackground - 1;
    }
  }
  return out;
}

/// Opening, closing, then small-component removal on the foreground of a
/// filtered gray image.
inline GrayImage morph_clean(const GrayImage& gray, const MorphConfig& config) {
  config.validate();
  return finish_clean(gray, open_close(foreground_mask(gray), config), config);
}

}  // namespace cbi
