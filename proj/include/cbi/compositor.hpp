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
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbi/error.hpp"
#include "cbi/font.hpp"
#include "cbi/image.hpp"
#include "cbi/tiling.hpp"

namespace cbi {

/// One filtered biomarker ready for fusion.
struct Layer {
  std::string name;
  GrayImage gray;
  Rgb color{255, 0, 0};
  int order_index = 0;  // 0 = bottom
};

enum class CompositeMode { Replace, Blend };

/// Layers sorted bottom to top. Throws DuplicateOrderIndex.
inline std::vector<const Layer*> stacking_order(std::span<const Layer> layers) {
  std::vector<const Layer*> order;
  for (const Layer& l : layers) order.push_back(&l);
  std::stable_sort(order.begin(), order.end(),
                   [](const Layer* a, const Layer* b) { return a->order_index < b->order_index; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (order[i]->order_index == order[i - 1]->order_index) {
      throw Error(ErrorKind::DuplicateOrderIndex, "layers '" + order[i - 1]->name + "' and '" + order[i]->name +
                                                      "' share order_index " +
                                                      std::to_string(order[i]->order_index));
    }
  }
  return order;
}

namespace detail {

inline std::uint8_t mix(double base, double color, double s) {
  return static_cast<std::uint8_t>(std::lround((1.0 - s) * base + s * color));
}

}  // namespace detail

/// Fuses layers onto a white canvas in ascending order_index. A foreground pixel
/// (gray <= 254) contributes its color at intensity s = (255 - gray) / 255:
/// Replace writes the color tinted against white, Blend mixes it over what is
/// already there. `frame` gives the canvas size when `layers` is empty.
inline RasterImage composite(std::span<const Layer> layers, CompositeMode mode = CompositeMode::Replace,
                             std::optional<Dims> frame = std::nullopt, int workers = 1) {
  if (layers.empty() && !frame) {
    throw Error(ErrorKind::ConfigError, "composite of zero layers needs declared dimensions");
  }
  const Dims dims = frame ? *frame : layers.front().gray.dims();
  for (const Layer& l : layers) require_same_dims(dims, l.gray.dims(), "layer '" + l.name + "'");
  const auto order = stacking_order(layers);

  RasterImage out(dims, kWhite);
  parallel_rows(dims.height, workers, [&](int y) {
    auto dst = out.row(y);
    for (const Layer* layer : order) {
      auto src = layer->gray.row(y);
      const Rgb c = layer->color;
      for (std::size_t x = 0; x < dst.size(); ++x) {
        const std::uint8_t g = src[x];
        if (g == kBackground) continue;
        const double s = (255.0 - g) / 255.0;
        Rgb& o = dst[x];
        if (mode == CompositeMode::Replace) {
          o = {detail::mix(255.0, c.r, s), detail::mix(255.0, c.g, s), detail::mix(255.0, c.b, s)};
        } else {
          o = {detail::mix(o.r, c.r, s), detail::mix(o.g, c.g, s), detail::mix(o.b, c.b, s)};
        }
      }
    }
  });
  return out;
}

/// Draws `text` with its top-left corner at (x, y), each glyph pixel scaled to
/// a scale x scale block. Clipped to the image.
inline void draw_text(RasterImage& image, int x, int y, std::string_view text, int scale, Rgb color) {
  int pen = x;
  for (char ch : text) {
    const font::Glyph g = font::glyph(ch);
    for (int gy = 0; gy < font::kGlyphHeight; ++gy) {
      for (int gx = 0; gx < font::kGlyphWidth; ++gx) {
        if (!(g[static_cast<std::size_t>(gy)] & (0x10 >> gx))) continue;
        for (int sy = 0; sy < scale; ++sy) {
          for (int sx = 0; sx < scale; ++sx) {
            const int px = pen + gx * scale + sx;
            const int py = y + gy * scale + sy;
            if (image.bounds().contains(px, py)) image(px, py) = color;
          }
        }
      }
    }
    pen += (font::kGlyphWidth + 1) * scale;
  }
}

struct LegendLayout {
  static constexpr int kRowHeight = 20;
  static constexpr int kMargin = 4;
  static constexpr int kSwatch = 16;
  static constexpr int kTextX = kMargin + kSwatch + 6;
  static constexpr int kTextScale = 2;

  static Rect swatch(std::size_t row) {
    return {kMargin, kMargin + static_cast<int>(row) * kRowHeight + 2, kSwatch, kSwatch};
  }
  static int text_y(std::size_t row) { return kMargin + static_cast<int>(row) * kRowHeight + 3; }
};

/// Color key: one swatch and label per layer, bottom layer first.
inline RasterImage legend(std::span<const Layer> layers) {
  if (layers.empty()) throw Error(ErrorKind::ConfigError, "legend needs at least one layer");
  const auto order = stacking_order(layers);
  std::size_t longest = 0;
  for (const Layer* l : order) longest = std::max(longest, l->name.size());
  using L = LegendLayout;
  const int width = L::kTextX + static_cast<int>(longest) * (font::kGlyphWidth + 1) * L::kTextScale + L::kMargin;
  const int height = 2 * L::kMargin + static_cast<int>(order.size()) * L::kRowHeight;
  RasterImage out(width, height, kWhite);
  for (std::size_t row = 0; row < order.size(); ++row) {
    const Rect sw = L::swatch(row);
    for (int y = sw.y; y < sw.bottom(); ++y) {
      for (int x = sw.x; x < sw.right(); ++x) {
        const bool border = x == sw.x || y == sw.y || x == sw.right() - 1 || y == sw.bottom() - 1;
        out(x, y) = border ? Rgb{0, 0, 0} : order[row]->color;
      }
    }
    draw_text(out, L::kTextX, L::text_y(row), order[row]->name, L::kTextScale, {0, 0, 0});
  }
  return out;
}

}  // namespace cbi
