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

// Synthetic H&E / CD30 / PAX5 slide triple with a known co-localized region,
// used by the demo command and the end-to-end tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "cbi/image.hpp"
#include "cbi/samples.hpp"

namespace cbi {

struct SyntheticSlide {
  RasterImage he;
  RasterImage cd30;
  RasterImage pax5;
  /// 1 inside the intersection of the overlapping CD30 and PAX5 cell clusters.
  MaskImage overlap_truth;
};

namespace detail {

struct Cluster {
  double x;
  double y;
  double radius;
};

inline Rgb jitter(Rgb base, int amount, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(-amount, amount);
  auto ch = [&](std::uint8_t v) { return static_cast<std::uint8_t>(std::clamp(v + d(rng), 0, 255)); };
  return {ch(base.r), ch(base.g), ch(base.b)};
}

/// Normal draw around the class-box midpoint with sigma = spread * range,
/// clamped into the box.
inline Rgb class_color(const ClassBox& box, std::mt19937_64& rng, double spread) {
  auto ch = [&](const ChannelRange& r) {
    std::normal_distribution<double> n(r.midpoint(), (r.hi - r.lo) * spread);
    return static_cast<std::uint8_t>(std::clamp<long>(std::lround(n(rng)), r.lo, r.hi));
  };
  return {ch(box.r), ch(box.g), ch(box.b)};
}

inline void paint_disc(RasterImage& img, double cx, double cy, double r, Rgb color, int noise, std::mt19937_64& rng) {
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - r)));
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(cx + r)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - r)));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(cy + r)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      if (dx * dx + dy * dy <= r * r) img(x, y) = jitter(color, noise, rng);
    }
  }
}

}  // namespace detail

/// Paints a size x size slide triple. Four CD30 clusters carry cells from
/// classes 3-5; four PAX5 clusters carry class-4 cells. Exactly one CD30 and one
/// PAX5 cluster overlap. Both IHC images share a class-0 background with
/// scattered class-1 (hematoxylin blue) nuclei.
inline SyntheticSlide make_synthetic_slide(int size, std::uint64_t seed) {
  const ClassRangeTable table = builtin_table();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double s = size / 2048.0;
  const double radius = 110.0 * s;

  const std::vector<detail::Cluster> cd30_clusters = {
      {0.25 * size, 0.25 * size, radius},
      {0.75 * size, 0.25 * size, radius},
      {0.25 * size, 0.75 * size, radius},
      {0.55 * size, 0.60 * size, radius},
  };
  const std::vector<detail::Cluster> pax5_clusters = {
      {0.55 * size + 90.0 * s, 0.60 * size + 60.0 * s, radius},
      {0.50 * size, 0.12 * size, radius},
      {0.12 * size, 0.50 * size, radius},
      {0.85 * size, 0.85 * size, radius},
  };

  SyntheticSlide slide;
  auto background = [&] {
    RasterImage img(size, size);
    for (Rgb& p : img.pixels()) p = detail::jitter({231, 231, 230}, 4, rng);
    return img;
  };
  slide.cd30 = background();
  slide.pax5 = background();
  slide.he = RasterImage(size, size);
  for (Rgb& p : slide.he.pixels()) p = detail::jitter({238, 206, 224}, 4, rng);

  // Hematoxylin-blue nuclei scattered over both IHC sections and the H&E.
  const int nuclei = static_cast<int>(size * size * 0.0004);
  for (int i = 0; i < nuclei; ++i) {
    const double x = unit(rng) * size;
    const double y = unit(rng) * size;
    const double r = 2.5 + 2.0 * unit(rng);
    const Rgb blue = detail::class_color(table[1], rng, 0.05);
    detail::paint_disc(slide.cd30, x, y, r, blue, 3, rng);
    detail::paint_disc(slide.pax5, x + 3.0, y - 2.0, r, blue, 3, rng);
    detail::paint_disc(slide.he, x, y, r, {96, 52, 140}, 6, rng);
  }

  auto paint_cells = [&](RasterImage& img, const detail::Cluster& c, const std::vector<int>& classes) {
    const double cell_area = std::numbers::pi * 5.5 * 5.5;
    const int cells = static_cast<int>(0.60 * c.radius * c.radius * std::numbers::pi / cell_area);
    for (int i = 0; i < cells; ++i) {
      const double cell_r = 4.0 + 3.0 * unit(rng);
      const double rho = (c.radius - cell_r) * std::sqrt(unit(rng));
      const double phi = 2.0 * std::numbers::pi * unit(rng);
      const double x = c.x + rho * std::cos(phi);
      const double y = c.y + rho * std::sin(phi);
      const int k = classes[static_cast<std::size_t>(unit(rng) * classes.size()) % classes.size()];
      detail::paint_disc(img, x, y, cell_r, detail::class_color(table[static_cast<std::size_t>(k)], rng, 0.25), 3, rng);
      detail::paint_disc(slide.he, x, y, cell_r * 0.7, {120, 60, 150}, 6, rng);
    }
  };
  for (const auto& c : cd30_clusters) paint_cells(slide.cd30, c, {3, 4, 5});
  for (const auto& c : pax5_clusters) paint_cells(slide.pax5, c, {4});

  slide.overlap_truth = MaskImage(size, size, 0);
  const detail::Cluster& a = cd30_clusters[3];
  const detail::Cluster& b = pax5_clusters[0];
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double da = (x - a.x) * (x - a.x) + (y - a.y) * (y - a.y);
      const double db = (x - b.x) * (x - b.x) + (y - b.y) * (y - b.y);
      slide.overlap_truth(x, y) = (da <= a.radius * a.radius && db <= b.radius * b.radius) ? 1 : 0;
    }
  }
  return slide;
}

}  // namespace cbi
