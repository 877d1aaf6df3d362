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

#include <gtest/gtest.h>

#include <random>

#include "cbi/attention.hpp"
#include "cbi/pipeline.hpp"
#include "oracles.hpp"

namespace {

using cbi::AttentionConfig;
using cbi::DensityMap;
using cbi::GrayImage;
using cbi::MaskImage;

std::vector<DensityMap> densities(const std::vector<GrayImage>& grays, int window) {
  std::vector<DensityMap> out;
  for (const auto& g : grays) out.push_back(cbi::density_map(g, window));
  return out;
}

TEST(Density, SaturatedAndEmpty) {
  const DensityMap full = cbi::density_map(GrayImage(30, 20, 0), 65);
  for (double d : full.pixels()) EXPECT_EQ(d, 1.0);
  const DensityMap none = cbi::density_map(GrayImage(30, 20, 255), 5);
  for (double d : none.pixels()) EXPECT_EQ(d, 0.0);
}

TEST(Density, HalfForegroundSmallImage) {
  GrayImage g(4, 4, 255);
  for (int y = 0; y < 4; ++y) {
    g(0, y) = 10;
    g(1, y) = 10;
  }
  const DensityMap d = cbi::density_map(g, 65);
  for (double v : d.pixels()) EXPECT_EQ(v, 0.5);
}

TEST(Density, MatchesBruteForceAndStaysInRange) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int w = std::uniform_int_distribution<int>(1, 50)(rng);
    const int h = std::uniform_int_distribution<int>(1, 50)(rng);
    const int window = 2 * std::uniform_int_distribution<int>(0, 12)(rng) + 1;
    const GrayImage g = oracle::random_gray(w, h, rng, 8, 8.0);
    const DensityMap d = cbi::density_map(g, window);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        ASSERT_EQ(d(x, y), oracle::density_at(g, x, y, window));
        ASSERT_GE(d(x, y), 0.0);
        ASSERT_LE(d(x, y), 1.0);
      }
    }
  }
}

TEST(Density, RejectsEvenWindow) { EXPECT_THROW(cbi::density_map(GrayImage(3, 3), 4), cbi::Error); }

TEST(Density, TiledBitIdentical) {
  std::mt19937_64 rng(2);
  const GrayImage g = oracle::random_gray(300, 211, rng, 50, 15.0);
  const DensityMap whole = cbi::density_map(g, 65);
  for (int tile : {40, 64, 256}) {
    for (int workers : {1, 4}) {
      EXPECT_EQ(cbi::density_map(g, 65, {tile, 0}, workers), whole) << tile;
    }
  }
}

TEST(CoLocalize, ConjunctionWithEmptyBiomarker) {
  const std::vector<GrayImage> g{GrayImage(20, 20, 0), GrayImage(20, 20, 255)};
  AttentionConfig cfg;
  cfg.close_radius = 0;
  cfg.min_region_area = 0;
  const auto m = cbi::co_localize(densities(g, 5), cfg);
  for (auto v : m.mask.pixels()) EXPECT_EQ(v, 0);
}

TEST(CoLocalize, ThresholdZeroGivesAllOnes) {
  std::mt19937_64 rng(3);
  const GrayImage g = oracle::random_gray(25, 25, rng, 3, 4.0);
  const auto d = densities({g, g}, 7);
  const AttentionConfig cfg{7, {0.0}, 0, 0};
  EXPECT_EQ(cbi::co_localize(d, cfg).mask, MaskImage(25, 25, 1));
}

TEST(CoLocalize, OverlappingBlobsOnly) {
  GrayImage a(64, 64, 255);
  GrayImage b(64, 64, 255);
  auto disc = [](GrayImage& g, int cx, int cy, int r) {
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) g(x, y) = 100;
      }
    }
  };
  disc(a, 20, 20, 9);
  disc(a, 48, 48, 9);  // overlaps b
  disc(b, 50, 46, 9);
  disc(b, 14, 50, 8);
  const AttentionConfig cfg{9, {0.3, 0.3}, 1, 20};
  const auto m = cbi::co_localize(densities({a, b}, 9), cfg);
  EXPECT_EQ(m.mask, oracle::co_localize({a, b}, {0.3, 0.3}, 9, 1, 20));
  EXPECT_EQ(m.mask(49, 47), 1);
  EXPECT_EQ(m.mask(20, 20), 0);
  EXPECT_EQ(m.mask(14, 50), 0);
}

TEST(CoLocalize, MatchesBruteForceOracle) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const std::vector<GrayImage> g{oracle::random_gray(64, 64, rng, 10, 8.0), oracle::random_gray(64, 64, rng, 10, 8.0)};
    const std::vector<double> t{std::uniform_real_distribution<double>(0.0, 0.4)(rng),
                                std::uniform_real_distribution<double>(0.0, 0.4)(rng)};
    const AttentionConfig cfg{9, t, 2, 30};
    const auto d = densities(g, 9);
    EXPECT_EQ(cbi::threshold_conjunction(d, cfg), oracle::threshold_conjunction(g, t, 9));
    EXPECT_EQ(cbi::co_localize(d, cfg).mask, oracle::co_localize(g, t, 9, 2, 30));
  }
}

TEST(CoLocalize, MonotoneInThreshold) {
  std::mt19937_64 rng(5);
  const std::vector<GrayImage> g{oracle::random_gray(64, 64, rng, 12, 9.0), oracle::random_gray(64, 64, rng, 12, 9.0)};
  const auto d = densities(g, 15);
  MaskImage previous(64, 64, 1);
  for (double t = 0.0; t <= 1.0; t += 0.05) {
    const MaskImage m = cbi::threshold_conjunction(d, {15, {t, 0.1}, 0, 0});
    for (std::size_t i = 0; i < m.size(); ++i) ASSERT_LE(m.pixels()[i], previous.pixels()[i]);
    previous = m;
  }
}

TEST(CoLocalize, TiledMatchesWhole) {
  std::mt19937_64 rng(6);
  const std::vector<GrayImage> g{oracle::random_gray(180, 140, rng, 30, 14.0),
                                 oracle::random_gray(180, 140, rng, 30, 14.0)};
  const auto d = densities(g, 21);
  const AttentionConfig cfg{21, {0.2}, 3, 50};
  const MaskImage whole = cbi::co_localize(d, cfg).mask;
  for (int tile : {32, 100}) EXPECT_EQ(cbi::co_localize_tiled(d, cfg, {tile, 0}, 3).mask, whole);
}

TEST(CoLocalize, Errors) {
  const std::vector<DensityMap> d{DensityMap(4, 4, 0.5), DensityMap(5, 4, 0.5)};
  try {
    cbi::co_localize(d, {});
    FAIL();
  } catch (const cbi::Error& e) {
    EXPECT_EQ(e.kind(), cbi::ErrorKind::DimensionMismatch);
  }
  const std::vector<DensityMap> ok{DensityMap(4, 4, 0.5), DensityMap(4, 4, 0.5)};
  EXPECT_THROW(cbi::co_localize(ok, {65, {0.1, 0.2, 0.3}, 3, 500}), cbi::Error);
  EXPECT_THROW((AttentionConfig{64, {0.1}, 3, 500}.validate()), cbi::Error);
  EXPECT_THROW((AttentionConfig{65, {1.5}, 3, 500}.validate()), cbi::Error);
}

TEST(Overlay, EmptyMaskLeavesBase) {
  cbi::RasterImage base(12, 9, {10, 20, 30});
  EXPECT_EQ(cbi::overlay_mask(base, MaskImage(12, 9, 0), cbi::OverlayStyle::Contour, {0, 255, 0}), base);
  EXPECT_EQ(cbi::overlay_mask(base, MaskImage(12, 9, 0), cbi::OverlayStyle::Tint, {0, 255, 0}), base);
}

TEST(Overlay, FullMaskTintBlendsOnce) {
  cbi::RasterImage base(6, 6, {100, 100, 100});
  const auto out = cbi::overlay_mask(base, MaskImage(6, 6, 1), cbi::OverlayStyle::Tint, {0, 200, 0});
  const cbi::Rgb expected{static_cast<std::uint8_t>(std::lround(0.65 * 100)),
                          static_cast<std::uint8_t>(std::lround(0.65 * 100 + 0.35 * 200)),
                          static_cast<std::uint8_t>(std::lround(0.65 * 100))};
  for (const auto& p : out.pixels()) EXPECT_EQ(p, expected);
}

TEST(Overlay, SquareContourIsItsBoundary) {
  MaskImage m(30, 30, 0);
  for (int y = 10; y < 20; ++y) {
    for (int x = 5; x < 15; ++x) m(x, y) = 1;
  }
  const cbi::Rgb base_color{200, 200, 200};
  const cbi::Rgb ink{255, 0, 0};
  const auto out = cbi::overlay_mask(cbi::RasterImage(30, 30, base_color), m, cbi::OverlayStyle::Contour, ink);
  int recolored = 0;
  for (int y = 0; y < 30; ++y) {
    for (int x = 0; x < 30; ++x) {
      const bool edge = (x == 5 || x == 14 || y == 10 || y == 19) && m(x, y);
      EXPECT_EQ(out(x, y), edge ? ink : base_color) << x << "," << y;
      recolored += out(x, y) == ink;
    }
  }
  EXPECT_EQ(recolored, 36);
  EXPECT_EQ(cbi::mask_boundary(m), oracle::boundary(m));
}

TEST(Overlay, BoundaryMatchesOracleOnRandomMasks) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const MaskImage m = oracle::random_mask(40, 30, 0.6, rng);
    EXPECT_EQ(cbi::mask_boundary(m), oracle::boundary(m));
  }
}

}  // namespace
