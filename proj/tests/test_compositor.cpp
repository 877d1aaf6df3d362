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

#include <algorithm>
#include <random>

#include "cbi/compositor.hpp"
#include "oracles.hpp"

namespace {

using cbi::CompositeMode;
using cbi::GrayImage;
using cbi::Layer;
using cbi::RasterImage;
using cbi::Rgb;

Rgb tint(Rgb color, int gray) {
  const double s = (255 - gray) / 255.0;
  auto ch = [&](int c) { return static_cast<std::uint8_t>(std::lround((1 - s) * 255 + s * c)); };
  return {ch(color.r), ch(color.g), ch(color.b)};
}

TEST(Composite, EmptyListDeclaredDims) {
  EXPECT_EQ(cbi::composite(std::vector<Layer>{}, CompositeMode::Replace, cbi::Dims{4, 4}), RasterImage(4, 4, cbi::kWhite));
  EXPECT_THROW(cbi::composite(std::vector<Layer>{}), cbi::Error);
}

TEST(Composite, FullIntensityIsSolidColor) {
  const std::vector<Layer> layers{{"A", GrayImage(5, 3, 0), {255, 0, 0}, 0}};
  EXPECT_EQ(cbi::composite(layers), RasterImage(5, 3, {255, 0, 0}));
}

TEST(Composite, TopLayerWinsInReplaceMode) {
  GrayImage cd30(8, 8, 255);
  GrayImage pax5(8, 8, 255);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 6; ++x) cd30(x, y) = 40;
  }
  for (int y = 3; y < 8; ++y) {
    for (int x = 3; x < 8; ++x) pax5(x, y) = 90;
  }
  const Rgb red{220, 30, 30};
  const Rgb blue{30, 60, 220};
  // Listed top-first to show order_index, not list order, decides stacking.
  const std::vector<Layer> layers{{"PAX5", pax5, blue, 1}, {"CD30", cd30, red, 0}};
  const RasterImage out = cbi::composite(layers);
  EXPECT_EQ(out(4, 4), tint(blue, 90));
  EXPECT_EQ(out(1, 1), tint(red, 40));
  EXPECT_EQ(out(7, 7), tint(blue, 90));
  EXPECT_EQ(out(7, 0), cbi::kWhite);
}

TEST(Composite, BlendMixesOverLowerLayer) {
  const Rgb red{255, 0, 0};
  const Rgb blue{0, 0, 255};
  const std::vector<Layer> layers{{"a", GrayImage(1, 1, 0), red, 0}, {"b", GrayImage(1, 1, 102), blue, 1}};
  const double s = (255 - 102) / 255.0;
  const Rgb expected{static_cast<std::uint8_t>(std::lround((1 - s) * 255)), 0,
                     static_cast<std::uint8_t>(std::lround(s * 255))};
  EXPECT_EQ(cbi::composite(layers, CompositeMode::Blend)(0, 0), expected);
}

TEST(Composite, Errors) {
  const std::vector<Layer> dup{{"a", GrayImage(2, 2, 0), {1, 1, 1}, 3}, {"b", GrayImage(2, 2, 0), {2, 2, 2}, 3}};
  try {
    cbi::composite(dup);
    FAIL();
  } catch (const cbi::Error& e) {
    EXPECT_EQ(e.kind(), cbi::ErrorKind::DuplicateOrderIndex);
  }
  const std::vector<Layer> mismatch{{"a", GrayImage(2, 2, 0), {1, 1, 1}, 0}, {"b", GrayImage(3, 2, 0), {2, 2, 2}, 1}};
  try {
    cbi::composite(mismatch);
    FAIL();
  } catch (const cbi::Error& e) {
    EXPECT_EQ(e.kind(), cbi::ErrorKind::DimensionMismatch);
  }
}

TEST(Composite, DisjointLayersPermutationInvariant) {
  std::mt19937_64 rng(1);
  GrayImage a(40, 40, 255);
  GrayImage b(40, 40, 255);
  for (int y = 0; y < 40; ++y) {
    for (int x = 0; x < 40; ++x) ((x + y) % 2 ? a : b)(x, y) = static_cast<std::uint8_t>(rng() % 255);
  }
  const std::vector<Layer> ab{{"a", a, {200, 10, 10}, 0}, {"b", b, {10, 10, 200}, 1}};
  const std::vector<Layer> ba{{"a", a, {200, 10, 10}, 1}, {"b", b, {10, 10, 200}, 0}};
  EXPECT_EQ(cbi::composite(ab), cbi::composite(ba));
  EXPECT_EQ(cbi::composite(ab, CompositeMode::Blend), cbi::composite(ba, CompositeMode::Blend));
}

TEST(Composite, BackgroundExactlyWhiteAndParallelIdentical) {
  std::mt19937_64 rng(2);
  const std::vector<Layer> layers{{"a", oracle::random_gray(150, 90, rng, 10, 12.0), {200, 10, 10}, 0},
                                  {"b", oracle::random_gray(150, 90, rng, 10, 12.0), {10, 10, 200}, 1}};
  const RasterImage serial = cbi::composite(layers);
  for (std::size_t i = 0; i < serial.size(); ++i) {
    if (layers[0].gray.pixels()[i] == 255 && layers[1].gray.pixels()[i] == 255) {
      ASSERT_EQ(serial.pixels()[i], cbi::kWhite);
    }
  }
  EXPECT_EQ(cbi::composite(layers, CompositeMode::Replace, std::nullopt, 4), serial);
  EXPECT_EQ(cbi::composite(layers, CompositeMode::Blend, std::nullopt, 4), cbi::composite(layers, CompositeMode::Blend));
}

int count_color(const RasterImage& img, Rgb c) {
  return static_cast<int>(std::count(img.pixels().begin(), img.pixels().end(), c));
}

TEST(Legend, OneSwatchPerLayerInOrder) {
  using L = cbi::LegendLayout;
  const Rgb red{220, 30, 30};
  const Rgb blue{30, 60, 220};
  const std::vector<Layer> one{{"CD30", GrayImage(1, 1), red, 0}};
  const RasterImage a = cbi::legend(one);
  EXPECT_EQ(count_color(a, red), (L::kSwatch - 2) * (L::kSwatch - 2));

  const std::vector<Layer> two{{"PAX5", GrayImage(1, 1), blue, 1}, {"CD30", GrayImage(1, 1), red, 0}};
  const RasterImage b = cbi::legend(two);
  const auto s0 = L::swatch(0);
  const auto s1 = L::swatch(1);
  EXPECT_EQ(b(s0.x + 2, s0.y + 2), red);
  EXPECT_EQ(b(s1.x + 2, s1.y + 2), blue);
}

TEST(Legend, TextFollowsName) {
  const std::vector<Layer> a{{"CD30", GrayImage(1, 1), {1, 2, 3}, 0}};
  const std::vector<Layer> b{{"MUM1", GrayImage(1, 1), {1, 2, 3}, 0}};
  const RasterImage la = cbi::legend(a);
  const RasterImage lb = cbi::legend(b);
  ASSERT_EQ(la.dims(), lb.dims());
  EXPECT_NE(la, lb);
  EXPECT_GT(count_color(la, {0, 0, 0}), 0);
}

TEST(Legend, RendersKnownGlyph) {
  RasterImage img(5, 7, cbi::kWhite);
  cbi::draw_text(img, 0, 0, "1", 1, {0, 0, 0});
  const auto& rows = cbi::font::glyph('1');
  for (int y = 0; y < 7; ++y) {
    for (int x = 0; x < 5; ++x) {
      const bool ink = (rows[static_cast<std::size_t>(y)] >> (4 - x)) & 1;
      EXPECT_EQ(img(x, y), (ink ? Rgb{0, 0, 0} : cbi::kWhite)) << x << "," << y;
    }
  }
}

}  // namespace
