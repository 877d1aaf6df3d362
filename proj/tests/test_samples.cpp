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

#include "cbi/model_io.hpp"
#include "cbi/samples.hpp"

namespace {

using cbi::ChannelRange;
using cbi::ClassBox;
using cbi::Rgb;

TEST(BuiltinTable, BackgroundRow) {
  const ClassBox c = cbi::builtin_table()[0];
  EXPECT_EQ(c.r, (ChannelRange{214, 247}));
  EXPECT_EQ(c.g, (ChannelRange{214, 247}));
  EXPECT_EQ(c.b, (ChannelRange{213, 247}));
}

TEST(BuiltinTable, DarkBrownRow) {
  const ClassBox c = cbi::builtin_table()[5];
  EXPECT_EQ(c.r, (ChannelRange{37, 98}));
  EXPECT_EQ(c.g, (ChannelRange{0, 67}));
  EXPECT_EQ(c.b, (ChannelRange{0, 61}));
}

TEST(BuiltinTable, LightBrownRow) {
  const ClassBox c = cbi::builtin_table()[3];
  EXPECT_EQ(c.r, (ChannelRange{163, 251}));
  EXPECT_EQ(c.g, (ChannelRange{124, 218}));
  EXPECT_EQ(c.b, (ChannelRange{107, 214}));
}

TEST(BuiltinTable, IsValidAndCompileTime) {
  constexpr auto table = cbi::builtin_table();
  static_assert(table[1].r.lo == 24 && table[4].b.hi == 147);
  EXPECT_NO_THROW(cbi::validate(table));
}

TEST(BuiltinTable, ValidateRejectsInvertedRange) {
  auto table = cbi::builtin_table();
  table[2].g = {200, 100};
  EXPECT_THROW(cbi::validate(table), cbi::Error);
}

TEST(OracleClassify, BackgroundGray) { EXPECT_EQ(cbi::oracle_classify(cbi::builtin_table(), {230, 230, 230}), 0); }

TEST(OracleClassify, DarkBrownMidpoint) { EXPECT_EQ(cbi::oracle_classify(cbi::builtin_table(), {67, 33, 30}), 5); }

TEST(OracleClassify, EveryMidpointMapsToItsClass) {
  const auto table = cbi::builtin_table();
  for (int k = 0; k < cbi::kNumClasses; ++k) {
    const auto m = table[static_cast<std::size_t>(k)].midpoint();
    // Rounding a midpoint to integers must not cross into a neighbour.
    const Rgb p{static_cast<std::uint8_t>(std::lround(m[0])), static_cast<std::uint8_t>(std::lround(m[1])),
                static_cast<std::uint8_t>(std::lround(m[2]))};
    EXPECT_EQ(cbi::oracle_classify(table, p), k) << "class " << k;
  }
}

TEST(OracleClassify, HandComputedDistances) {
  // Nearest midpoint by explicit squared distance over all six classes.
  const auto table = cbi::builtin_table();
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> ch(0, 255);
  for (int i = 0; i < 500; ++i) {
    const Rgb p{static_cast<std::uint8_t>(ch(rng)), static_cast<std::uint8_t>(ch(rng)), static_cast<std::uint8_t>(ch(rng))};
    int best = 0;
    double best_d = 1e300;
    for (int k = 0; k < 6; ++k) {
      const auto& b = table[static_cast<std::size_t>(k)];
      const double dr = (p.r - (b.r.lo + b.r.hi) / 2.0) / 255.0;
      const double dg = (p.g - (b.g.lo + b.g.hi) / 2.0) / 255.0;
      const double db = (p.b - (b.b.lo + b.b.hi) / 2.0) / 255.0;
      const double d = dr * dr + dg * dg + db * db;
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    ASSERT_EQ(cbi::oracle_classify(table, p), best);
  }
}

TEST(SynthSamples, CountsAndContainment) {
  const auto table = cbi::builtin_table();
  const auto s = cbi::synth_samples(table, 25, 7);
  ASSERT_EQ(s.size(), 150u);
  std::array<int, 6> counts{};
  for (const auto& x : s) {
    ++counts[static_cast<std::size_t>(x.class_id)];
    EXPECT_TRUE(table[static_cast<std::size_t>(x.class_id)].contains(x.rgb()));
  }
  for (int c : counts) EXPECT_EQ(c, 25);
}

TEST(SynthSamples, DegenerateRangeGivesLowBound) {
  auto table = cbi::builtin_table();
  table[2] = {{90, 90}, {10, 10}, {200, 200}};
  const auto s = cbi::synth_samples(table, 1, 3);
  const auto it = std::find_if(s.begin(), s.end(), [](const auto& x) { return x.class_id == 2; });
  ASSERT_NE(it, s.end());
  EXPECT_EQ(it->rgb(), (Rgb{90, 10, 200}));
}

TEST(SynthSamples, DeterministicPerSeed) {
  const auto table = cbi::builtin_table();
  EXPECT_EQ(cbi::synth_samples(table, 30, 7), cbi::synth_samples(table, 30, 7));
  EXPECT_NE(cbi::synth_samples(table, 30, 7), cbi::synth_samples(table, 30, 8));
}

TEST(SynthSamples, ContainmentAcrossSeeds) {
  const auto table = cbi::builtin_table();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    for (const auto& x : cbi::synth_samples(table, 10, seed)) {
      ASSERT_TRUE(table[static_cast<std::size_t>(x.class_id)].contains(x.rgb()));
    }
  }
}

TEST(SplitPerClass, KeepsOrderWithinClass) {
  const auto all = cbi::synth_samples(cbi::builtin_table(), 30, 7);
  const auto [train, test] = cbi::split_per_class(all, 25);
  EXPECT_EQ(train.size(), 150u);
  EXPECT_EQ(test.size(), 30u);
  EXPECT_EQ(train.front(), all.front());
}

TEST(LoadSamples, SingleRow) {
  const auto s = cbi::load_samples("r,g,b,class\n230,230,230,0");
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0], (cbi::ClassSample{230, 230, 230, 0}));
}

TEST(LoadSamples, OutOfRangeReportsRow) {
  try {
    cbi::load_samples("r,g,b,class\n300,0,0,1\n");
    FAIL() << "expected ParseError";
  } catch (const cbi::Error& e) {
    EXPECT_EQ(e.kind(), cbi::ErrorKind::ParseError);
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos) << e.what();
  }
}

TEST(LoadSamples, BadRowNumberIsOneBased) {
  try {
    cbi::load_samples("r,g,b,class\n1,2,3,0\n1,2,x,0\n");
    FAIL();
  } catch (const cbi::Error& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(LoadSamples, RejectsWrongHeaderAndClass) {
  EXPECT_THROW(cbi::load_samples("red,green,blue,class\n1,2,3,0"), cbi::Error);
  EXPECT_THROW(cbi::load_samples("r,g,b,class\n1,2,3,6"), cbi::Error);
  EXPECT_THROW(cbi::load_samples("r,g,b,class\n1,2,3"), cbi::Error);
}

TEST(LoadSamples, RoundTripsSave) {
  const auto s = cbi::synth_samples(cbi::builtin_table(), 30, 7);
  EXPECT_EQ(cbi::load_samples(cbi::save_samples(s)), s);
}

TEST(LoadSamples, ShippedDemoCsv) {
  const auto s = cbi::load_samples(cbi::detail::read_text_file(CBI_DATA_DIR "/demo_samples.csv"));
  ASSERT_EQ(s.size(), 180u);
  std::array<int, 6> counts{};
  for (const auto& x : s) ++counts[static_cast<std::size_t>(x.class_id)];
  for (int c : counts) EXPECT_EQ(c, 30);
  EXPECT_EQ(s, cbi::synth_samples(cbi::builtin_table(), 30, 7));
}

}  // namespace
