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
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cbi/error.hpp"
#include "cbi/image.hpp"

namespace cbi {

inline constexpr int kNumClasses = 6;

/// One labeled training point.
struct ClassSample {
  int r = 0;
  int g = 0;
  int b = 0;
  int class_id = 0;

  Rgb rgb() const {
    return {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
  }
  friend bool operator==(const ClassSample&, const ClassSample&) = default;
};

struct ChannelRange {
  int lo = 0;
  int hi = 0;

  double midpoint() const { return 0.5 * (lo + hi); }
  bool contains(int v) const { return v >= lo && v <= hi; }
  friend bool operator==(const ChannelRange&, const ChannelRange&) = default;
};

/// Inclusive per-channel bounds of one tissue class.
struct ClassBox {
  ChannelRange r;
  ChannelRange g;
  ChannelRange b;

  bool contains(Rgb p) const { return r.contains(p.r) && g.contains(p.g) && b.contains(p.b); }
  std::array<double, 3> midpoint() const { return {r.midpoint(), g.midpoint(), b.midpoint()}; }
  friend bool operator==(const ClassBox&, const ClassBox&) = default;
};

using ClassRangeTable = std::array<ClassBox, kNumClasses>;

inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "Background", "Blue", "Gray", "Light Brown", "Medium Brown", "Dark Brown"};

/// Per-class RGB ranges of the expert-picked training points.
inline constexpr ClassRangeTable builtin_table() {
  return {{
      {{214, 247}, {214, 247}, {213, 247}},  // 0 background
      {{24, 208}, {44, 217}, {79, 228}},     // 1 blue
      {{63, 221}, {65, 221}, {77, 226}},     // 2 gray
      {{163, 251}, {124, 218}, {107, 214}},  // 3 light brown
      {{136, 192}, {87, 157}, {70, 147}},    // 4 medium brown
      {{37, 98}, {0, 67}, {0, 61}},          // 5 dark brown
  }};
}

inline void validate(const ClassRangeTable& table) {
  for (std::size_t k = 0; k < table.size(); ++k) {
    for (const ChannelRange& c : {table[k].r, table[k].g, table[k].b}) {
      if (c.lo > c.hi || c.lo < 0 || c.hi > 255) {
        throw Error(ErrorKind::ConfigError, "class " + std::to_string(k) + " has an invalid channel range");
      }
    }
  }
}

/// Nearest class midpoint under Euclidean distance on channels scaled to [0,1].
/// Ties go to the lower class index.
inline int oracle_classify(const ClassRangeTable& table, Rgb pixel) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  const std::array<double, 3> p = {pixel.r / 255.0, pixel.g / 255.0, pixel.b / 255.0};
  for (int k = 0; k < kNumClasses; ++k) {
    const auto m = table[static_cast<std::size_t>(k)].midpoint();
    double d = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double diff = p[static_cast<std::size_t>(c)] - m[static_cast<std::size_t>(c)] / 255.0;
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

/// Draws `per_class` samples per class. Each channel comes from a normal centered
/// at the range midpoint with sigma = width / 4, truncated to the range by
/// rejection (falling back to clamping), then rounded.
inline std::vector<ClassSample> synth_samples(const ClassRangeTable& table, int per_class, std::uint64_t seed) {
  if (per_class < 1) throw Error(ErrorKind::ConfigError, "per_class must be at least 1");
  validate(table);
  std::mt19937_64 rng(seed);
  auto draw = [&rng](const ChannelRange& range) {
    if (range.lo == range.hi) return range.lo;
    std::normal_distribution<double> normal(range.midpoint(), (range.hi - range.lo) / 4.0);
    double v = normal(rng);
    for (int attempt = 0; attempt < 64 && (v < range.lo || v > range.hi); ++attempt) v = normal(rng);
    v = std::clamp(v, static_cast<double>(range.lo), static_cast<double>(range.hi));
    return static_cast<int>(std::lround(v));
  };
  std::vector<ClassSample> out;
  out.reserve(static_cast<std::size_t>(per_class) * kNumClasses);
  for (int k = 0; k < kNumClasses; ++k) {
    const ClassBox& box = table[static_cast<std::size_t>(k)];
    for (int i = 0; i < per_class; ++i) {
      const int r = draw(box.r);
      const int g = draw(box.g);
      const int b = draw(box.b);
      out.push_back({r, g, b, k});
    }
  }
  return out;
}

/// Splits samples into the first `train_per_class` of each class and the rest,
/// preserving order within each part.
inline std::pair<std::vector<ClassSample>, std::vector<ClassSample>> split_per_class(
    std::span<const ClassSample> samples, int train_per_class) {
  std::array<int, kNumClasses> seen{};
  std::vector<ClassSample> train;
  std::vector<ClassSample> test;
  for (const ClassSample& s : samples) {
    auto& n = seen[static_cast<std::size_t>(s.class_id)];
    (n++ < train_per_class ? train : test).push_back(s);
  }
  return {std::move(train), std::move(test)};
}

/// Parses sample CSV with header "r,g,b,class". Row numbers in errors count data
/// rows from 1.
inline std::vector<ClassSample> load_samples(std::string_view csv_text) {
  auto parse_error = [](const std::string& msg) {
    return Error(ErrorKind::ParseError, ErrorCategory::Data, msg);
  };
  std::vector<ClassSample> out;
  std::istringstream in{std::string(csv_text)};
  std::string line;
  if (!std::getline(in, line)) throw parse_error("empty sample file, expected header r,g,b,class");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "r,g,b,class") throw parse_error("bad header '" + line + "', expected r,g,b,class");
  int row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    std::array<long, 4> v{};
    std::istringstream fields(line);
    std::string field;
    std::size_t n = 0;
    while (std::getline(fields, field, ',')) {
      if (n == 4) throw parse_error("row " + std::to_string(row) + ": too many fields");
      try {
        std::size_t used = 0;
        v[n] = std::stol(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::logic_error&) {
        throw parse_error("row " + std::to_string(row) + ": '" + field + "' is not an integer");
      }
      ++n;
    }
    if (n != 4) throw parse_error("row " + std::to_string(row) + ": expected 4 fields, got " + std::to_string(n));
    for (std::size_t c = 0; c < 3; ++c) {
      if (v[c] < 0 || v[c] > 255) {
        throw parse_error("row " + std::to_string(row) + ": channel value " + std::to_string(v[c]) +
                          " outside 0-255");
      }
    }
    if (v[3] < 0 || v[3] >= kNumClasses) {
      throw parse_error("row " + std::to_string(row) + ": class " + std::to_string(v[3]) + " outside 0-5");
    }
    out.push_back({static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2]), static_cast<int>(v[3])});
  }
  return out;
}

inline std::string save_samples(std::span<const ClassSample> samples) {
  std::string out = "r,g,b,class\n";
  for (const ClassSample& s : samples) {
    out += std::to_string(s.r) + ',' + std::to_string(s.g) + ',' + std::to_string(s.b) + ',' +
           std::to_string(s.class_id) + '\n';
  }
  return out;
}

}  // namespace cbi
