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

#include <cstdint>
#include <random>
#include <vector>

#include "cbi/image.hpp"

namespace fixtures {

/// White canvas with 25 random colored discs, used for registration trials.
inline cbi::RasterImage blob_image(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  struct Blob {
    double x, y, r;
    cbi::Rgb c;
  };
  std::vector<Blob> blobs;
  for (int i = 0; i < 25; ++i) {
    blobs.push_back({n * (0.15 + 0.7 * u(rng)), n * (0.15 + 0.7 * u(rng)), n * (0.02 + 0.06 * u(rng)),
                     {static_cast<std::uint8_t>(60 + 150 * u(rng)), static_cast<std::uint8_t>(40 + 120 * u(rng)),
                      static_cast<std::uint8_t>(60 + 150 * u(rng))}});
  }
  cbi::RasterImage img(n, n, cbi::kWhite);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      for (const Blob& b : blobs) {
        const double dx = x - b.x;
        const double dy = y - b.y;
        if (dx * dx + dy * dy < b.r * b.r) img(x, y) = b.c;
      }
    }
  }
  return img;
}

}  // namespace fixtures
