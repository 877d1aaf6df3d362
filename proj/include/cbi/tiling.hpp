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
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <type_traits>
#include <vector>

#include "cbi/error.hpp"
#include "cbi/image.hpp"

namespace cbi {

struct TileGrid {
  int tile_size = 512;
  /// Extra context pixels read around each tile core.
  int overlap = 0;

  void validate() const {
    if (tile_size <= 0) throw Error(ErrorKind::ConfigError, "tile_size must be positive");
    if (overlap < 0) throw Error(ErrorKind::ConfigError, "overlap must be non-negative");
    if (overlap >= tile_size) throw Error(ErrorKind::ConfigError, "overlap must be smaller than tile_size");
  }
};

/// One tile: `core` is the region this tile owns in the output; `padded` is the
/// core grown by the grid overlap and clipped to the image.
struct Tile {
  std::size_t index = 0;
  Rect core;
  Rect padded;

  /// Core rectangle in the padded tile's local coordinates.
  Rect local_core() const { return {core.x - padded.x, core.y - padded.y, core.width, core.height}; }
};

inline std::vector<Tile> tile_layout(Dims dims, const TileGrid& grid) {
  grid.validate();
  std::vector<Tile> out;
  for (int y = 0; y < dims.height; y += grid.tile_size) {
    for (int x = 0; x < dims.width; x += grid.tile_size) {
      Tile t;
      t.index = out.size();
      t.core = {x, y, std::min(grid.tile_size, dims.width - x), std::min(grid.tile_size, dims.height - y)};
      const int x0 = std::max(0, x - grid.overlap);
      const int y0 = std::max(0, y - grid.overlap);
      const int x1 = std::min(dims.width, t.core.right() + grid.overlap);
      const int y1 = std::min(dims.height, t.core.bottom() + grid.overlap);
      t.padded = {x0, y0, x1 - x0, y1 - y0};
      out.push_back(t);
    }
  }
  return out;
}

template <typename Pixel>
struct TileImage {
  Tile tile;
  Raster<Pixel> image;  // dims of tile.padded
};

template <typename Pixel>
std::vector<TileImage<Pixel>> tiles(const Raster<Pixel>& image, const TileGrid& grid) {
  std::vector<TileImage<Pixel>> out;
  for (const Tile& t : tile_layout(image.dims(), grid)) {
    out.push_back({t, crop(image, t.padded)});
  }
  return out;
}

/// Gathers tile results into one image. Each result contributes only its core,
/// so the outcome does not depend on the order of `results`.
template <typename Pixel>
Raster<Pixel> stitch(const std::vector<TileImage<Pixel>>& results, Dims full) {
  Raster<Pixel> out(full);
  std::vector<std::uint8_t> owned(full.area(), 0);
  std::size_t covered = 0;
  const Rect frame{0, 0, full.width, full.height};
  for (const auto& r : results) {
    const Tile& t = r.tile;
    if (!frame.contains(t.padded) || !t.padded.contains(t.core)) {
      throw Error(ErrorKind::DimensionMismatch, "tile rectangle outside stitched frame");
    }
    if (!(r.image.dims() == Dims{t.padded.width, t.padded.height})) {
      throw Error(ErrorKind::DimensionMismatch,
                  "tile " + std::to_string(t.index) + " result is " + to_string(r.image.dims()) +
                      ", expected " + std::to_string(t.padded.width) + "x" + std::to_string(t.padded.height));
    }
    for (int y = t.core.y; y < t.core.bottom(); ++y) {
      for (int x = t.core.x; x < t.core.right(); ++x) {
        auto& o = owned[static_cast<std::size_t>(y) * full.width + x];
        if (o) throw Error(ErrorKind::DimensionMismatch, "tile cores overlap");
        o = 1;
      }
    }
    covered += static_cast<std::size_t>(t.core.width) * t.core.height;
    paste(out, r.image, t.local_core(), t.core.x, t.core.y);
  }
  if (covered != full.area()) {
    throw Error(ErrorKind::DimensionMismatch, "tile cores do not cover the stitched frame");
  }
  return out;
}

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Work items must
/// write only to state they own. The first exception thrown is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  const auto n_threads = static_cast<std::size_t>(std::max(1, workers));
  if (n_threads == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(n_threads, count); ++t) pool.emplace_back(body);
  }
  if (failure) std::rethrow_exception(failure);
}

/// Applies `fn(const Raster<In>& padded_tile) -> Raster<Out>` to every tile and
/// stitches the cores. Bit-identical to whole-image application for per-pixel
/// functions, and for window functions whose radius is at most grid.overlap.
template <typename In, typename Fn>
auto map_tiles(const Raster<In>& image, const TileGrid& grid, int workers, Fn&& fn) {
  using Out = typename std::invoke_result_t<Fn&, const Raster<In>&>::value_type;
  const auto layout = tile_layout(image.dims(), grid);
  std::vector<TileImage<Out>> results(layout.size());
  parallel_for(layout.size(), workers, [&](std::size_t i) {
    results[i] = {layout[i], fn(crop(image, layout[i].padded))};
  });
  return stitch(results, image.dims());
}

/// Parallel loop over output rows in fixed bands, for stages that read from
/// whole-image state and write only their own rows.
template <typename Fn>
void parallel_rows(int height, int workers, Fn&& fn, int band = 64) {
  const auto bands = static_cast<std::size_t>((height + band - 1) / band);
  parallel_for(bands, workers, [&](std::size_t b) {
    const int y0 = static_cast<int>(b) * band;
    const int y1 = std::min(height, y0 + band);
    for (int y = y0; y < y1; ++y) fn(y);
  });
}

}  // namespace cbi
