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

// Bringing biomarker images into the reference (H&E) frame: affine warping with
// bilinear interpolation and a coarse rigid estimator based on a rotation grid
// search with phase-correlated translation.

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <filesystem>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include "cbi/error.hpp"
#include "cbi/image.hpp"
#include "cbi/model_io.hpp"
#include "cbi/tiling.hpp"

namespace cbi {

/// Maps source (x, y) to (a x + b y + tx, c x + d y + ty), in pixels.
struct AffineTransform {
  double a = 1.0, b = 0.0, tx = 0.0;
  double c = 0.0, d = 1.0, ty = 0.0;

  static AffineTransform identity() { return {}; }
  static AffineTransform translation(double dx, double dy) { return {1.0, 0.0, dx, 0.0, 1.0, dy}; }
  /// Rotation about (cx, cy) by the matrix [cos -sin; sin cos].
  static AffineTransform rotation(double degrees, double cx, double cy) {
    const double r = degrees * std::numbers::pi / 180.0;
    const double cs = std::cos(r);
    const double sn = std::sin(r);
    return {cs, -sn, cx - cs * cx + sn * cy, sn, cs, cy - sn * cx - cs * cy};
  }

  double determinant() const { return a * d - b * c; }
  bool invertible() const { return std::abs(determinant()) > 1e-9; }

  std::array<double, 2> operator()(double x, double y) const { return {a * x + b * y + tx, c * x + d * y + ty}; }

  AffineTransform inverse() const {
    const double det = determinant();
    if (!(std::abs(det) > 1e-9)) throw Error(ErrorKind::SingularTransform, "affine determinant is zero");
    const double ia = d / det;
    const double ib = -b / det;
    const double ic = -c / det;
    const double id = a / det;
    return {ia, ib, -(ia * tx + ib * ty), ic, id, -(ic * tx + id * ty)};
  }

  /// this after other: x -> this(other(x)).
  AffineTransform after(const AffineTransform& o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d, a * o.tx + b * o.ty + tx,
            c * o.a + d * o.c, c * o.b + d * o.d, c * o.tx + d * o.ty + ty};
  }

  double rotation_degrees() const { return std::atan2(c, a) * 180.0 / std::numbers::pi; }

  friend bool operator==(const AffineTransform&, const AffineTransform&) = default;
};

inline std::string serialize_transform(const AffineTransform& t) {
  nlohmann::json doc;
  doc["affine"] = {t.a, t.b, t.tx, t.c, t.d, t.ty};
  return doc.dump() + "\n";
}

inline AffineTransform load_transform(std::string_view text) {
  const auto doc = detail::parse_json(text, "transform");
  const auto& v = detail::array(detail::require(doc, "affine", "transform"), "transform.affine");
  if (v.size() != 6) throw detail::parse_error("transform.affine: expected 6 numbers [a,b,tx,c,d,ty]");
  std::array<double, 6> p{};
  for (std::size_t i = 0; i < 6; ++i) p[i] = detail::number(v[i], "transform.affine[" + std::to_string(i) + "]");
  return {p[0], p[1], p[2], p[3], p[4], p[5]};
}

inline AffineTransform load_transform_file(const std::filesystem::path& path) {
  try {
    return load_transform(detail::read_text_file(path));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ParseError) throw;
    throw e.with_context(path.string());
  }
}

namespace detail {

inline double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

inline Rgb lerp4(const Rgb& p00, const Rgb& p10, const Rgb& p01, const Rgb& p11, double fx, double fy) {
  auto ch = [&](std::uint8_t Rgb::*m) {
    const double v = (1.0 - fx) * (1.0 - fy) * (p00.*m) + fx * (1.0 - fy) * (p10.*m) + (1.0 - fx) * fy * (p01.*m) +
                     fx * fy * (p11.*m);
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  };
  return {ch(&Rgb::r), ch(&Rgb::g), ch(&Rgb::b)};
}

inline double lerp4(double p00, double p10, double p01, double p11, double fx, double fy) {
  return (1.0 - fx) * (1.0 - fy) * p00 + fx * (1.0 - fy) * p10 + (1.0 - fx) * fy * p01 + fx * fy * p11;
}

}  // namespace detail

/// Inverse-maps every output pixel through `t` and samples the source
/// bilinearly; pixels that fall outside the source get `fill`.
template <typename Pixel>
Raster<Pixel> warp(const Raster<Pixel>& src, const AffineTransform& t, Dims out_dims, Pixel fill, int workers = 1) {
  if (!t.invertible()) throw Error(ErrorKind::SingularTransform, "affine determinant is zero");
  const AffineTransform inv = t.inverse();
  Raster<Pixel> out(out_dims, fill);
  if (src.empty()) return out;
  const int w = src.width();
  const int h = src.height();
  parallel_rows(out_dims.height, workers, [&](int y) {
    auto row = out.row(y);
    for (int x = 0; x < out_dims.width; ++x) {
      auto [sx, sy] = inv(x, y);
      sx = detail::snap(sx);
      sy = detail::snap(sy);
      if (!(sx >= 0.0 && sy >= 0.0 && sx <= w - 1 && sy <= h - 1)) continue;
      const int x0 = static_cast<int>(sx);
      const int y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      row[static_cast<std::size_t>(x)] =
          detail::lerp4(src(x0, y0), src(x1, y0), src(x0, y1), src(x1, y1), sx - x0, sy - y0);
    }
  });
  return out;
}

/// Warps a biomarker image into the reference frame; uncovered pixels are white.
inline RasterImage apply(const RasterImage& image, const AffineTransform& t, Dims out_dims, int workers = 1) {
  return warp(image, t, out_dims, kWhite, workers);
}

struct RegisterConfig {
  int max_side = 1024;
  double angle_min = -10.0;
  double angle_max = 10.0;
  double angle_step = 0.5;
  /// Candidates whose warped source covers less than this fraction of the
  /// target are not scored.
  double min_overlap = 0.2;

  void validate() const {
    if (max_side < 16) throw Error(ErrorKind::ConfigError, "register max_side must be at least 16");
    if (!(angle_step > 0.0) || !(angle_max >= angle_min)) {
      throw Error(ErrorKind::ConfigError, "register angle grid must have a positive step and min <= max");
    }
  }
};

namespace detail {

/// Tissue signal: 255 - luma, so white background maps to zero.
inline Raster<double> tissue_signal(const RasterImage& image, int factor) {
  const int w = (image.width() + factor - 1) / factor;
  const int h = (image.height() + factor - 1) / factor;
  Raster<double> out(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      int n = 0;
      for (int yy = y * factor; yy < std::min(image.height(), (y + 1) * factor); ++yy) {
        for (int xx = x * factor; xx < std::min(image.width(), (x + 1) * factor); ++xx) {
          const Rgb p = image(xx, yy);
          sum += 255.0 - (0.299 * p.r + 0.587 * p.g + 0.114 * p.b);
          ++n;
        }
      }
      out(x, y) = sum / n;
    }
  }
  return out;
}

inline bool is_constant(const Raster<double>& img) {
  auto px = img.pixels();
  return std::all_of(px.begin(), px.end(), [&](double v) { return std::abs(v - px.front()) < 1e-9; });
}

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

/// Forward r2c FFT of a windowed, mean-removed real image.
class Spectrum {
 public:
  Spectrum(const Raster<double>& img, const std::vector<double>& window) : w_(img.width()), h_(img.height()) {
    const std::size_t n = img.size();
    const std::size_t nc = static_cast<std::size_t>(h_) * (w_ / 2 + 1);
    std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
    data_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nc)));
    double mean = 0.0;
    for (double v : img.pixels()) mean += v;
    mean /= static_cast<double>(n);
    auto px = img.pixels();
    for (std::size_t i = 0; i < n; ++i) in.get()[i] = (px[i] - mean) * window[i];
    fftw_plan plan;
    {
      std::lock_guard lock(fftw_planner_mutex());
      plan = fftw_plan_dft_r2c_2d(h_, w_, in.get(), data_.get(), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan);
    }
  }

  std::complex<double> at(std::size_t i) const { return {data_.get()[i][0], data_.get()[i][1]}; }
  std::size_t size() const { return static_cast<std::size_t>(h_) * (w_ / 2 + 1); }

 private:
  int w_;
  int h_;
  std::unique_ptr<fftw_complex, FftwFree> data_;
};

inline std::vector<double> hann_window(Dims d) {
  std::vector<double> w(d.area());
  auto hann = [](int i, int n) { return n <= 1 ? 1.0 : 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (n - 1)); };
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) w[static_cast<std::size_t>(y) * d.width + x] = hann(x, d.width) * hann(y, d.height);
  }
  return w;
}

/// Shift t such that target(x) ~ moving(x - t), with parabolic subpixel refinement.
inline std::array<double, 2> phase_correlate(const Spectrum& target, const Spectrum& moving, Dims d) {
  const std::size_t nc = target.size();
  std::unique_ptr<fftw_complex, FftwFree> cross(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nc)));
  for (std::size_t i = 0; i < nc; ++i) {
    std::complex<double> r = target.at(i) * std::conj(moving.at(i));
    const double mag = std::abs(r);
    r = mag > 1e-12 ? r / mag : std::complex<double>{};
    cross.get()[i][0] = r.real();
    cross.get()[i][1] = r.imag();
  }
  std::unique_ptr<double, FftwFree> corr(static_cast<double*>(fftw_malloc(sizeof(double) * d.area())));
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_c2r_2d(d.height, d.width, cross.get(), corr.get(), FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  const double* c = corr.get();
  std::size_t best = 0;
  for (std::size_t i = 1; i < d.area(); ++i) {
    if (c[i] > c[best]) best = i;
  }
  const int px = static_cast<int>(best % d.width);
  const int py = static_cast<int>(best / d.width);
  auto value = [&](int x, int y) {
    x = (x + d.width) % d.width;
    y = (y + d.height) % d.height;
    return c[static_cast<std::size_t>(y) * d.width + x];
  };
  auto refine = [](double l, double m, double r) {
    const double denom = l - 2.0 * m + r;
    return std::abs(denom) > 1e-12 ? std::clamp(0.5 * (l - r) / denom, -0.5, 0.5) : 0.0;
  };
  double sx = px + refine(value(px - 1, py), value(px, py), value(px + 1, py));
  double sy = py + refine(value(px, py - 1), value(px, py), value(px, py + 1));
  if (sx > d.width / 2.0) sx -= d.width;
  if (sy > d.height / 2.0) sy -= d.height;
  return {sx, sy};
}

/// Normalized cross-correlation over pixels where the warped source is defined.
inline double ncc(const Raster<double>& target, const Raster<double>& warped, double min_overlap) {
  double st = 0, sw = 0, stt = 0, sww = 0, stw = 0;
  std::size_t n = 0;
  auto t = target.pixels();
  auto w = warped.pixels();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (std::isnan(w[i])) continue;
    st += t[i];
    sw += w[i];
    stt += t[i] * t[i];
    sww += w[i] * w[i];
    stw += t[i] * w[i];
    ++n;
  }
  if (n == 0 || static_cast<double>(n) < min_overlap * static_cast<double>(t.size())) {
    return -std::numeric_limits<double>::infinity();
  }
  const double dn = static_cast<double>(n);
  const double cov = stw - st * sw / dn;
  const double vt = stt - st * st / dn;
  const double vw = sww - sw * sw / dn;
  if (vt <= 0.0 || vw <= 0.0) return -std::numeric_limits<double>::infinity();
  return cov / std::sqrt(vt * vw);
}

}  // namespace detail

struct RigidEstimate {
  AffineTransform transform;
  double angle_degrees = 0.0;
  double score = 0.0;  // NCC at the downsampled scale
};

/// Rigid (rotation + translation) transform mapping `source` into `target`'s
/// frame. Deterministic: candidates are scanned in increasing angle and the
/// first best score wins.
inline RigidEstimate estimate_rigid_detailed(const RasterImage& source, const RasterImage& target,
                                             const RegisterConfig& config = {}) {
  config.validate();
  if (source.empty() || target.empty()) throw Error(ErrorKind::DegenerateInput, "registration input is empty");
  const int longest = std::max({source.width(), source.height(), target.width(), target.height()});
  const int factor = std::max(1, (longest + config.max_side - 1) / config.max_side);
  const Raster<double> src = detail::tissue_signal(source, factor);
  const Raster<double> tgt = detail::tissue_signal(target, factor);
  if (detail::is_constant(src)) throw Error(ErrorKind::DegenerateInput, "source image is constant");
  if (detail::is_constant(tgt)) throw Error(ErrorKind::DegenerateInput, "target image is constant");

  const Dims d = tgt.dims();
  const auto window = detail::hann_window(d);
  const detail::Spectrum target_spectrum(tgt, window);
  const double cx = (src.width() - 1) / 2.0;
  const double cy = (src.height() - 1) / 2.0;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  RigidEstimate best;
  best.score = -std::numeric_limits<double>::infinity();
  const int steps = static_cast<int>(std::floor((config.angle_max - config.angle_min) / config.angle_step + 1e-9));
  for (int i = 0; i <= steps; ++i) {
    const double angle = config.angle_min + i * config.angle_step;
    const AffineTransform rot = AffineTransform::rotation(angle, cx, cy);
    const Raster<double> rotated = warp(src, rot, d, 0.0);
    const auto shift = detail::phase_correlate(target_spectrum, detail::Spectrum(rotated, window), d);
    const AffineTransform candidate = AffineTransform::translation(shift[0], shift[1]).after(rot);
    const double score = detail::ncc(tgt, warp(src, candidate, d, nan), config.min_overlap);
    if (score > best.score) {
      best.score = score;
      best.angle_degrees = angle;
      best.transform = candidate;
    }
  }
  if (!std::isfinite(best.score)) throw Error(ErrorKind::DegenerateInput, "no rotation candidate overlapped the target");

  // Lift to full resolution: X = f x + o with o = (f - 1) / 2 on both axes.
  const double f = factor;
  const double o = (f - 1.0) / 2.0;
  AffineTransform& t = best.transform;
  const double tx = f * t.tx + o - (t.a * o + t.b * o);
  const double ty = f * t.ty + o - (t.c * o + t.d * o);
  t.tx = tx;
  t.ty = ty;
  return best;
}

inline AffineTransform estimate_rigid(const RasterImage& source, const RasterImage& target,
                                      const RegisterConfig& config = {}) {
  return estimate_rigid_detailed(source, target, config).transform;
}

}  // namespace cbi
