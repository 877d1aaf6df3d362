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

// PNG (libpng) and TIFF (libtiff) codecs for 8-bit rasters.

#include <png.h>
#include <tiffio.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "cbi/error.hpp"
#include "cbi/image.hpp"

namespace cbi {

enum class ImageFormat { Png, Tiff };

inline ImageFormat format_for(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return ImageFormat::Png;
  if (ext == ".tif" || ext == ".tiff") return ImageFormat::Tiff;
  throw Error(ErrorKind::UnsupportedFormat, "unknown image extension '" + ext + "' for " + path.string());
}

namespace detail {

struct PngImageGuard {
  png_image* image;
  ~PngImageGuard() { png_image_free(image); }
};

/// Reads an 8-bit (or lower, expanded) PNG as RGBA bytes.
inline std::vector<std::uint8_t> read_png_rgba(const std::filesystem::path& path, Dims& dims) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  PngImageGuard guard{&image};
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    const std::string msg = image.message;
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorKind::IoError, "cannot open " + path.string());
    }
    throw Error(ErrorKind::IoError, "cannot read PNG " + path.string() + ": " + msg);
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    throw Error(ErrorKind::UnsupportedFormat, path.string() + ": 16-bit PNG, only 8-bit is supported");
  }
  image.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    throw Error(ErrorKind::IoError, "cannot decode PNG " + path.string() + ": " + image.message);
  }
  dims = {static_cast<int>(image.width), static_cast<int>(image.height)};
  return buffer;
}

inline void write_png(const std::filesystem::path& path, const void* pixels, Dims dims, bool color) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(dims.width);
  image.height = static_cast<png_uint_32>(dims.height);
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  PngImageGuard guard{&image};
  if (!png_image_write_to_file(&image, path.c_str(), 0, pixels, 0, nullptr)) {
    throw Error(ErrorKind::IoError, "cannot write PNG " + path.string() + ": " + image.message);
  }
}

struct TiffCloser {
  void operator()(TIFF* t) const { TIFFClose(t); }
};
using TiffHandle = std::unique_ptr<TIFF, TiffCloser>;

inline TiffHandle open_tiff(const std::filesystem::path& path, const char* mode) {
  TIFFSetWarningHandler(nullptr);
  TIFFSetErrorHandler(nullptr);
  TiffHandle tif(TIFFOpen(path.c_str(), mode));
  if (!tif) throw Error(ErrorKind::IoError, "cannot open TIFF " + path.string());
  return tif;
}

/// Reads an 8-bit gray/RGB/RGBA TIFF (stripped or tiled) as RGBA bytes.
inline std::vector<std::uint8_t> read_tiff_rgba(const std::filesystem::path& path, Dims& dims) {
  auto tif = open_tiff(path, "r");
  std::uint16_t bits = 0;
  std::uint16_t spp = 1;
  std::uint32_t w = 0;
  std::uint32_t h = 0;
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_BITSPERSAMPLE, &bits);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &spp);
  TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &w);
  TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &h);
  if (bits != 8) {
    throw Error(ErrorKind::UnsupportedFormat,
                path.string() + ": " + std::to_string(bits) + "-bit TIFF, only 8-bit is supported");
  }
  if (spp != 1 && spp != 3 && spp != 4) {
    throw Error(ErrorKind::UnsupportedFormat, path.string() + ": unsupported samples per pixel");
  }
  std::vector<std::uint32_t> raster(static_cast<std::size_t>(w) * h);
  if (!TIFFReadRGBAImageOriented(tif.get(), w, h, raster.data(), ORIENTATION_TOPLEFT, 0)) {
    throw Error(ErrorKind::IoError, "cannot decode TIFF " + path.string());
  }
  std::vector<std::uint8_t> out(raster.size() * 4);
  for (std::size_t i = 0; i < raster.size(); ++i) {
    out[4 * i + 0] = static_cast<std::uint8_t>(TIFFGetR(raster[i]));
    out[4 * i + 1] = static_cast<std::uint8_t>(TIFFGetG(raster[i]));
    out[4 * i + 2] = static_cast<std::uint8_t>(TIFFGetB(raster[i]));
    out[4 * i + 3] = static_cast<std::uint8_t>(TIFFGetA(raster[i]));
  }
  dims = {static_cast<int>(w), static_cast<int>(h)};
  return out;
}

inline void write_tiff(const std::filesystem::path& path, const std::uint8_t* pixels, Dims dims, int channels) {
  auto tif = open_tiff(path, "w");
  TIFFSetField(tif.get(), TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(dims.width));
  TIFFSetField(tif.get(), TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(dims.height));
  TIFFSetField(tif.get(), TIFFTAG_SAMPLESPERPIXEL, static_cast<std::uint16_t>(channels));
  TIFFSetField(tif.get(), TIFFTAG_BITSPERSAMPLE, static_cast<std::uint16_t>(8));
  TIFFSetField(tif.get(), TIFFTAG_PHOTOMETRIC, channels == 3 ? PHOTOMETRIC_RGB : PHOTOMETRIC_MINISBLACK);
  TIFFSetField(tif.get(), TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
  TIFFSetField(tif.get(), TIFFTAG_COMPRESSION, COMPRESSION_NONE);
  TIFFSetField(tif.get(), TIFFTAG_ROWSPERSTRIP, TIFFDefaultStripSize(tif.get(), 0));
  const auto stride = static_cast<std::size_t>(dims.width) * channels;
  std::vector<std::uint8_t> row(stride);
  for (int y = 0; y < dims.height; ++y) {
    std::copy_n(pixels + stride * y, stride, row.begin());
    if (TIFFWriteScanline(tif.get(), row.data(), static_cast<std::uint32_t>(y), 0) < 0) {
      throw Error(ErrorKind::IoError, "cannot write TIFF " + path.string());
    }
  }
}

inline std::vector<std::uint8_t> read_rgba(const std::filesystem::path& path, Dims& dims) {
  return format_for(path) == ImageFormat::Png ? read_png_rgba(path, dims) : read_tiff_rgba(path, dims);
}

}  // namespace detail

/// Decodes a PNG or TIFF file. Alpha is dropped, gray is expanded to RGB.
inline RasterImage decode(const std::filesystem::path& path) {
  Dims dims;
  const auto rgba = detail::read_rgba(path, dims);
  RasterImage out(dims);
  auto px = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = {rgba[4 * i], rgba[4 * i + 1], rgba[4 * i + 2]};
  }
  return out;
}

/// Decodes a single-channel image; color inputs contribute their red channel,
/// which for gray files written by this library equals the gray value.
inline GrayImage decode_gray(const std::filesystem::path& path) {
  Dims dims;
  const auto rgba = detail::read_rgba(path, dims);
  GrayImage out(dims);
  auto px = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = rgba[4 * i];
  return out;
}

inline void encode(const RasterImage& image, const std::filesystem::path& path) {
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(image.data());
  if (format_for(path) == ImageFormat::Png) {
    detail::write_png(path, bytes, image.dims(), true);
  } else {
    detail::write_tiff(path, bytes, image.dims(), 3);
  }
}

inline void encode(const GrayImage& image, const std::filesystem::path& path) {
  if (format_for(path) == ImageFormat::Png) {
    detail::write_png(path, image.data(), image.dims(), false);
  } else {
    detail::write_tiff(path, image.data(), image.dims(), 1);
  }
}

/// Writes a 0/1 mask as a 1-bit grayscale PNG (0 = black, 1 = white).
inline void encode_mask_png(const MaskImage& mask, const std::filesystem::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::Internal, "libpng initialisation failed");
  }
  const std::size_t stride = static_cast<std::size_t>(mask.width() + 7) / 8;
  std::vector<std::uint8_t> packed(stride * static_cast<std::size_t>(mask.height()), 0);
  std::vector<png_bytep> rows(static_cast<std::size_t>(mask.height()));
  for (int y = 0; y < mask.height(); ++y) {
    std::uint8_t* dst = packed.data() + stride * static_cast<std::size_t>(y);
    auto row = mask.row(y);
    for (int x = 0; x < mask.width(); ++x) {
      if (row[static_cast<std::size_t>(x)]) dst[x / 8] |= std::uint8_t(0x80u >> (x % 8));
    }
    rows[static_cast<std::size_t>(y)] = dst;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::IoError, "cannot write PNG " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(mask.width()), static_cast<png_uint_32>(mask.height()), 1,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_rows(png, info, rows.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Reads a mask written by encode_mask_png (or any gray image; nonzero = 1).
inline MaskImage decode_mask(const std::filesystem::path& path) {
  GrayImage g = decode_gray(path);
  for (auto& v : g.pixels()) v = v ? 1 : 0;
  return g;
}

}  // namespace cbi
