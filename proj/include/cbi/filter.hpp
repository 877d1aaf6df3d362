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
#include <bitset>
#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbi/anfis.hpp"
#include "cbi/error.hpp"
#include "cbi/image.hpp"
#include "cbi/model_io.hpp"
#include "cbi/samples.hpp"

namespace cbi {

/// Nonempty subset of tissue classes {0..5}.
class ClassSet {
 public:
  ClassSet() = default;
  ClassSet(std::initializer_list<int> ids) : ClassSet(std::vector<int>(ids)) {}
  explicit ClassSet(std::span<const int> ids) {
    if (ids.empty()) throw Error(ErrorKind::ConfigError, "selected_classes must not be empty");
    for (int id : ids) {
      if (id < 0 || id >= kNumClasses) {
        throw Error(ErrorKind::ConfigError, "selected class " + std::to_string(id) + " outside 0-5");
      }
      bits_.set(static_cast<std::size_t>(id));
    }
  }
  explicit ClassSet(const std::vector<int>& ids) : ClassSet(std::span<const int>(ids)) {}

  bool contains(int id) const { return id >= 0 && id < kNumClasses && bits_.test(static_cast<std::size_t>(id)); }
  bool empty() const { return bits_.none(); }
  std::vector<int> ids() const {
    std::vector<int> out;
    for (int k = 0; k < kNumClasses; ++k) {
      if (contains(k)) out.push_back(k);
    }
    return out;
  }
  friend bool operator==(const ClassSet&, const ClassSet&) = default;

 private:
  std::bitset<kNumClasses> bits_;
};

/// Filtered gray for one pixel: the rounded model output clamped to 0-254 when
/// its class is selected, else background 255.
inline std::uint8_t filter_pixel(const PixelEvaluator& eval, const ClassSet& selected, Rgb p) {
  const double o = eval.evaluate(p);
  if (!selected.contains(nearest_class(eval.model().class_targets, o))) return kBackground;
  return static_cast<std::uint8_t>(std::clamp(std::round(o), 0.0, static_cast<double>(kBackground - 1)));
}

inline GrayImage filter_image(const RasterImage& image, const PixelEvaluator& eval, const ClassSet& selected) {
  if (selected.empty()) throw Error(ErrorKind::ConfigError, "selected_classes must not be empty");
  GrayImage out(image.dims());
  auto src = image.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = filter_pixel(eval, selected, src[i]);
  return out;
}

inline GrayImage filter_image(const RasterImage& image, const AnfisModel& model, const ClassSet& selected) {
  return filter_image(image, PixelEvaluator(model), selected);
}

/// Per-stain recipe as stored in a profile file. Relative paths are resolved
/// against the profile's directory by load_profile.
struct BiomarkerProfile {
  std::string name;
  std::filesystem::path image_path;
  std::filesystem::path model_path;
  ClassSet selected_classes;
  Rgb overlay_color{255, 0, 0};
  int order_index = 0;
  std::optional<std::filesystem::path> transform_path;
  /// Estimate a rigid transform against the reference image instead of reading one.
  bool register_to_reference = false;
};

inline BiomarkerProfile profile_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  using detail::array;
  using detail::number;
  using detail::require;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  auto string_field = [&](const char* key) {
    const auto& v = require(doc, key, "profile");
    if (!v.is_string()) throw detail::parse_error(std::string("profile.") + key + ": expected a string");
    return v.get<std::string>();
  };
  auto integer = [](const nlohmann::json& v, const std::string& path) {
    const double d = number(v, path);
    if (d != std::floor(d)) throw detail::parse_error(path + ": expected an integer");
    return static_cast<int>(d);
  };

  BiomarkerProfile p;
  p.name = string_field("name");
  p.image_path = resolve(string_field("image_path"));
  p.model_path = resolve(string_field("model_path"));

  const auto& classes = array(require(doc, "selected_classes", "profile"), "profile.selected_classes");
  std::vector<int> ids;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    ids.push_back(integer(classes[i], "profile.selected_classes[" + std::to_string(i) + "]"));
  }
  try {
    p.selected_classes = ClassSet(ids);
  } catch (const Error& e) {
    throw detail::parse_error("profile.selected_classes: " + e.message());
  }

  const auto& color = array(require(doc, "overlay_color", "profile"), "profile.overlay_color");
  if (color.size() != 3) throw detail::parse_error("profile.overlay_color: expected [r,g,b]");
  std::array<std::uint8_t, 3> rgb{};
  for (std::size_t c = 0; c < 3; ++c) {
    const int v = integer(color[c], "profile.overlay_color[" + std::to_string(c) + "]");
    if (v < 0 || v > 255) throw detail::parse_error("profile.overlay_color: channel outside 0-255");
    rgb[c] = static_cast<std::uint8_t>(v);
  }
  p.overlay_color = {rgb[0], rgb[1], rgb[2]};
  p.order_index = integer(require(doc, "order_index", "profile"), "profile.order_index");

  if (auto it = doc.find("transform_path"); it != doc.end() && !it->is_null()) {
    if (!it->is_string()) throw detail::parse_error("profile.transform_path: expected a string");
    p.transform_path = resolve(it->get<std::string>());
  }
  if (auto it = doc.find("register"); it != doc.end()) {
    if (!it->is_boolean()) throw detail::parse_error("profile.register: expected true or false");
    p.register_to_reference = it->get<bool>();
  }
  if (p.transform_path && p.register_to_reference) {
    throw detail::parse_error("profile: transform_path and register are mutually exclusive");
  }
  return p;
}

inline BiomarkerProfile load_profile(const std::filesystem::path& path) {
  try {
    return profile_from_json(detail::parse_json(detail::read_text_file(path), "profile"), path.parent_path());
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ParseError) throw;
    throw e.with_context(path.string());
  }
}

}  // namespace cbi
