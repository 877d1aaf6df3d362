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

// End-to-end orchestration: align -> filter -> clean -> density per biomarker,
// then composite and co-localization, with a run manifest.

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cbi/alignment.hpp"
#include "cbi/anfis.hpp"
#include "cbi/attention.hpp"
#include "cbi/codec.hpp"
#include "cbi/compositor.hpp"
#include "cbi/error.hpp"
#include "cbi/filter.hpp"
#include "cbi/hash.hpp"
#include "cbi/model_io.hpp"
#include "cbi/morphology.hpp"
#include "cbi/synthetic.hpp"
#include "cbi/tiling.hpp"

namespace cbi {

inline constexpr std::string_view kVersion = "0.1.0";

struct RunConfig {
  std::filesystem::path config_path;  // empty when built in code
  std::filesystem::path reference_image;
  std::vector<std::filesystem::path> profiles;
  MorphConfig morph;
  AttentionConfig attention;
  TileGrid tile;
  std::filesystem::path output_dir;
  int workers = 1;
  CompositeMode composite_mode = CompositeMode::Replace;
  bool legend = false;
  /// Also write the attention mask drawn over the reference image.
  bool overlay = false;
  OverlayStyle overlay_style = OverlayStyle::Contour;
  Rgb mask_color{0, 200, 0};
  RegisterConfig registration;
};

namespace detail {

inline int json_int(const nlohmann::json& v, const std::string& path) {
  const double d = number(v, path);
  if (d != std::floor(d)) throw parse_error(path + ": expected an integer");
  return static_cast<int>(d);
}

inline std::filesystem::path resolve_path(const std::filesystem::path& base, const nlohmann::json& v,
                                          const std::string& path) {
  if (!v.is_string()) throw parse_error(path + ": expected a string");
  std::filesystem::path p(v.get<std::string>());
  return p.is_absolute() ? p : base / p;
}

template <typename Fn>
void optional_field(const nlohmann::json& obj, const char* key, Fn&& fn) {
  if (auto it = obj.find(key); it != obj.end() && !it->is_null()) fn(*it);
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& doc, const std::filesystem::path& base) {
  using namespace detail;
  RunConfig cfg;
  cfg.reference_image = resolve_path(base, require(doc, "reference_image", "run"), "run.reference_image");
  const auto& profiles = array(require(doc, "profiles", "run"), "run.profiles");
  if (profiles.empty()) throw parse_error("run.profiles: at least one profile is required");
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    cfg.profiles.push_back(resolve_path(base, profiles[i], "run.profiles[" + std::to_string(i) + "]"));
  }
  cfg.output_dir = resolve_path(base, require(doc, "output_dir", "run"), "run.output_dir");

  optional_field(doc, "morph", [&](const nlohmann::json& m) {
    optional_field(m, "open_radius", [&](const auto& v) { cfg.morph.open_radius = json_int(v, "run.morph.open_radius"); });
    optional_field(m, "close_radius", [&](const auto& v) { cfg.morph.close_radius = json_int(v, "run.morph.close_radius"); });
    optional_field(m, "min_component_area",
                   [&](const auto& v) { cfg.morph.min_component_area = json_int(v, "run.morph.min_component_area"); });
  });
  optional_field(doc, "attention", [&](const nlohmann::json& a) {
    optional_field(a, "window", [&](const auto& v) { cfg.attention.window = json_int(v, "run.attention.window"); });
    optional_field(a, "thresholds", [&](const auto& v) {
      cfg.attention.thresholds.clear();
      if (v.is_number()) {
        cfg.attention.thresholds.push_back(v.template get<double>());
        return;
      }
      const auto& arr = array(v, "run.attention.thresholds");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        cfg.attention.thresholds.push_back(number(arr[i], "run.attention.thresholds[" + std::to_string(i) + "]"));
      }
    });
    optional_field(a, "close_radius", [&](const auto& v) { cfg.attention.close_radius = json_int(v, "run.attention.close_radius"); });
    optional_field(a, "min_region_area",
                   [&](const auto& v) { cfg.attention.min_region_area = json_int(v, "run.attention.min_region_area"); });
  });
  optional_field(doc, "tile", [&](const nlohmann::json& t) {
    optional_field(t, "tile_size", [&](const auto& v) { cfg.tile.tile_size = json_int(v, "run.tile.tile_size"); });
    optional_field(t, "overlap", [&](const auto& v) { cfg.tile.overlap = json_int(v, "run.tile.overlap"); });
  });
  optional_field(doc, "workers", [&](const auto& v) { cfg.workers = json_int(v, "run.workers"); });
  optional_field(doc, "composite_mode", [&](const nlohmann::json& v) {
    const std::string mode = v.is_string() ? v.get<std::string>() : "";
    if (mode == "replace") cfg.composite_mode = CompositeMode::Replace;
    else if (mode == "blend") cfg.composite_mode = CompositeMode::Blend;
    else throw parse_error("run.composite_mode: expected \"replace\" or \"blend\"");
  });
  optional_field(doc, "legend", [&](const nlohmann::json& v) {
    if (!v.is_boolean()) throw parse_error("run.legend: expected true or false");
    cfg.legend = v.get<bool>();
  });
  optional_field(doc, "overlay", [&](const nlohmann::json& v) {
    const std::string style = v.is_string() ? v.get<std::string>() : "";
    if (style == "contour") cfg.overlay_style = OverlayStyle::Contour;
    else if (style == "tint") cfg.overlay_style = OverlayStyle::Tint;
    else throw parse_error("run.overlay: expected \"contour\" or \"tint\"");
    cfg.overlay = true;
  });
  optional_field(doc, "register", [&](const nlohmann::json& r) {
    optional_field(r, "max_side", [&](const auto& v) { cfg.registration.max_side = json_int(v, "run.register.max_side"); });
    optional_field(r, "angle_min", [&](const auto& v) { cfg.registration.angle_min = number(v, "run.register.angle_min"); });
    optional_field(r, "angle_max", [&](const auto& v) { cfg.registration.angle_max = number(v, "run.register.angle_max"); });
    optional_field(r, "angle_step", [&](const auto& v) { cfg.registration.angle_step = number(v, "run.register.angle_step"); });
  });
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  try {
    RunConfig cfg = run_config_from_json(detail::parse_json(detail::read_text_file(path), "run config"),
                                         path.parent_path());
    cfg.config_path = path;
    return cfg;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ParseError) throw;
    throw e.with_context(path.string());
  }
}

struct StageTiming {
  std::string name;
  double seconds = 0.0;
};

struct RunResult {
  std::vector<std::filesystem::path> outputs;
  nlohmann::json manifest;
  AttentionMask attention;
  std::vector<StageTiming> stages;
};

/// Grid with at least `radius` overlap, growing the tile if needed.
inline TileGrid with_overlap(TileGrid grid, int radius) {
  grid.overlap = std::max(grid.overlap, radius);
  if (grid.overlap >= grid.tile_size) grid.tile_size = grid.overlap + 1;
  return grid;
}

/// File-name-safe form of a biomarker name.
inline std::string file_stem(std::string_view name) {
  std::string out;
  for (char c : name) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out.empty() ? "biomarker" : out;
}

namespace detail {

class StageClock {
 public:
  explicit StageClock(std::vector<StageTiming>& sink) : sink_(sink) {}

  template <typename Fn>
  auto run(const std::string& name, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    auto record = [&] {
      sink_.push_back({name, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()});
    };
    try {
      if constexpr (std::is_void_v<std::invoke_result_t<Fn>>) {
        fn();
        record();
      } else {
        auto result = fn();
        record();
        return result;
      }
    } catch (const Error& e) {
      throw e.with_context("stage '" + name + "'");
    } catch (const std::exception& e) {
      throw Error(ErrorKind::Internal, "stage '" + name + "': " + e.what());
    }
  }

 private:
  std::vector<StageTiming>& sink_;
};

/// Removes every registered file unless disarmed.
class OutputGuard {
 public:
  ~OutputGuard() {
    if (armed_) {
      std::error_code ec;
      for (const auto& p : files_) std::filesystem::remove(p, ec);
    }
  }
  void add(const std::filesystem::path& p) { files_.push_back(p); }
  void disarm() { armed_ = false; }
  const std::vector<std::filesystem::path>& files() const { return files_; }

 private:
  std::vector<std::filesystem::path> files_;
  bool armed_ = true;
};

inline nlohmann::json input_entry(const std::string& role, const std::filesystem::path& path) {
  return {{"role", role}, {"path", path.string()}, {"sha256", sha256_file(path)}};
}

}  // namespace detail

/// Morphological cleanup with the open/close stage run tile-parallel and the
/// component stage on the stitched image. Bit-identical to morph_clean().
inline GrayImage morph_clean_tiled(const GrayImage& gray, const MorphConfig& config, const TileGrid& grid, int workers) {
  config.validate();
  const MaskImage cleaned = map_tiles(gray, with_overlap(grid, config.window_radius()), workers,
                                      [&](const GrayImage& tile) { return open_close(foreground_mask(tile), config); });
  return finish_clean(gray, cleaned, config);
}

inline GrayImage filter_image_tiled(const RasterImage& image, const PixelEvaluator& eval, const ClassSet& selected,
                                    const TileGrid& grid, int workers) {
  TileGrid g = grid;
  g.overlap = 0;
  return map_tiles(image, g, workers, [&](const RasterImage& tile) { return filter_image(tile, eval, selected); });
}

inline AttentionMask co_localize_tiled(std::span<const DensityMap> densities, const AttentionConfig& config,
                                       const TileGrid& grid, int workers) {
  MaskImage mask = threshold_conjunction(densities, config);
  const int rc = config.close_radius;
  mask = map_tiles(mask, with_overlap(grid, 2 * rc), workers, [rc](const MaskImage& tile) { return close(tile, rc); });
  return {remove_small_components(mask, config.min_region_area), config};
}

/// Runs the full pipeline and writes cbi.png, attention.png, one
/// filtered_<name>.png per biomarker and manifest.json (plus legend.png and
/// attention_overlay.png when enabled). On failure every file written so far
/// is removed.
inline RunResult run_pipeline(const RunConfig& config) {
  config.morph.validate();
  config.attention.validate();
  config.tile.validate();
  config.registration.validate();
  if (config.workers < 1) throw Error(ErrorKind::ConfigError, "workers must be positive");
  if (config.profiles.empty()) throw Error(ErrorKind::ConfigError, "run needs at least one profile");

  RunResult result;
  detail::StageClock clock(result.stages);
  detail::OutputGuard guard;
  const int workers = config.workers;
  nlohmann::json inputs = nlohmann::json::array();

  const RasterImage reference = clock.run("load:reference", [&] {
    inputs.push_back(detail::input_entry("reference", config.reference_image));
    return decode(config.reference_image);
  });
  const Dims frame = reference.dims();

  std::vector<BiomarkerProfile> profiles;
  clock.run("load:profiles", [&] {
    std::map<int, std::string> seen_order;
    for (const auto& path : config.profiles) {
      BiomarkerProfile p = load_profile(path);
      if (auto [it, fresh] = seen_order.emplace(p.order_index, p.name); !fresh) {
        throw Error(ErrorKind::DuplicateOrderIndex, "profiles '" + it->second + "' and '" + p.name +
                                                        "' share order_index " + std::to_string(p.order_index));
      }
      inputs.push_back(detail::input_entry("profile:" + p.name, path));
      profiles.push_back(std::move(p));
    }
  });
  if (config.attention.thresholds.size() != 1 && config.attention.thresholds.size() != profiles.size()) {
    throw Error(ErrorKind::ConfigError, "expected " + std::to_string(profiles.size()) + " attention thresholds");
  }

  std::map<std::filesystem::path, std::shared_ptr<const PixelEvaluator>> evaluators;
  std::vector<Layer> layers;
  std::vector<DensityMap> densities;
  nlohmann::json transforms = nlohmann::json::object();
  std::filesystem::create_directories(config.output_dir);

  for (const BiomarkerProfile& p : profiles) {
    auto [eval, image] = clock.run("load:" + p.name, [&] {
      inputs.push_back(detail::input_entry("image:" + p.name, p.image_path));
      auto& slot = evaluators[p.model_path];
      if (!slot) {
        inputs.push_back(detail::input_entry("model:" + p.name, p.model_path));
        slot = std::make_shared<const PixelEvaluator>(load_model_file(p.model_path));
      }
      return std::pair{slot, decode(p.image_path)};
    });

    clock.run("align:" + p.name, [&] {
      std::optional<AffineTransform> t;
      if (p.transform_path) {
        inputs.push_back(detail::input_entry("transform:" + p.name, *p.transform_path));
        t = load_transform_file(*p.transform_path);
      } else if (p.register_to_reference) {
        t = estimate_rigid(image, reference, config.registration);
      }
      if (t) {
        transforms[p.name] = {t->a, t->b, t->tx, t->c, t->d, t->ty};
        image = apply(image, *t, frame, workers);
      } else if (!(image.dims() == frame)) {
        throw Error(ErrorKind::DimensionMismatch,
                    p.image_path.string() + " is " + to_string(image.dims()) + " but reference " +
                        config.reference_image.string() + " is " + to_string(frame) + " and no transform is given");
      }
    });

    GrayImage gray = clock.run("filter:" + p.name, [&] {
      return filter_image_tiled(image, *eval, p.selected_classes, config.tile, workers);
    });
    gray = clock.run("clean:" + p.name, [&] { return morph_clean_tiled(gray, config.morph, config.tile, workers); });
    densities.push_back(clock.run("density:" + p.name, [&] {
      return density_map(gray, config.attention.window, config.tile, workers);
    }));
    layers.push_back({p.name, std::move(gray), p.overlay_color, p.order_index});
  }

  result.attention = clock.run("attention", [&] {
    return co_localize_tiled(densities, config.attention, config.tile, workers);
  });
  const RasterImage cbi = clock.run("composite", [&] {
    return composite(layers, config.composite_mode, frame, workers);
  });

  const auto& out = config.output_dir;
  clock.run("write", [&] {
    auto write = [&](const std::filesystem::path& path, auto&& writer) {
      guard.add(path);
      writer(path);
    };
    write(out / "cbi.png", [&](const auto& path) { encode(cbi, path); });
    write(out / "attention.png", [&](const auto& path) { encode_mask_png(result.attention.mask, path); });
    for (const Layer& l : layers) {
      write(out / ("filtered_" + file_stem(l.name) + ".png"), [&](const auto& path) { encode(l.gray, path); });
    }
    if (config.legend) write(out / "legend.png", [&](const auto& path) { encode(legend(layers), path); });
    if (config.overlay) {
      write(out / "attention_overlay.png", [&](const auto& path) {
        encode(overlay_mask(reference, result.attention.mask, config.overlay_style, config.mask_color), path);
      });
    }
  });

  nlohmann::json manifest;
  manifest["tool"] = "cbi";
  manifest["version"] = std::string(kVersion);
  if (!config.config_path.empty()) {
    manifest["config"] = {{"path", config.config_path.string()}, {"sha256", sha256_file(config.config_path)}};
  }
  manifest["inputs"] = inputs;
  manifest["transforms"] = transforms;
  manifest["parameters"] = {
      {"morph",
       {{"open_radius", config.morph.open_radius},
        {"close_radius", config.morph.close_radius},
        {"min_component_area", config.morph.min_component_area}}},
      {"attention",
       {{"window", config.attention.window},
        {"thresholds", config.attention.thresholds},
        {"close_radius", config.attention.close_radius},
        {"min_region_area", config.attention.min_region_area}}},
      {"tile", {{"tile_size", config.tile.tile_size}, {"overlap", config.tile.overlap}}},
      {"workers", workers},
      {"composite_mode", config.composite_mode == CompositeMode::Replace ? "replace" : "blend"},
  };
  nlohmann::json outputs = nlohmann::json::array();
  for (const auto& f : guard.files()) {
    outputs.push_back({{"path", f.filename().string()}, {"sha256", sha256_file(f)}});
  }
  manifest["outputs"] = outputs;
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : result.stages) stages.push_back({{"name", s.name}, {"seconds", s.seconds}});
  manifest["stages"] = stages;

  const auto manifest_path = out / "manifest.json";
  guard.add(manifest_path);
  detail::write_text_file(manifest_path, manifest.dump(2) + "\n");

  result.outputs = guard.files();
  result.manifest = std::move(manifest);
  guard.disarm();
  return result;
}

struct ManifestMismatch {
  std::string role;
  std::filesystem::path path;
  std::string reason;
};

/// Rehashes every input recorded in a manifest; an empty result means nothing changed.
inline std::vector<ManifestMismatch> verify_manifest(const nlohmann::json& manifest) {
  std::vector<ManifestMismatch> out;
  auto check = [&](const std::string& role, const nlohmann::json& entry) {
    const std::filesystem::path path = entry.at("path").get<std::string>();
    if (!std::filesystem::exists(path)) {
      out.push_back({role, path, "missing"});
      return;
    }
    if (sha256_file(path) != entry.at("sha256").get<std::string>()) out.push_back({role, path, "changed"});
  };
  try {
    if (manifest.contains("config")) check("config", manifest.at("config"));
    for (const auto& e : manifest.at("inputs")) check(e.at("role").get<std::string>(), e);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("manifest: ") + e.what());
  }
  return out;
}

/// Trains the shared demo model on the synthetic training split.
inline TrainResult train_demo_model(std::uint64_t seed, const TrainConfig& config, int train_per_class = 25,
                                    int per_class = 30) {
  const auto all = synth_samples(builtin_table(), per_class, seed);
  const auto split = split_per_class(all, train_per_class);
  return train(split.first, config, initialize_model(split.first));
}

struct DemoFiles {
  std::filesystem::path run_config;
  std::filesystem::path overlap_truth;
};

/// Writes a ready-to-run demo: synthetic H&E/CD30/PAX5 images, a trained model,
/// the two biomarker profiles (CD30 classes 3-5 at the bottom, PAX5 class 4 on
/// top), the ground-truth overlap mask and run.json.
inline DemoFiles write_demo(const std::filesystem::path& dir, int size, std::uint64_t seed,
                            const TileGrid& tile = {}, int workers = 1, std::uint64_t model_seed = 7) {
  std::filesystem::create_directories(dir);
  const SyntheticSlide slide = make_synthetic_slide(size, seed);
  encode(slide.he, dir / "he.png");
  encode(slide.cd30, dir / "cd30.png");
  encode(slide.pax5, dir / "pax5.png");
  encode_mask_png(slide.overlap_truth, dir / "overlap_truth.png");
  TrainConfig tc;
  tc.seed = model_seed;
  detail::write_text_file(dir / "model.json", serialize_model(train_demo_model(model_seed, tc).model));

  auto profile = [](const char* name, const char* image, std::vector<int> classes, Rgb color, int order) {
    return nlohmann::json{{"name", name},
                          {"image_path", image},
                          {"model_path", "model.json"},
                          {"selected_classes", classes},
                          {"overlay_color", {color.r, color.g, color.b}},
                          {"order_index", order}};
  };
  detail::write_text_file(dir / "cd30.json", profile("CD30", "cd30.png", {3, 4, 5}, {220, 30, 30}, 0).dump(2) + "\n");
  detail::write_text_file(dir / "pax5.json", profile("PAX5", "pax5.png", {4}, {30, 60, 220}, 1).dump(2) + "\n");
  const nlohmann::json run = {
      {"reference_image", "he.png"},
      {"profiles", {"cd30.json", "pax5.json"}},
      {"output_dir", "out"},
      {"tile", {{"tile_size", tile.tile_size}, {"overlap", tile.overlap}}},
      {"workers", workers},
  };
  detail::write_text_file(dir / "run.json", run.dump(2) + "\n");
  return {dir / "run.json", dir / "overlap_truth.png"};
}

}  // namespace cbi
