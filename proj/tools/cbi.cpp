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

// Command-line front end: train, register, run, and the stage-wise filter,
// composite and attention commands.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cbi/cbi.hpp"

namespace {

constexpr int kExitConfig = static_cast<int>(cbi::ErrorCategory::Config);

int positive_workers(int workers) {
  if (workers < 1) throw cbi::Error(cbi::ErrorKind::ConfigError, "--workers must be positive");
  return workers;
}

void write_rmse_report(const cbi::TrainResult& r, const std::filesystem::path& path) {
  std::string csv = "epoch,rmse\n";
  for (std::size_t i = 0; i < r.rmse_trace.size(); ++i) {
    csv += std::to_string(i) + "," + std::to_string(r.rmse_trace[i]) + "\n";
  }
  cbi::detail::write_text_file(path, csv);
}

cbi::Rgb parse_color(const std::string& text) {
  std::vector<int> v;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ',');) {
    try {
      v.push_back(std::stoi(part));
    } catch (const std::exception&) {
      v.push_back(-1);
    }
  }
  if (v.size() != 3 || std::any_of(v.begin(), v.end(), [](int c) { return c < 0 || c > 255; })) {
    throw cbi::Error(cbi::ErrorKind::ConfigError, "color '" + text + "' must be R,G,B with values in 0-255");
  }
  return {static_cast<std::uint8_t>(v[0]), static_cast<std::uint8_t>(v[1]), static_cast<std::uint8_t>(v[2])};
}

// PATH:R,G,B:ORDER
cbi::Layer parse_layer(const std::string& arg) {
  const auto last = arg.rfind(':');
  const auto mid = last == std::string::npos ? std::string::npos : arg.rfind(':', last - 1);
  if (mid == std::string::npos || mid == 0) {
    throw cbi::Error(cbi::ErrorKind::ConfigError, "layer '" + arg + "' must be PATH:R,G,B:ORDER");
  }
  const std::filesystem::path path = arg.substr(0, mid);
  int order = 0;
  try {
    order = std::stoi(arg.substr(last + 1));
  } catch (const std::exception&) {
    throw cbi::Error(cbi::ErrorKind::ConfigError, "layer '" + arg + "' has a bad order index");
  }
  return {path.stem().string(), cbi::decode_gray(path), parse_color(arg.substr(mid + 1, last - mid - 1)), order};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Composite biomarker images from registered IHC stains"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cbi::kVersion));

  // train
  auto* train = app.add_subcommand("train", "Fit a tissue-class model from labelled RGB samples");
  std::string samples_csv;
  bool synthetic = false;
  std::uint64_t seed = 7;
  cbi::TrainConfig tc;
  std::string model_out;
  std::string report_out;
  auto* samples_opt = train->add_option("--samples", samples_csv, "CSV with header r,g,b,class")->check(CLI::ExistingFile);
  auto* synth_opt = train->add_flag("--synthetic", synthetic, "Use the 25-per-class synthetic training set");
  samples_opt->excludes(synth_opt);
  train->add_option("--seed", seed, "Seed for --synthetic sampling");
  train->add_option("--epochs", tc.epochs, "Hybrid-learning epochs (0 = one least-squares pass)");
  train->add_option("--lr", tc.learning_rate, "Premise learning rate");
  train->add_option("--ridge", tc.ridge, "Ridge term for the consequent fit");
  train->add_option("-o,--output", model_out, "Model JSON")->required();
  train->add_option("--report", report_out, "Per-epoch RMSE CSV (default: <output>.rmse.csv)");

  // register
  auto* reg = app.add_subcommand("register", "Estimate the rigid transform mapping a source onto a target");
  std::string reg_source;
  std::string reg_target;
  std::string reg_out;
  reg->add_option("--source", reg_source)->required()->check(CLI::ExistingFile);
  reg->add_option("--target", reg_target)->required()->check(CLI::ExistingFile);
  reg->add_option("-o,--output", reg_out, "Transform sidecar JSON")->required();

  // run
  auto* run = app.add_subcommand("run", "Run the full pipeline from a run config");
  std::string run_config;
  std::optional<int> run_workers;
  std::string check_manifest;
  run->add_option("config", run_config)->required()->check(CLI::ExistingFile);
  run->add_option("--workers", run_workers, "Tile workers (overrides the config)")->envname("CBI_WORKERS");
  run->add_option("--check", check_manifest, "Refuse to run if inputs differ from this manifest")
      ->check(CLI::ExistingFile);

  // filter
  auto* filter = app.add_subcommand("filter", "Filter one stained image down to selected tissue classes");
  std::string filter_image;
  std::string filter_model;
  std::vector<int> filter_classes;
  std::string filter_out;
  bool filter_clean = false;
  int filter_workers = 1;
  cbi::MorphConfig morph;
  filter->add_option("--image", filter_image)->required()->check(CLI::ExistingFile);
  filter->add_option("--model", filter_model)->required()->check(CLI::ExistingFile);
  filter->add_option("--classes", filter_classes, "Selected classes, e.g. 3,4,5")->required()->delimiter(',');
  filter->add_flag("--clean", filter_clean, "Apply morphological cleanup");
  filter->add_option("--open-radius", morph.open_radius);
  filter->add_option("--close-radius", morph.close_radius);
  filter->add_option("--min-area", morph.min_component_area);
  filter->add_option("--workers", filter_workers)->envname("CBI_WORKERS");
  filter->add_option("-o,--output", filter_out)->required();

  // composite
  auto* comp = app.add_subcommand("composite", "Fuse filtered gray images into one pseudo-color image");
  std::vector<std::string> layer_specs;
  std::string comp_mode = "replace";
  std::string comp_out;
  std::string comp_legend;
  comp->add_option("--layer", layer_specs, "PATH:R,G,B:ORDER (repeatable)")->required();
  comp->add_option("--mode", comp_mode)->check(CLI::IsMember({"replace", "blend"}));
  comp->add_option("--legend", comp_legend, "Also write a legend PNG");
  comp->add_option("-o,--output", comp_out)->required();

  // attention
  auto* att = app.add_subcommand("attention", "Co-localization mask from filtered gray images");
  std::vector<std::string> att_inputs;
  cbi::AttentionConfig ac;
  std::vector<double> att_thresholds;
  std::string att_out;
  std::string att_base;
  std::string att_overlay_out;
  std::string att_style = "contour";
  att->add_option("--gray", att_inputs, "Filtered gray image (repeatable)")->required()->check(CLI::ExistingFile);
  att->add_option("--window", ac.window);
  att->add_option("--threshold", att_thresholds, "One per biomarker, or one for all");
  att->add_option("--close-radius", ac.close_radius);
  att->add_option("--min-area", ac.min_region_area);
  att->add_option("-o,--output", att_out, "1-bit mask PNG")->required();
  auto* base_opt = att->add_option("--overlay-on", att_base, "Image to draw the mask over")->check(CLI::ExistingFile);
  att->add_option("--overlay-out", att_overlay_out)->needs(base_opt);
  att->add_option("--style", att_style)->check(CLI::IsMember({"contour", "tint"}));

  // demo
  auto* demo = app.add_subcommand("demo", "Write a synthetic CD30/PAX5 slide set with a ready run config");
  std::string demo_dir;
  int demo_size = 2048;
  std::uint64_t demo_seed = 7;
  cbi::TileGrid demo_tile;
  int demo_workers = 1;
  demo->add_option("-o,--output", demo_dir)->required();
  demo->add_option("--size", demo_size)->check(CLI::Range(64, 16384));
  demo->add_option("--seed", demo_seed);
  demo->add_option("--tile", demo_tile.tile_size);
  demo->add_option("--workers", demo_workers);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) {
      if (!synthetic && samples_csv.empty()) {
        throw cbi::Error(cbi::ErrorKind::ConfigError, "train needs --samples or --synthetic");
      }
      tc.seed = seed;
      cbi::TrainResult result;
      if (synthetic) {
        result = cbi::train_demo_model(seed, tc);
      } else {
        const auto samples = cbi::load_samples(cbi::detail::read_text_file(samples_csv));
        result = cbi::train(samples, tc, cbi::initialize_model(samples));
      }
      cbi::detail::write_text_file(model_out, cbi::serialize_model(result.model));
      write_rmse_report(result, report_out.empty() ? model_out + ".rmse.csv" : report_out);
      std::cout << "rmse " << result.initial_rmse << " -> " << result.final_rmse << " after " << result.epochs_run
                << " epochs\n";
    } else if (*reg) {
      const auto est = cbi::estimate_rigid_detailed(cbi::decode(reg_source), cbi::decode(reg_target));
      cbi::detail::write_text_file(reg_out, cbi::serialize_transform(est.transform));
      std::cout << "angle " << est.angle_degrees << " deg, translation (" << est.transform.tx << ", "
                << est.transform.ty << "), ncc " << est.score << "\n";
    } else if (*run) {
      if (!check_manifest.empty()) {
        const auto doc = cbi::detail::parse_json(cbi::detail::read_text_file(check_manifest), "manifest");
        const auto diffs = cbi::verify_manifest(doc);
        for (const auto& d : diffs) std::cerr << d.role << ": " << d.path.string() << " " << d.reason << "\n";
        if (!diffs.empty()) {
          throw cbi::Error(cbi::ErrorKind::IoError, std::to_string(diffs.size()) + " input(s) differ from the manifest");
        }
      }
      cbi::RunConfig cfg = cbi::load_run_config(run_config);
      if (run_workers) cfg.workers = positive_workers(*run_workers);
      const auto result = cbi::run_pipeline(cfg);
      for (const auto& s : result.stages) std::cout << s.name << "\t" << s.seconds << " s\n";
      for (const auto& p : result.outputs) std::cout << "wrote " << p.string() << "\n";
    } else if (*filter) {
      const cbi::PixelEvaluator eval(cbi::load_model_file(filter_model));
      const cbi::TileGrid grid;
      const int workers = positive_workers(filter_workers);
      cbi::GrayImage gray =
          cbi::filter_image_tiled(cbi::decode(filter_image), eval, cbi::ClassSet(filter_classes), grid, workers);
      if (filter_clean) gray = cbi::morph_clean_tiled(gray, morph, grid, workers);
      cbi::encode(gray, filter_out);
    } else if (*comp) {
      std::vector<cbi::Layer> layers;
      for (const auto& arg : layer_specs) layers.push_back(parse_layer(arg));
      const auto mode = comp_mode == "blend" ? cbi::CompositeMode::Blend : cbi::CompositeMode::Replace;
      cbi::encode(cbi::composite(layers, mode), comp_out);
      if (!comp_legend.empty()) cbi::encode(cbi::legend(layers), comp_legend);
    } else if (*att) {
      if (!att_thresholds.empty()) ac.thresholds = att_thresholds;
      std::vector<cbi::DensityMap> densities;
      for (const auto& path : att_inputs) densities.push_back(cbi::density_map(cbi::decode_gray(path), ac.window));
      const auto mask = cbi::co_localize(densities, ac);
      cbi::encode_mask_png(mask.mask, att_out);
      if (!att_base.empty()) {
        const auto style = att_style == "tint" ? cbi::OverlayStyle::Tint : cbi::OverlayStyle::Contour;
        cbi::encode(cbi::overlay_mask(cbi::decode(att_base), mask.mask, style, {0, 200, 0}),
                    att_overlay_out.empty() ? att_out + ".overlay.png" : att_overlay_out);
      }
    } else if (*demo) {
      demo_tile.validate();
      const auto files = cbi::write_demo(demo_dir, demo_size, demo_seed, demo_tile, positive_workers(demo_workers));
      std::cout << "run with: cbi run " << files.run_config.string() << "\n";
    }
  } catch (const cbi::Error& e) {
    std::cerr << "cbi: " << e.what() << "\n";
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "cbi: internal error: " << e.what() << "\n";
    return static_cast<int>(cbi::ErrorCategory::Internal);
  }
  return 0;
}
