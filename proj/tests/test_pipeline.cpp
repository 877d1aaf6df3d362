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

#include <fstream>

#include "cbi/pipeline.hpp"
#include "test_util.hpp"

namespace {

namespace fs = std::filesystem;

class PipelineTest : public test_util::TempDirTest {
 protected:
  fs::path demo(int size = 384, const cbi::TileGrid& tile = {128, 0}, int workers = 1) {
    return cbi::write_demo(dir() / "demo", size, 7, tile, workers).run_config;
  }

  static std::string bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
  }

  static void edit_json(const fs::path& p, const std::function<void(nlohmann::json&)>& fn) {
    auto doc = nlohmann::json::parse(bytes(p));
    fn(doc);
    cbi::detail::write_text_file(p, doc.dump(2));
  }
};

TEST_F(PipelineTest, DemoWritesFiveOutputs) {
  const auto result = cbi::run_pipeline(cbi::load_run_config(demo()));
  std::vector<std::string> names;
  for (const auto& p : result.outputs) names.push_back(p.filename().string());
  EXPECT_EQ(names, (std::vector<std::string>{"cbi.png", "attention.png", "filtered_CD30.png", "filtered_PAX5.png",
                                             "manifest.json"}));
  for (const auto& p : result.outputs) EXPECT_TRUE(fs::exists(p)) << p;
  const auto& m = result.manifest;
  EXPECT_EQ(m["version"], "0.1.0");
  EXPECT_EQ(m["config"]["sha256"], cbi::sha256_file(dir() / "demo" / "run.json"));
  bool has_model = false;
  for (const auto& e : m["inputs"]) has_model |= e["role"].get<std::string>().starts_with("model:");
  EXPECT_TRUE(has_model);
  EXPECT_GE(m["stages"].size(), 8u);
  EXPECT_EQ(m["parameters"]["attention"]["window"], 65);
}

TEST_F(PipelineTest, WorkerAndTileCountDoNotChangeOutputs) {
  const auto config = demo();
  auto cfg = cbi::load_run_config(config);
  std::vector<std::string> reference;
  for (int workers : {1, 3}) {
    for (int tile : {64, 200}) {
      cfg.workers = workers;
      cfg.tile = {tile, 0};
      const auto r = cbi::run_pipeline(cfg);
      std::vector<std::string> images;
      for (const auto& p : r.outputs) {
        if (p.extension() == ".png") images.push_back(bytes(p));
      }
      if (reference.empty()) reference = images;
      EXPECT_EQ(images, reference) << "workers " << workers << " tile " << tile;
    }
  }
}

TEST_F(PipelineTest, OptionalLegendAndOverlay) {
  const auto config = demo();
  edit_json(config, [](nlohmann::json& d) {
    d["legend"] = true;
    d["overlay"] = "tint";
    d["composite_mode"] = "blend";
  });
  const auto r = cbi::run_pipeline(cbi::load_run_config(config));
  EXPECT_EQ(r.outputs.size(), 7u);
  EXPECT_TRUE(fs::exists(dir() / "demo" / "out" / "legend.png"));
  EXPECT_TRUE(fs::exists(dir() / "demo" / "out" / "attention_overlay.png"));
}

TEST_F(PipelineTest, MismatchedDimsNameBothImages) {
  const auto config = demo();
  cbi::encode(cbi::RasterImage(100, 90, cbi::kWhite), dir() / "demo" / "pax5.png");
  try {
    cbi::run_pipeline(cbi::load_run_config(config));
    FAIL();
  } catch (const cbi::Error& e) {
    EXPECT_EQ(e.kind(), cbi::ErrorKind::DimensionMismatch);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("pax5.png"), std::string::npos) << msg;
    EXPECT_NE(msg.find("he.png"), std::string::npos) << msg;
    EXPECT_NE(msg.find("align:PAX5"), std::string::npos) << msg;
  }
}

TEST_F(PipelineTest, FailureRemovesPartialOutputs) {
  const auto config = demo();
  edit_json(config, [](nlohmann::json& d) { d["legend"] = true; });
  // A directory where legend.png should go makes the last image write fail.
  fs::create_directories(dir() / "demo" / "out" / "legend.png");
  EXPECT_THROW(cbi::run_pipeline(cbi::load_run_config(config)), cbi::Error);
  EXPECT_FALSE(fs::exists(dir() / "demo" / "out" / "cbi.png"));
  EXPECT_FALSE(fs::exists(dir() / "demo" / "out" / "attention.png"));
  EXPECT_FALSE(fs::exists(dir() / "demo" / "out" / "filtered_CD30.png"));
  EXPECT_FALSE(fs::exists(dir() / "demo" / "out" / "manifest.json"));
}

TEST_F(PipelineTest, StageNameInErrors) {
  const auto config = demo();
  cbi::detail::write_text_file(dir() / "demo" / "model.json", "{\"rules\": 3}");
  try {
    cbi::run_pipeline(cbi::load_run_config(config));
    FAIL();
  } catch (const cbi::Error& e) {
    EXPECT_EQ(e.kind(), cbi::ErrorKind::ParseError);
    EXPECT_NE(std::string(e.what()).find("stage 'load:CD30'"), std::string::npos) << e.what();
  }
}

TEST_F(PipelineTest, DuplicateOrderIndex) {
  const auto config = demo();
  edit_json(dir() / "demo" / "pax5.json", [](nlohmann::json& d) { d["order_index"] = 0; });
  try {
    cbi::run_pipeline(cbi::load_run_config(config));
    FAIL();
  } catch (const cbi::Error& e) {
    EXPECT_EQ(e.kind(), cbi::ErrorKind::DuplicateOrderIndex);
    EXPECT_EQ(e.category(), cbi::ErrorCategory::Config);
  }
}

TEST_F(PipelineTest, ManifestDetectsChangedInput) {
  const auto r = cbi::run_pipeline(cbi::load_run_config(demo()));
  EXPECT_TRUE(cbi::verify_manifest(r.manifest).empty());
  cbi::detail::write_text_file(dir() / "demo" / "cd30.json", bytes(dir() / "demo" / "cd30.json") + " ");
  const auto diffs = cbi::verify_manifest(r.manifest);
  ASSERT_EQ(diffs.size(), 1u);
  EXPECT_EQ(diffs[0].role, "profile:CD30");
  fs::remove(dir() / "demo" / "he.png");
  EXPECT_EQ(cbi::verify_manifest(r.manifest).size(), 2u);
}

TEST_F(PipelineTest, TransformSidecarAndRegistration) {
  const auto config = demo(256);
  const auto pax5 = cbi::decode(dir() / "demo" / "pax5.png");
  const cbi::RasterImage moved = cbi::apply(pax5, cbi::AffineTransform::translation(6, -4), pax5.dims());
  cbi::encode(moved, dir() / "demo" / "pax5_moved.png");
  const auto baseline = cbi::run_pipeline(cbi::load_run_config(config));
  const auto baseline_pax = cbi::decode_gray(dir() / "demo" / "out" / "filtered_PAX5.png");

  // Exact inverse shift via a sidecar restores the filtered layer away from the border.
  cbi::detail::write_text_file(dir() / "demo" / "undo.json",
                               cbi::serialize_transform(cbi::AffineTransform::translation(-6, 4)));
  edit_json(dir() / "demo" / "pax5.json", [](nlohmann::json& d) {
    d["image_path"] = "pax5_moved.png";
    d["transform_path"] = "undo.json";
  });
  const auto with_sidecar = cbi::run_pipeline(cbi::load_run_config(config));
  EXPECT_EQ(with_sidecar.manifest["transforms"]["PAX5"][2], -6.0);
  const auto sidecar_pax = cbi::decode_gray(dir() / "demo" / "out" / "filtered_PAX5.png");
  int differing = 0;
  for (int y = 20; y < 236; ++y) {
    for (int x = 20; x < 236; ++x) differing += sidecar_pax(x, y) != baseline_pax(x, y);
  }
  EXPECT_EQ(differing, 0);

  // CD30 shares the H&E frame, so registering a shifted copy recovers the shift.
  const auto cd30 = cbi::decode(dir() / "demo" / "cd30.png");
  cbi::encode(cbi::apply(cd30, cbi::AffineTransform::translation(6, -4), cd30.dims()), dir() / "demo" / "cd30_moved.png");
  edit_json(dir() / "demo" / "cd30.json", [](nlohmann::json& d) {
    d["image_path"] = "cd30_moved.png";
    d["register"] = true;
  });
  const auto registered = cbi::run_pipeline(cbi::load_run_config(config));
  const auto& t = registered.manifest["transforms"]["CD30"];
  EXPECT_NEAR(t[2].get<double>(), -6.0, 1.0);
  EXPECT_NEAR(t[5].get<double>(), 4.0, 1.0);
}

TEST_F(PipelineTest, RunConfigDiagnostics) {
  auto expect_parse_error = [&](const std::string& body, const std::string& needle) {
    cbi::detail::write_text_file(dir() / "run.json", body);
    try {
      cbi::load_run_config(dir() / "run.json");
      ADD_FAILURE() << body;
    } catch (const cbi::Error& e) {
      EXPECT_EQ(e.kind(), cbi::ErrorKind::ParseError);
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_parse_error(R"({"profiles":["a.json"],"output_dir":"o"})", "reference_image");
  expect_parse_error(R"({"reference_image":"h.png","profiles":[],"output_dir":"o"})", "profiles");
  expect_parse_error(R"({"reference_image":"h.png","profiles":["a.json"],"output_dir":"o","composite_mode":"add"})",
                     "composite_mode");
  expect_parse_error(R"({"reference_image":"h.png","profiles":["a.json"],"output_dir":"o","tile":{"tile_size":1.5}})",
                     "run.tile.tile_size");

  cbi::detail::write_text_file(dir() / "run.json",
                               R"({"reference_image":"h.png","profiles":["a.json"],"output_dir":"o",
                                   "attention":{"thresholds":0.2,"window":33},"workers":3})");
  const auto cfg = cbi::load_run_config(dir() / "run.json");
  EXPECT_EQ(cfg.attention.thresholds, (std::vector<double>{0.2}));
  EXPECT_EQ(cfg.attention.window, 33);
  EXPECT_EQ(cfg.workers, 3);
  EXPECT_EQ(cfg.reference_image, dir() / "h.png");
}

TEST(WithOverlap, GrowsTileWhenNeeded) {
  EXPECT_EQ(cbi::with_overlap({512, 0}, 6).overlap, 6);
  const auto g = cbi::with_overlap({8, 0}, 32);
  EXPECT_EQ(g.overlap, 32);
  EXPECT_GT(g.tile_size, g.overlap);
}

TEST(FileStem, SanitizesNames) {
  EXPECT_EQ(cbi::file_stem("CD30"), "CD30");
  EXPECT_EQ(cbi::file_stem("a/b c"), "a_b_c");
  EXPECT_EQ(cbi::file_stem(""), "biomarker");
}

}  // namespace
