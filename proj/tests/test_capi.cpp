#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "boneage.h"

#include "gradcam.hpp"
#include "image.hpp"
#include "model.hpp"
#include "ridge.hpp"
#include "rng.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& name) {
  std::ifstream in(std::string(TEST_DATA_DIR) + "/" + name,
                   std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string slurp_path(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

fs::path scratch_dir() {
  fs::path dir = fs::temp_directory_path() / "boneage_capi_tests";
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

boneage::Model small_model(std::uint64_t seed) {
  boneage::ModelSpec spec;
  spec.input_h = 12;
  spec.input_w = 12;
  spec.input_c = 1;
  spec.blocks = {{3, 1, 1, true}, {4, 1, 1, false}};
  spec.dense_width = 6;
  spec.dropout_rate = 0.0;
  spec.head = boneage::HeadKind::RidgeLayer;
  return boneage::init_model(spec, seed);
}

}  // namespace

TEST_CASE("version and error channel basics") {
  REQUIRE(ba_version() != nullptr);
  CHECK(std::strcmp(ba_version(), "0.1.0") == 0);

  ba_dataset* ds = nullptr;
  CHECK(ba_dataset_parse_coco("{ not json", &ds) == BA_E_PARSE);
  CHECK(ds == nullptr);
  CHECK(std::strlen(ba_last_error()) > 0);

  // a success clears the message
  std::string coco = slurp("coco_quad.json");
  CHECK(ba_dataset_parse_coco(coco.c_str(), &ds) == BA_OK);
  CHECK(std::strcmp(ba_last_error(), "") == 0);
  ba_dataset_free(ds);

  ba_text_free(nullptr);  // must be a safe no-op
}

TEST_CASE("dataset parsing, counting, and serialization") {
  std::string coco = slurp("coco_quad.json");
  ba_dataset* ds = nullptr;
  REQUIRE(ba_dataset_parse_coco(coco.c_str(), &ds) == BA_OK);
  REQUIRE(ds != nullptr);
  CHECK(ba_dataset_image_count(ds) == 1);
  CHECK(ba_dataset_annotation_count(ds) == 1);

  char* text = nullptr;
  REQUIRE(ba_dataset_to_coco(ds, &text) == BA_OK);
  REQUIRE(text != nullptr);
  CHECK(std::string(text) == coco);  // canonical fixture round-trips exactly
  ba_text_free(text);
  ba_dataset_free(ds);

  std::string via = slurp("via_quad.json");
  ba_dataset* from_via = nullptr;
  REQUIRE(ba_dataset_parse_via(via.c_str(), &from_via) == BA_OK);
  CHECK(ba_dataset_image_count(from_via) == 1);
  CHECK(ba_dataset_annotation_count(from_via) == 1);
  ba_dataset_free(from_via);
}

TEST_CASE("dataset argument and error-code mapping") {
  ba_dataset* ds = nullptr;
  CHECK(ba_dataset_parse_coco(nullptr, &ds) == BA_E_ARGUMENT);
  std::string coco = slurp("coco_quad.json");
  CHECK(ba_dataset_parse_coco(coco.c_str(), nullptr) == BA_E_ARGUMENT);
  CHECK(ba_dataset_to_coco(nullptr, nullptr) == BA_E_ARGUMENT);

  CHECK(ba_dataset_image_count(nullptr) == -1);
  CHECK(ba_dataset_annotation_count(nullptr) == -1);
  ba_dataset_free(nullptr);

  // dangling annotation reference surfaces as the reference status
  std::string orphan = R"({
    "annotations": [{"category_id": 1, "id": 1, "image_id": 99,
                     "segmentation": [[0.0,0.0,4.0,0.0,4.0,4.0]]}],
    "categories": [{"id": 1, "name": "hand"}],
    "images": [{"file_name": "a.pgm", "height": 8, "id": 1, "width": 8}]
  })";
  CHECK(ba_dataset_parse_coco(orphan.c_str(), &ds) == BA_E_REFERENCE);

  // two-vertex polygon surfaces as geometry
  std::string degenerate = R"({
    "annotations": [{"category_id": 1, "id": 1, "image_id": 1,
                     "segmentation": [[0.0,0.0,4.0,0.0]]}],
    "categories": [{"id": 1, "name": "hand"}],
    "images": [{"file_name": "a.pgm", "height": 8, "id": 1, "width": 8}]
  })";
  CHECK(ba_dataset_parse_coco(degenerate.c_str(), &ds) == BA_E_GEOMETRY);
}

TEST_CASE("model save, load, and introspection") {
  boneage::Model model = small_model(41);
  fs::path path = scratch_dir() / "introspect.rgn";
  write_file(path, boneage::save_model(model));

  ba_model* m = nullptr;
  REQUIRE(ba_model_load(path.string().c_str(), &m) == BA_OK);
  REQUIRE(m != nullptr);
  CHECK(ba_model_input_width(m) == 12);
  CHECK(ba_model_input_height(m) == 12);
  CHECK(ba_model_layer_count(m) == 2);
  CHECK(ba_model_parameter_count(m) ==
        static_cast<int64_t>(boneage::parameter_count(model.spec)));

  fs::path copy = scratch_dir() / "introspect_copy.rgn";
  REQUIRE(ba_model_save(m, copy.string().c_str()) == BA_OK);
  CHECK(slurp_path(copy) == boneage::save_model(model));
  ba_model_free(m);

  CHECK(ba_model_input_width(nullptr) == -1);
  CHECK(ba_model_parameter_count(nullptr) == -1);
  CHECK(ba_model_layer_count(nullptr) == -1);
  ba_model_free(nullptr);
}

TEST_CASE("model load failure modes") {
  ba_model* m = nullptr;
  CHECK(ba_model_load((scratch_dir() / "missing.rgn").string().c_str(), &m) ==
        BA_E_IO);
  CHECK(m == nullptr);

  fs::path truncated = scratch_dir() / "truncated.rgn";
  std::string bytes = boneage::save_model(small_model(42));
  write_file(truncated, bytes.substr(0, bytes.size() / 2));
  CHECK(ba_model_load(truncated.string().c_str(), &m) == BA_E_PARSE);
  CHECK(ba_model_load(nullptr, &m) == BA_E_ARGUMENT);
}

TEST_CASE("prediction matches the library forward pass") {
  boneage::Model model = small_model(43);
  fs::path path = scratch_dir() / "predict.rgn";
  write_file(path, boneage::save_model(model));
  ba_model* m = nullptr;
  REQUIRE(ba_model_load(path.string().c_str(), &m) == BA_OK);

  boneage::Rng rng(4301);
  boneage::GrayImage image(12, 12);
  for (double& v : image.data) {
    v = rng.uniform();
  }
  double months = 0.0;
  REQUIRE(ba_model_predict(m, image.data.data(), 12, 12, &months) == BA_OK);
  CHECK(months == boneage::forward(model, image, boneage::Mode::Infer,
                                   nullptr, nullptr));

  // an off-frame image is resampled to the native frame first
  boneage::GrayImage wide(24, 24);
  for (double& v : wide.data) {
    v = rng.uniform();
  }
  double resampled = 0.0;
  REQUIRE(ba_model_predict(m, wide.data.data(), 24, 24, &resampled) == BA_OK);
  boneage::GrayImage fitted =
      boneage::resize(wide, 12, 12, boneage::ResizeMode::Bilinear);
  CHECK(resampled == boneage::forward(model, fitted, boneage::Mode::Infer,
                                      nullptr, nullptr));

  CHECK(ba_model_predict(m, nullptr, 12, 12, &months) == BA_E_ARGUMENT);
  CHECK(ba_model_predict(m, image.data.data(), 0, 12, &months) ==
        BA_E_ARGUMENT);
  CHECK(ba_model_predict(nullptr, image.data.data(), 12, 12, &months) ==
        BA_E_ARGUMENT);
  ba_model_free(m);
}

TEST_CASE("heatmaps flow through the C surface unchanged") {
  boneage::Model model = small_model(44);
  fs::path path = scratch_dir() / "heatmap.rgn";
  write_file(path, boneage::save_model(model));
  ba_model* m = nullptr;
  REQUIRE(ba_model_load(path.string().c_str(), &m) == BA_OK);

  int w = 0, h = 0;
  REQUIRE(ba_model_heatmap_extent(m, 0, &w, &h) == BA_OK);
  CHECK(w == 12);
  CHECK(h == 12);
  REQUIRE(ba_model_heatmap_extent(m, 1, &w, &h) == BA_OK);
  CHECK(w == 6);  // block 1 pools before block 2's stride-1 conv
  CHECK(h == 6);
  // -1 resolves to the last conv layer
  int lw = 0, lh = 0;
  REQUIRE(ba_model_heatmap_extent(m, -1, &lw, &lh) == BA_OK);
  CHECK(lw == 6);
  CHECK(lh == 6);
  CHECK(ba_model_heatmap_extent(m, 2, &w, &h) == BA_E_CONFIG);
  CHECK(ba_model_heatmap_extent(m, -2, &w, &h) == BA_E_CONFIG);

  boneage::Rng rng(4401);
  boneage::GrayImage image(12, 12);
  for (double& v : image.data) {
    v = rng.uniform();
  }
  std::vector<double> values(static_cast<std::size_t>(lw) * lh, -1.0);
  REQUIRE(ba_model_heatmap(m, image.data.data(), 12, 12, -1, 4, 0.05, 9,
                           values.data()) == BA_OK);
  boneage::Heatmap expected =
      boneage::smooth_grad_cam(model, image, 1, 4, 0.05, 9);
  CHECK(values == expected.values);

  CHECK(ba_model_heatmap(m, image.data.data(), 12, 12, -1, 0, 0.05, 9,
                         values.data()) == BA_E_CONFIG);
  CHECK(ba_model_heatmap(m, nullptr, 12, 12, -1, 1, 0.0, 9, values.data()) ==
        BA_E_ARGUMENT);
  ba_model_free(m);
}

TEST_CASE("ridge fit through the C surface") {
  const double x[2] = {1.0, 1.0};
  const double y[2] = {1.0, 3.0};
  double beta = 0.0;
  REQUIRE(ba_ridge_fit(x, y, 2, 1, 2.0, 0, &beta) == BA_OK);
  CHECK(beta == doctest::Approx(1.0).epsilon(1e-12));

  // cross-check a larger random problem against the library call
  boneage::Rng rng(4501);
  boneage::RidgeProblem problem;
  problem.x = boneage::Tensor({10, 3});
  for (double& v : problem.x.data) {
    v = rng.uniform(-1.0, 1.0);
  }
  problem.y.resize(10);
  for (double& v : problem.y) {
    v = rng.uniform(-2.0, 2.0);
  }
  problem.lambda = 0.25;
  boneage::RidgeSolution direct = boneage::fit_closed_form(problem, true);
  double out[3] = {0.0, 0.0, 0.0};
  REQUIRE(ba_ridge_fit(problem.x.data.data(), problem.y.data(), 10, 3, 0.25,
                       1, out) == BA_OK);
  for (int j = 0; j < 3; ++j) {
    CHECK(out[j] == direct.beta[j]);
  }

  const double dup[4] = {1.0, 1.0, 1.0, 1.0};
  const double y2[2] = {1.0, 2.0};
  double beta2[2];
  CHECK(ba_ridge_fit(dup, y2, 2, 2, 0.0, 0, beta2) == BA_E_SINGULAR);
  CHECK(ba_ridge_fit(nullptr, y, 2, 1, 1.0, 0, &beta) == BA_E_ARGUMENT);
  CHECK(ba_ridge_fit(x, y, 0, 1, 1.0, 0, &beta) == BA_E_ARGUMENT);
  CHECK(ba_ridge_fit(x, y, 2, 1, -1.0, 0, &beta) == BA_E_CONFIG);
}

TEST_CASE("ridge cross-validation through the C surface") {
  boneage::Rng rng(4601);
  const int n = 40, p = 2;
  std::vector<double> x(static_cast<std::size_t>(n) * p);
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    x[i * p] = rng.uniform(-1.0, 1.0);
    x[i * p + 1] = rng.uniform(-1.0, 1.0);
    y[i] = 3.0 * x[i * p] - 2.0 * x[i * p + 1];
  }
  const double grid[2] = {1e-8, 1e2};
  double best = 0.0;
  double mean_mse[2] = {0.0, 0.0};
  REQUIRE(ba_ridge_cv(x.data(), y.data(), n, p, grid, 2, 5, 0, &best,
                      mean_mse) == BA_OK);
  CHECK(best == 1e-8);
  CHECK(mean_mse[0] < mean_mse[1]);

  // the per-grid output buffer is optional
  REQUIRE(ba_ridge_cv(x.data(), y.data(), n, p, grid, 2, 5, 0, &best,
                      nullptr) == BA_OK);

  CHECK(ba_ridge_cv(x.data(), y.data(), 4, p, grid, 2, 5, 0, &best,
                    nullptr) == BA_E_CONFIG);
  CHECK(ba_ridge_cv(x.data(), y.data(), n, p, grid, 0, 5, 0, &best,
                    nullptr) == BA_E_ARGUMENT);
  CHECK(ba_ridge_cv(x.data(), y.data(), n, p, nullptr, 2, 5, 0, &best,
                    nullptr) == BA_E_ARGUMENT);
}

TEST_CASE("in-process CLI entry point") {
  const char* help[] = {"boneage", "--help"};
  CHECK(ba_run(2, help) == 0);
  const char* unknown[] = {"boneage", "frobnicate"};
  CHECK(ba_run(2, unknown) == 2);
  CHECK(ba_run(0, nullptr) == 2);
}
