// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "circat/circat.h"
#include "doctest.h"
#include "json.hpp"

namespace {

circat_tensor* make(std::vector<std::size_t> dims, const std::vector<double>& data) {
  circat_tensor* t = nullptr;
  REQUIRE(circat_tensor_create(dims.data(), dims.size(), data.data(), &t) == CIRCAT_OK);
  return t;
}

std::string take(char* s) {
  std::string out(s);
  circat_string_free(s);
  return out;
}

}  // namespace

TEST_CASE("status names and errors") {
  CHECK(std::string(circat_status_name(CIRCAT_OK)) == "ok");
  CHECK(std::string(circat_status_name(CIRCAT_ERR_UNSUPPORTED)) == "unsupported");
  circat_tensor* t = nullptr;
  const std::size_t bad[] = {0};
  const double data[] = {1.0};
  CHECK(circat_tensor_create(bad, 1, data, &t) == CIRCAT_ERR_SHAPE);
  CHECK(std::string(circat_last_error()).size() > 0);
  CHECK(circat_tensor_create(nullptr, 1, data, &t) == CIRCAT_ERR_INVALID_ARGUMENT);
}

TEST_CASE("tensor round trip") {
  circat_tensor* t = make({2, 3}, {1, 2, 3, 4, 5, 6});
  std::size_t dims[3] = {}, rank = 0;
  CHECK(circat_tensor_shape(t, dims, 3, &rank) == CIRCAT_OK);
  CHECK(rank == 2);
  CHECK(dims[0] == 2);
  CHECK(dims[1] == 3);
  CHECK(circat_tensor_numel(t) == 6);
  std::vector<double> out(6);
  CHECK(circat_tensor_read(t, out.data(), out.size()) == CIRCAT_OK);
  CHECK(out[5] == 6.0);
  CHECK(circat_tensor_read(t, out.data(), 5) == CIRCAT_ERR_SHAPE);
  circat_tensor_free(t);
}

TEST_CASE("cat forward through the C interface") {
  // Zero kernel logits give uniform mixing: every output row is the mean of
  // x w_v.
  circat_tensor* x = make({3, 2}, {1, 2, 3, 4, 5, 6});
  circat_tensor* wa = make({2, 1}, {0, 0});
  circat_tensor* wv = make({2, 2}, {1, 0, 0, 1});
  for (const char* path : {"explicit", "gather", "fft"}) {
    circat_tensor* y = nullptr;
    REQUIRE(circat_cat_forward(x, wa, wv, 1, path, "col_shift", 0, &y) == CIRCAT_OK);
    std::vector<double> out(6);
    REQUIRE(circat_tensor_read(y, out.data(), 6) == CIRCAT_OK);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(out[2 * i] == doctest::Approx(3.0).epsilon(1e-14));
      CHECK(out[2 * i + 1] == doctest::Approx(4.0).epsilon(1e-14));
    }
    circat_tensor_free(y);
  }
  circat_tensor* y = nullptr;
  CHECK(circat_cat_forward(x, wa, wv, 1, "sideways", "col_shift", 0, &y) ==
        CIRCAT_ERR_INVALID_ARGUMENT);
  CHECK(circat_cat_forward(x, wv, wv, 3, "fft", "col_shift", 0, &y) != CIRCAT_OK);
  circat_tensor_free(x);
  circat_tensor_free(wa);
  circat_tensor_free(wv);
}

TEST_CASE("convolution, cost model and parameter counts") {
  const double z[] = {1, 2, 3}, v[] = {4, 5, 6};
  double out[3];
  REQUIRE(circat_circular_convolve(z, v, 3, 0, out) == CIRCAT_OK);
  // c0 = z0 v0 + z2 v1 + z1 v2
  CHECK(out[0] == doctest::Approx(4 + 15 + 12));
  REQUIRE(circat_circular_convolve(z, v, 3, 1, out) == CIRCAT_OK);
  // r0 = z0 v0 + z1 v1 + z2 v2
  CHECK(out[0] == doctest::Approx(4 + 10 + 18));

  circat_projection_cost c{};
  REQUIRE(circat_cost_model(256, 1024, 16, 0.25, &c) == CIRCAT_OK);
  CHECK(c.gqa_inner == 1536.0);
  CHECK(c.cat_inner == 1040.0);
  CHECK(circat_cost_model(256, 1024, 16, 2.0, &c) == CIRCAT_ERR_INVALID_ARGUMENT);

  std::size_t n = 0;
  REQUIRE(circat_param_count("cat", 768, 12, 196, 1.0, &n) == CIRCAT_OK);
  CHECK(n == 599040);
  REQUIRE(circat_param_count("cat-alter", 768, 12, 196, 1.0, &n) == CIRCAT_OK);
  CHECK(n == (2 * 768 + 6) * 768);
}

TEST_CASE("verify through the C interface") {
  char* report = nullptr;
  int passed = 0;
  REQUIRE(circat_verify("symmetry", 3, &report, &passed) == CIRCAT_OK);
  const auto j = nlohmann::json::parse(take(report));
  CHECK(passed == 1);
  CHECK(j.at("suite") == "symmetry");
  CHECK(circat_verify("nope", 3, &report, &passed) == CIRCAT_ERR_INVALID_ARGUMENT);
}

TEST_CASE("bench through the C interface") {
  circat_bench_case c{"cat", "fft", "float64", "forward", 0, 8, 2, 3, 1, 0};
  const std::size_t ns[] = {16, 32};
  circat_bench_results* r = nullptr;
  REQUIRE(circat_bench_sweep(&c, ns, 2, &r) == CIRCAT_OK);
  REQUIRE(circat_bench_size(r) == 2);
  circat_bench_row row{};
  REQUIRE(circat_bench_row_at(r, 1, &row) == CIRCAT_OK);
  CHECK(row.n == 32);
  CHECK(row.attn_coeffs == 64);
  const auto path = std::filesystem::temp_directory_path() / "circat_c_api.csv";
  CHECK(circat_bench_write_csv(r, path.string().c_str()) == CIRCAT_OK);
  CHECK(circat_bench_write_csv(r, "/nonexistent-dir/x.csv") == CIRCAT_ERR_IO);
  circat_bench_free(r);

  circat_bench_case bad{"attention", "fft", "float64", "forward", 0, 8, 2, 3, 1, 0};
  CHECK(circat_bench_sweep(&bad, ns, 2, &r) == CIRCAT_ERR_UNSUPPORTED);
}

TEST_CASE("train, save, load and export") {
  circat_trainer* t = nullptr;
  REQUIRE(circat_trainer_create(
              R"({"steps": 3, "n": 8, "d": 8, "heads": 2, "train_examples": 16,
                  "eval_examples": 4, "mixer": "cat-alter", "log_every": 1})",
              &t) == CIRCAT_OK);
  char* cfg = nullptr;
  REQUIRE(circat_trainer_config(t, &cfg) == CIRCAT_OK);
  const auto resolved = nlohmann::json::parse(take(cfg));
  CHECK(resolved.at("steps") == 3);
  CHECK(resolved.at("task") == "masked_copy");

  std::vector<double> losses;
  circat_train_summary s{};
  REQUIRE(circat_trainer_run(
              t,
              [](std::size_t, double loss, void* user) {
                static_cast<std::vector<double>*>(user)->push_back(loss);
                return 0;
              },
              &losses, &s) == CIRCAT_OK);
  CHECK(losses.size() == 3);
  CHECK(s.steps_done == 3);
  CHECK(std::isfinite(s.final_loss));
  CHECK(s.diverged == 0);

  const auto dir = std::filesystem::temp_directory_path() / "circat_c_api";
  std::filesystem::create_directories(dir);
  const std::string ckpt = (dir / "model").string();
  REQUIRE(circat_trainer_save(t, ckpt.c_str()) == CIRCAT_OK);
  circat_trainer_free(t);

  circat_model* m = nullptr;
  REQUIRE(circat_model_load((ckpt + ".json").c_str(), &m) == CIRCAT_OK);
  char* info = nullptr;
  REQUIRE(circat_model_info(m, &info) == CIRCAT_OK);
  CHECK(nlohmann::json::parse(take(info)).at("step") == 3);
  char* summary = nullptr;
  REQUIRE(circat_model_export_maps(m, nullptr, 0, 5, (dir / "maps").string().c_str(), 512,
                                   &summary) == CIRCAT_OK);
  const auto sj = nlohmann::json::parse(take(summary));
  CHECK(sj.at("mosaic").at("width") == 2 * 8);
  CHECK(sj.at("mosaic").at("height") == 2 * 8);
  CHECK(circat_model_export_maps(m, nullptr, 0, 5, (dir / "maps").string().c_str(), 4,
                                 &summary) == CIRCAT_ERR_INVALID_ARGUMENT);
  circat_model_free(m);

  CHECK(circat_trainer_create(R"({"stepz": 3})", &t) == CIRCAT_ERR_INVALID_ARGUMENT);
  CHECK(circat_trainer_create("{not json", &t) == CIRCAT_ERR_INVALID_ARGUMENT);
  CHECK(circat_model_load("/nonexistent/ckpt", &m) == CIRCAT_ERR_IO);
}
