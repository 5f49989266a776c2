// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include <filesystem>
#include <fstream>
#include <sstream>

#include "circat/bench.hpp"
#include "doctest.h"

using namespace circat;

namespace {

BenchCase make_case(Mechanism m, CatPath path, std::size_t n, std::size_t d, std::size_t h) {
  BenchCase c;
  c.mechanism = m;
  c.path = path;
  c.n = n;
  c.d = d;
  c.heads = h;
  c.reps = 5;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("bench case validation") {
  CHECK_NOTHROW(validate(make_case(Mechanism::kCat, CatPath::kFft, 8, 4, 2)));
  try {
    validate(make_case(Mechanism::kAttention, CatPath::kFft, 8, 4, 2));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnsupported);
  }
  BenchCase c = make_case(Mechanism::kCat, CatPath::kFft, 8, 4, 2);
  c.reps = 2;
  CHECK_THROWS_AS(validate(c), Error);
  c = make_case(Mechanism::kCat, CatPath::kFft, 8, 4, 3);
  CHECK_THROWS_AS(validate(c), Error);
  c = make_case(Mechanism::kCat, CatPath::kFft, 8, 4, 2);
  c.precision = Precision::kFloat32;
  c.measure = Measure::kForwardBackward;
  CHECK_THROWS_AS(validate(c), Error);
}

TEST_CASE("run_bench results") {
  for (CatPath path : {CatPath::kExplicit, CatPath::kGather, CatPath::kFft})
    for (Precision prec : {Precision::kFloat64, Precision::kFloat32}) {
      BenchCase c = make_case(Mechanism::kCat, path, 64, 8, 2);
      c.precision = prec;
      const BenchResult r = run_bench(c);
      CHECK(r.time.min_ns <= r.time.median_ns);
      CHECK(r.time.min_ns <= r.time.mean_ns);
      CHECK(r.time.min_ns > 0.0);
      CHECK(r.attn_coeffs == count_attention_coefficients(64, 2, Mechanism::kCat));
    }
  const BenchResult a = run_bench(make_case(Mechanism::kAttention, CatPath::kExplicit, 64, 8, 2));
  CHECK(a.attn_coeffs == 2 * 64 * 64);
}

TEST_CASE("forward_backward costs more than forward") {
  const BenchCase cases[] = {make_case(Mechanism::kCat, CatPath::kExplicit, 128, 16, 2),
                             make_case(Mechanism::kCat, CatPath::kGather, 128, 16, 2),
                             make_case(Mechanism::kCat, CatPath::kFft, 128, 16, 2),
                             make_case(Mechanism::kAttention, CatPath::kExplicit, 128, 16, 2)};
  for (BenchCase c : cases) {
    const double fwd = run_bench(c).time.median_ns;
    c.measure = Measure::kForwardBackward;
    CHECK(run_bench(c).time.median_ns > fwd);
  }
}

TEST_CASE("allocation high-water audit") {
  const std::size_t n = 256;
  const BenchResult explicit_cat = run_bench(make_case(Mechanism::kCat, CatPath::kExplicit, n, 4, 1));
  CHECK(explicit_cat.peak_scalars >= static_cast<std::int64_t>(n * n));
  const BenchResult attention = run_bench(make_case(Mechanism::kAttention, CatPath::kExplicit, n, 4, 1));
  CHECK(attention.peak_scalars >= static_cast<std::int64_t>(n * n));
  for (CatPath path : {CatPath::kFft, CatPath::kGather})
    for (std::size_t d : {4u, 64u}) {
      const BenchResult r = run_bench(make_case(Mechanism::kCat, path, n, d, 1));
      CHECK(r.peak_scalars < static_cast<std::int64_t>(10 * n * d));
    }
}

TEST_CASE("timing harness") {
  const Timing empty = time_body([] {}, 50, 1);
  const BenchResult real = run_bench(make_case(Mechanism::kCat, CatPath::kFft, 256, 64, 4));
  CHECK(empty.median_ns < 0.01 * real.time.median_ns);
  // Stability smoke test, not a strict bound.
  const BenchResult again = run_bench(make_case(Mechanism::kCat, CatPath::kFft, 256, 64, 4));
  CHECK(again.time.median_ns < 1.5 * real.time.median_ns);
  CHECK(real.time.median_ns < 1.5 * again.time.median_ns);
}

TEST_CASE("scaling_sweep ratios") {
  const std::size_t ns[] = {16, 32, 64};
  const Sweep s = scaling_sweep(make_case(Mechanism::kCat, CatPath::kFft, 0, 4, 1), ns);
  REQUIRE(s.results.size() == 3);
  REQUIRE(s.ratios.size() == 2);
  CHECK(s.ratios[1].n_from == 32);
  CHECK(s.ratios[1].n_to == 64);
  CHECK(s.ratios[1].ratio == s.results[2].time.median_ns / s.results[1].time.median_ns);
  const std::size_t bad[] = {32, 16};
  CHECK_THROWS_AS(scaling_sweep(make_case(Mechanism::kCat, CatPath::kFft, 0, 4, 1), bad), Error);
}

TEST_CASE("projection_cost") {
  const ProjectionCost c = projection_cost(256, 1024, 16, 0.25);
  CHECK(c.gqa_inner == 1536.0);
  CHECK(c.cat_inner == 1040.0);
  CHECK(c.ratio == 1536.0 / 1040.0);
  CHECK(c.ratio == doctest::Approx(1.477).epsilon(1e-3));
  CHECK(c.gqa_flops == 2.0 * 256 * 1024 * 1536);
  CHECK(c.cat_flops == 2.0 * 256 * 1024 * 1040);
  CHECK(projection_cost(256, 1024, 16, 16.0 / 2048.0).ratio == 1.0);
  const ProjectionCost degenerate = projection_cost(64, 32, 32, 0.5);
  CHECK(degenerate.cat_inner == 64.0);
  CHECK(degenerate.gqa_inner == degenerate.cat_inner);
  CHECK(projection_cost(1, 1024, 16, 0.25).ratio == c.ratio);
  CHECK_THROWS_AS(projection_cost(256, 1024, 16, 1.5), Error);
  CHECK_THROWS_AS(projection_cost(0, 1024, 16, 0.5), Error);

  SUBCASE("monotone in every argument") {
    const double base[] = {128, 64, 8, 0.25};
    const ProjectionCost b = projection_cost(base[0], base[1], base[2], base[3]);
    for (int arg = 0; arg < 4; ++arg) {
      double v[4] = {base[0], base[1], base[2], base[3]};
      v[arg] *= arg == 3 ? 2.0 : 1.5;
      const ProjectionCost up = projection_cost(v[0], v[1], v[2], v[3]);
      CHECK(up.gqa_flops >= b.gqa_flops);
      CHECK(up.cat_flops >= b.cat_flops);
      CHECK(up.gqa_flops + up.cat_flops > b.gqa_flops + b.cat_flops);
    }
  }
}

TEST_CASE("csv output") {
  const auto dir = std::filesystem::temp_directory_path() / "circat_test_bench";
  std::filesystem::create_directories(dir);
  write_csv({}, dir / "empty.csv");
  CHECK(slurp(dir / "empty.csv") == std::string(kCsvHeader) + "\n");
  CHECK(read_csv(dir / "empty.csv").empty());

  std::vector<BenchResult> rs;
  for (CatPath path : {CatPath::kExplicit, CatPath::kFft})
    rs.push_back(run_bench(make_case(Mechanism::kCat, path, 32, 4, 2)));
  BenchResult odd = rs[0];
  odd.time = {1234.5678901234567, 0.1, 1e-300};
  rs.push_back(odd);
  write_csv(rs, dir / "r.csv");
  const auto back = read_csv(dir / "r.csv");
  REQUIRE(back.size() == rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) {
    CHECK(back[i].bench.mechanism == rs[i].bench.mechanism);
    CHECK(back[i].bench.path == rs[i].bench.path);
    CHECK(back[i].bench.n == rs[i].bench.n);
    CHECK(back[i].bench.d == rs[i].bench.d);
    CHECK(back[i].bench.heads == rs[i].bench.heads);
    CHECK(back[i].bench.precision == rs[i].bench.precision);
    CHECK(back[i].bench.measure == rs[i].bench.measure);
    CHECK(back[i].bench.reps == rs[i].bench.reps);
    CHECK(back[i].time.mean_ns == rs[i].time.mean_ns);
    CHECK(back[i].time.median_ns == rs[i].time.median_ns);
    CHECK(back[i].time.min_ns == rs[i].time.min_ns);
    CHECK(back[i].peak_scalars == rs[i].peak_scalars);
    CHECK(back[i].attn_coeffs == rs[i].attn_coeffs);
  }
  const std::string text = slurp(dir / "r.csv");
  CHECK(text.find('\r') == std::string::npos);
  CHECK(text.substr(0, text.find('\n')) == kCsvHeader);
  CHECK_THROWS_AS(write_csv(rs, dir / "missing" / "r.csv"), Error);
}
