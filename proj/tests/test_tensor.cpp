// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include <cmath>
#include <limits>

#include "circat/autograd.hpp"
#include "circat/rng.hpp"
#include "circat/tensor.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace circat;

TEST_CASE("rng streams are fixed by the seed") {
  Rng a(7), b(7), c(8);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(Rng(7).next_u64() != c.next_u64());
  // Pinned first output: SplitMix64(0) seeding + xoshiro256**.
  Rng zero(0);
  CHECK(zero.next_u64() == 0x99ec5f36cb75f2b4ULL);
  Rng u(3);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    CHECK((x >= 0.0 && x < 1.0));
  }
  Rng k(5);
  for (int i = 0; i < 1000; ++i) CHECK(k.below(7) < 7);
}

TEST_CASE("shape invariants") {
  CHECK(Shape{2, 3}.numel() == 6);
  CHECK(Shape{4}.cols() == 1);
  CHECK_THROWS_AS(Shape({2, 0}), Error);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1.0, 2.0}), Error);
}

TEST_CASE("matmul") {
  const Tensor b = oracle::random_matrix(3, 4, 1);
  CHECK(max_abs_diff(matmul(Tensor::identity(3), b), b) == 0.0);

  const Tensor r = matmul(Tensor::from_rows({{1, 2}, {3, 4}}), Tensor::from_rows({{1}, {1}}));
  CHECK(r(0, 0) == 3.0);
  CHECK(r(1, 0) == 7.0);

  const Tensor x = oracle::random_matrix(4, 5, 2), y = oracle::random_matrix(5, 2, 3);
  CHECK(max_rel_diff(matmul(x, y), oracle::matmul(x, y)) <= 1e-12);

  CHECK_THROWS_AS(matmul(x, x), Error);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(matmul(Tensor::from_rows({{inf}}), Tensor::from_rows({{1}})), Error);
}

TEST_CASE("matmul associativity on random triples") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor a = oracle::random_matrix(3, 5, seed), b = oracle::random_matrix(5, 4, seed + 100),
                 c = oracle::random_matrix(4, 2, seed + 200);
    CHECK(max_rel_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) <= 1e-10);
  }
}

TEST_CASE("softmax_rows") {
  const Tensor u = softmax_rows(Tensor::from_rows({{0, 0, 0}, {1000, 1000, 1000}}));
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(u(0, j) == doctest::Approx(1.0 / 3).epsilon(1e-15));
    CHECK(u(1, j) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  }
  const Tensor p = softmax_rows(Tensor::from_rows({{0, std::log(2.0)}}));
  CHECK(std::abs(p(0, 0) - 1.0 / 3) <= 1e-15);
  CHECK(std::abs(p(0, 1) - 2.0 / 3) <= 1e-15);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(softmax_rows(Tensor::from_rows({{nan, 0}})), Error);
}

TEST_CASE("softmax rows are positive, normalised and shift invariant") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor a = oracle::random_matrix(5, 9, seed, 30.0);
    const Tensor s = softmax_rows(a);
    Rng rng(seed);
    std::vector<double> shifted = a.to_vector();
    for (std::size_t i = 0; i < 5; ++i) {
      double total = 0;
      for (std::size_t j = 0; j < 9; ++j) {
        CHECK(s(i, j) > 0.0);
        total += s(i, j);
      }
      CHECK(std::abs(total - 1.0) <= 1e-12);
      const double c = rng.uniform(-50, 50);
      for (std::size_t j = 0; j < 9; ++j) shifted[i * 9 + j] += c;
    }
    CHECK(max_abs_diff(softmax_rows(Tensor(a.shape(), shifted)), s) <= 1e-12);
  }
}

TEST_CASE("mean_rows") {
  const Tensor one = Tensor::from_rows({{1, 2, 3}});
  CHECK(max_abs_diff(mean_rows(one), one) == 0.0);
  const Tensor m = mean_rows(Tensor::from_rows({{1, 3}, {3, 5}}));
  CHECK(m(0, 0) == 2.0);
  CHECK(m(0, 1) == 4.0);
  const Tensor r = oracle::random_matrix(7, 3, 4);
  std::vector<double> acc(3, 0.0);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 3; ++j) acc[j] += r(i, j);
  for (double& x : acc) x /= 7;
  CHECK(max_rel_diff(mean_rows(r), Tensor(Shape{1, 3}, acc)) <= 1e-12);
}

TEST_CASE("roll_rows") {
  const Tensor a = Tensor::from_rows({{1, 10}, {2, 20}, {3, 30}});
  CHECK(max_abs_diff(roll_rows(a, 0), a) == 0.0);
  CHECK(max_abs_diff(roll_rows(a, 3), a) == 0.0);
  const Tensor r = roll_rows(a, 1);
  CHECK(r(0, 0) == 3.0);
  CHECK(r(1, 0) == 1.0);
  CHECK(r(2, 0) == 2.0);
  CHECK(max_abs_diff(roll_rows(a, -1), roll_rows(a, 2)) == 0.0);
  for (long long s = -7; s <= 7; ++s) {
    const Tensor x = oracle::random_matrix(5, 2, 9);
    CHECK(max_abs_diff(roll_rows(roll_rows(x, s), -s), x) == 0.0);
  }
}

TEST_CASE("backward examples") {
  SUBCASE("sum gives ones") {
    Tape tape;
    Var x = tape.leaf(oracle::random_matrix(3, 4, 1));
    tape.backward(sum(x));
    const Tensor g_x = tape.grad(x);
    for (double g : g_x.data()) CHECK(g == 1.0);
  }
  SUBCASE("sum of softmax is constant") {
    Tape tape;
    Var x = tape.leaf(oracle::random_matrix(3, 4, 2));
    tape.backward(sum(softmax_rows(x)));
    const Tensor g_x = tape.grad(x);
    for (double g : g_x.data()) CHECK(std::abs(g) <= 1e-15);
  }
  SUBCASE("untouched leaves get zeros, non-scalar loss rejected") {
    Tape tape;
    Var x = tape.leaf(oracle::random_matrix(2, 2, 3));
    Var unused = tape.leaf(oracle::random_matrix(2, 2, 4));
    CHECK_THROWS_AS(tape.backward(x), Error);
    tape.backward(sum(x));
    const Tensor g_u = tape.grad(unused);
    for (double g : g_u.data()) CHECK(g == 0.0);
  }
  SUBCASE("quadratic matmul loss matches finite differences") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const Tensor at[] = {oracle::random_matrix(3, 4, seed), oracle::random_matrix(4, 2, seed + 9)};
      const auto report = finite_diff_check(
          [](Tape&, std::span<const Var> v) {
            Var y = matmul(v[0], v[1]);
            return scale(mul(y, y), 0.5);
          },
          at, 1e-5, 1e-6);
      CHECK_MESSAGE(report.passed, report.max_rel_error);
    }
  }
}

TEST_CASE("finite_diff_check") {
  const Tensor x = oracle::random_matrix(3, 5, 11);
  const auto id = finite_diff_check([](Var v) { return v; }, x, 1e-5, 1e-10);
  CHECK(id.passed);

  const auto sm = finite_diff_check([](Var v) { return softmax_rows(v); }, x, 1e-5, 1e-6);
  CHECK(sm.passed);

  int calls = 0;
  CHECK_THROWS_AS(finite_diff_check(
                      [&calls](Var v) { return scale(v, 1.0 + 1e-3 * (calls++ % 2)); }, x,
                      1e-5, 1e-6),
                  Error);
  CHECK_THROWS_AS(finite_diff_check([](Var v) { return v; }, x, 0.0, 1e-6), Error);
}

TEST_CASE("every primitive backward rule passes finite differences on 5 seeds") {
  using Fn = std::function<Var(Tape&, std::span<const Var>)>;
  struct Case {
    const char* name;
    std::vector<Shape> shapes;
    Fn fn;
  };
  const std::vector<std::size_t> rows = {0, 2, 3};
  const std::vector<std::size_t> labels = {1, 0, 3};
  const std::vector<std::size_t> idx = {2, 0, 2, 1};
  const std::vector<Case> cases = {
      {"matmul", {Shape{3, 4}, Shape{4, 2}}, [](Tape&, auto v) { return matmul(v[0], v[1]); }},
      {"add", {Shape{3, 2}, Shape{3, 2}}, [](Tape&, auto v) { return mul(add(v[0], v[1]), v[0]); }},
      {"sub", {Shape{3, 2}, Shape{3, 2}}, [](Tape&, auto v) { return mul(sub(v[0], v[1]), v[1]); }},
      {"mul", {Shape{3, 2}, Shape{3, 2}}, [](Tape&, auto v) { return mul(v[0], v[1]); }},
      {"scale", {Shape{2, 2}}, [](Tape&, auto v) { return mul(scale(v[0], -1.7), v[0]); }},
      {"add_row", {Shape{3, 4}, Shape{1, 4}},
       [](Tape&, auto v) { return softmax_rows(add_row(v[0], v[1])); }},
      {"softmax", {Shape{3, 5}, Shape{3, 5}},
       [](Tape&, auto v) { return mul(softmax_rows(v[0]), v[1]); }},
      {"softmax_causal", {Shape{4, 4}, Shape{4, 4}},
       [](Tape&, auto v) { return mul(softmax_rows(v[0], true), v[1]); }},
      {"mean_rows", {Shape{4, 3}, Shape{1, 3}}, [](Tape&, auto v) { return mul(mean_rows(v[0]), v[1]); }},
      {"roll_rows", {Shape{5, 2}, Shape{5, 2}},
       [](Tape&, auto v) { return mul(roll_rows(v[0], 2), v[1]); }},
      {"transpose", {Shape{2, 3}, Shape{3, 2}},
       [](Tape&, auto v) { return mul(transpose(v[0]), v[1]); }},
      {"slice_concat", {Shape{3, 4}, Shape{3, 4}},
       [](Tape&, auto v) {
         const Var parts[] = {slice_cols(v[0], 2, 2), slice_cols(v[0], 0, 1)};
         return mul(concat_cols(parts), slice_cols(v[1], 1, 3));
       }},
      {"gather_rows", {Shape{3, 2}, Shape{4, 2}},
       [idx](Tape&, auto v) { return mul(gather_rows(v[0], idx), v[1]); }},
      {"gelu", {Shape{3, 3}}, [](Tape&, auto v) { return gelu(scale(v[0], 2.0)); }},
      {"layer_norm", {Shape{3, 5}, Shape{1, 5}, Shape{1, 5}, Shape{3, 5}},
       [](Tape&, auto v) { return mul(layer_norm(v[0], v[1], v[2]), v[3]); }},
      {"cross_entropy", {Shape{4, 5}},
       [rows, labels](Tape&, auto v) { return cross_entropy_sum(v[0], rows, labels); }},
  };
  for (const Case& c : cases) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      std::vector<Tensor> at;
      for (std::size_t k = 0; k < c.shapes.size(); ++k)
        at.push_back(oracle::random_matrix(c.shapes[k].rows(), c.shapes[k].cols(),
                                           seed * 31 + k));
      const auto report = finite_diff_check(c.fn, at, 1e-5, 1e-6);
      CHECK_MESSAGE(report.passed, c.name << " seed " << seed << " err " << report.max_rel_error);
    }
  }
}

TEST_CASE("scalar accounting tracks tensor storage") {
  const auto before = scalar_counter().current;
  {
    HighWaterScope scope;
    const Tensor t = Tensor::zeros(Shape{10, 10});
    CHECK(scalar_counter().current - before == 100);
    CHECK(scope.transient_peak() == 100);
  }
  CHECK(scalar_counter().current == before);
}
