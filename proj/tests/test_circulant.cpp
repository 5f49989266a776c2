// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include <cmath>
#include <vector>

#include "circat/circulant.hpp"
#include "circat/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace circat;

namespace {

constexpr Orientation kBoth[] = {Orientation::kRowShift, Orientation::kColShift};
constexpr CatPath kPaths[] = {CatPath::kExplicit, CatPath::kGather, CatPath::kFft};

Tensor softmax_column(const Tensor& z) {
  return Tensor::column(oracle::softmax(z.to_vector()));
}

// Column-by-column loop oracle for circulant mixing.
Tensor oracle_mix(const Tensor& w, Orientation o, const Tensor& v) {
  const std::size_t n = v.rows(), d = v.cols();
  std::vector<double> out(n * d);
  for (std::size_t c = 0; c < d; ++c) {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = v(i, c);
    const auto r = o == Orientation::kRowShift ? oracle::correlate(w.to_vector(), col)
                                               : oracle::convolve(w.to_vector(), col);
    for (std::size_t i = 0; i < n; ++i) out[i * d + c] = r[i];
  }
  return Tensor(Shape{n, d}, out);
}

}  // namespace

TEST_CASE("build_kernel") {
  const Tensor same = Tensor::from_rows({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}, {1, 2, 3}});
  const Tensor w_a = oracle::random_matrix(3, 1, 1);
  const CirculantKernel k_same = build_kernel(same, w_a);
  for (double x : k_same.weights().data()) CHECK(std::abs(x - 0.25) <= 1e-15);
  const Tensor x = oracle::random_matrix(4, 3, 2);
  const CirculantKernel k_zero = build_kernel(x, Tensor::zeros(Shape{3, 1}));
  for (double v : k_zero.weights().data())
    CHECK(std::abs(v - 0.25) <= 1e-15);

  const Tensor want = softmax_column(oracle::matmul(x, w_a));
  CHECK(max_rel_diff(build_kernel(x, w_a).weights(), want) <= 1e-12);

  CHECK_THROWS_AS(build_kernel(x, Tensor::zeros(Shape{4, 1})), Error);
  CHECK_THROWS_AS(CirculantKernel(Tensor::column(std::vector<double>{0.5, 0.6}),
                                  Orientation::kColShift),
                  Error);
  CHECK_THROWS_AS(CirculantKernel(Tensor::column(std::vector<double>{1.5, -0.5}),
                                  Orientation::kColShift),
                  Error);
}

TEST_CASE("materialize_circulant") {
  const Tensor w = Tensor::column(std::vector<double>{1, 2, 3});
  const Tensor row = materialize_circulant(w, Orientation::kRowShift);
  const Tensor col = materialize_circulant(w, Orientation::kColShift);
  CHECK(max_abs_diff(row, Tensor::from_rows({{1, 2, 3}, {3, 1, 2}, {2, 3, 1}})) == 0.0);
  CHECK(max_abs_diff(col, Tensor::from_rows({{1, 3, 2}, {2, 1, 3}, {3, 2, 1}})) == 0.0);
  const Tensor delta = Tensor::column(std::vector<double>{1, 0, 0, 0});
  for (Orientation o : kBoth)
    CHECK(max_abs_diff(materialize_circulant(delta, o), Tensor::identity(4)) == 0.0);
}

TEST_CASE("cat_forward_explicit") {
  const Tensor v = oracle::random_matrix(5, 3, 3);
  const CirculantKernel delta(Tensor::column(std::vector<double>{1, 0, 0, 0, 0}),
                              Orientation::kColShift);
  CHECK(max_abs_diff(cat_forward_explicit(delta, v), v) == 0.0);

  const CirculantKernel uniform(Tensor::full(Shape{5, 1}, 0.2), Orientation::kRowShift);
  const Tensor mixed = cat_forward_explicit(uniform, v);
  const Tensor mean = mean_rows(v);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(mixed(i, c) - mean(0, c)) <= 1e-14);

  const Tensor w = Tensor::column(std::vector<double>{1, 2, 3});
  const Tensor vals = Tensor::from_rows({{10}, {20}, {30}});
  const Tensor out = cat_forward_explicit(w, Orientation::kRowShift, vals);
  CHECK(out(0, 0) == 140.0);
  CHECK(out(1, 0) == 110.0);
  CHECK(out(2, 0) == 110.0);
  const Tensor out_col = cat_forward_explicit(w, Orientation::kColShift, vals);
  CHECK(max_abs_diff(out_col, oracle_mix(w, Orientation::kColShift, vals)) == 0.0);

  CHECK_THROWS_AS(cat_forward_explicit(w, Orientation::kRowShift, v), Error);
}

TEST_CASE("cat_forward_gather") {
  const Tensor w = softmax_column(oracle::random_matrix(7, 1, 4));
  for (Orientation o : kBoth) {
    const Tensor zero = cat_forward_gather(w, o, Tensor::zeros(Shape{7, 3}));
    for (double x : zero.data()) CHECK(x == 0.0);

    const Tensor v = oracle::random_matrix(7, 3, 5);
    for (long long s = 0; s < 7; ++s) {
      std::vector<double> d(7, 0.0);
      d[s] = 1.0;
      const Tensor shifted = cat_forward_gather(Tensor::column(d), o, v);
      const long long dir = o == Orientation::kColShift ? s : -s;
      CHECK(max_abs_diff(shifted, roll_rows(v, dir)) == 0.0);
    }
    CHECK(max_rel_diff(cat_forward_gather(w, o, v), cat_forward_explicit(w, o, v)) <= 1e-12);
    CHECK(max_rel_diff(cat_forward_gather(w, o, v), oracle_mix(w, o, v)) <= 1e-12);
  }
}

TEST_CASE("cat_forward_fft") {
  for (Orientation o : kBoth) {
    const Tensor v = oracle::random_matrix(6, 2, 6);
    std::vector<double> d(6, 0.0);
    d[0] = 1.0;
    CHECK(max_abs_diff(cat_forward_fft(Tensor::column(d), o, v), v) <= 1e-15);

    const Tensor w196 = softmax_column(oracle::random_matrix(196, 1, 7, 3.0));
    const Tensor v196 = oracle::random_matrix(196, 4, 8);
    CHECK(max_rel_diff(cat_forward_fft(w196, o, v196), cat_forward_explicit(w196, o, v196)) <=
          1e-8);
  }
  // At N = 2 correlation and convolution coincide.
  const Tensor w2 = Tensor::column(std::vector<double>{0.3, 0.7});
  const Tensor v2 = oracle::random_matrix(2, 3, 9);
  const Tensor row = cat_forward_fft(w2, Orientation::kRowShift, v2);
  const Tensor col = cat_forward_fft(w2, Orientation::kColShift, v2);
  CHECK(max_abs_diff(row, col) == 0.0);
  CHECK(max_rel_diff(row, cat_forward_explicit(w2, Orientation::kRowShift, v2)) <= 1e-15);
  CHECK(max_abs_diff(cat_forward_explicit(w2, Orientation::kRowShift, v2),
                     cat_forward_explicit(w2, Orientation::kColShift, v2)) == 0.0);
}

TEST_CASE("cat_forward_causal") {
  for (Orientation o : kBoth) {
    const Tensor z = oracle::random_matrix(6, 1, 10, 2.0);
    const CirculantKernel k(softmax_column(z), o);
    const Tensor v = oracle::random_matrix(6, 3, 11);
    const Tensor y = cat_forward_causal(k, v);
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(y(0, c) - v(0, c)) <= 1e-15);

    const CirculantKernel uniform(Tensor::full(Shape{6, 1}, 1.0 / 6), o);
    const Tensor prefix = cat_forward_causal(uniform, v);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t c = 0; c < 3; ++c) {
        double m = 0;
        for (std::size_t j = 0; j <= i; ++j) m += v(j, c);
        CHECK(std::abs(prefix(i, c) - m / (i + 1)) <= 1e-14);
      }

    std::vector<double> pv = v.to_vector();
    for (std::size_t c = 0; c < 3; ++c) pv[5 * 3 + c] += 100.0;
    const Tensor yp = cat_forward_causal(k, Tensor(v.shape(), pv));
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t c = 0; c < 3; ++c) CHECK(yp(i, c) == y(i, c));

    // Renormalising weights equals a restricted softmax over the logits.
    CHECK(max_rel_diff(cat_forward_causal_logits(z, o, v), y) <= 1e-12);
  }
}

TEST_CASE("multihead_cat_forward") {
  const std::size_t n = 16, d = 8;
  const Tensor x = oracle::random_matrix(n, d, 20);
  SUBCASE("one head is single-head CAT") {
    const CatParams p{oracle::random_matrix(d, 1, 21), oracle::random_matrix(d, d, 22)};
    for (Orientation o : kBoth) {
      const Tensor got = multihead_cat_forward(x, p, 1, {CatPath::kExplicit, o});
      const CirculantKernel k = build_kernel(x, p.w_a, o);
      CHECK(max_rel_diff(got, cat_forward_explicit(k, matmul(x, p.w_v))) <= 1e-12);
    }
  }
  SUBCASE("zeroed second head yields constant columns") {
    std::vector<double> wa = oracle::random_matrix(d, 2, 23).to_vector();
    std::vector<double> wv = oracle::random_matrix(d, d, 24).to_vector();
    for (std::size_t r = 0; r < d; ++r) wa[r * 2 + 1] = 0.0;
    const CatParams p{Tensor(Shape{d, 2}, wa), Tensor(Shape{d, d}, wv)};
    const Tensor y = multihead_cat_forward(x, p, 2, {});
    const Tensor v_mean = mean_rows(matmul(x, p.w_v));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = d / 2; c < d; ++c) CHECK(std::abs(y(i, c) - v_mean(0, c)) <= 1e-12);
  }
  SUBCASE("paths agree") {
    const CatParams p{oracle::random_matrix(d, 2, 25, 2.0), oracle::random_matrix(d, d, 26)};
    for (Orientation o : kBoth) {
      const Tensor e = multihead_cat_forward(x, p, 2, {CatPath::kExplicit, o});
      const Tensor g = multihead_cat_forward(x, p, 2, {CatPath::kGather, o});
      const Tensor f = multihead_cat_forward(x, p, 2, {CatPath::kFft, o});
      CHECK(max_rel_diff(g, e) <= 1e-8);
      CHECK(max_rel_diff(f, e) <= 1e-8);
      CHECK(max_rel_diff(f, g) <= 1e-8);
    }
  }
  SUBCASE("bad head count") {
    const CatParams p{oracle::random_matrix(d, 3, 1), oracle::random_matrix(d, d, 2)};
    CHECK_THROWS_AS(multihead_cat_forward(x, p, 3, {}), Error);
  }
}

TEST_CASE("count_attention_coefficients") {
  CHECK(count_attention_coefficients(196, 12, Mechanism::kAttention) == 460992);
  CHECK(count_attention_coefficients(196, 12, Mechanism::kCat) == 2352);
  CHECK(count_attention_coefficients(1, 5, Mechanism::kAttention) == 5);
  CHECK(count_attention_coefficients(1, 5, Mechanism::kCat) == 5);
}

TEST_CASE("row stochasticity and softmax-circulant commutation") {
  for (std::size_t n : {1u, 2u, 3u, 5u, 8u, 196u, 256u}) {
    const Tensor z = oracle::random_matrix(n, 1, n, 4.0);
    for (Orientation o : kBoth) {
      const Tensor m = materialize_circulant(softmax_column(z), o);
      for (std::size_t i = 0; i < n; ++i) {
        double total = 0;
        for (std::size_t j = 0; j < n; ++j) total += m(i, j);
        CHECK(std::abs(total - 1.0) <= 1e-10);
      }
      CHECK(max_abs_diff(softmax_rows(materialize_circulant(z, o)), m) <= 1e-10);
    }
  }
}

TEST_CASE("path equivalence grid") {
  for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 12u, 16u, 100u, 196u, 256u, 257u})
    for (std::size_t dh : {1u, 4u})
      for (Orientation o : kBoth) {
        const Tensor w = softmax_column(oracle::random_matrix(n, 1, n * 7 + dh, 3.0));
        const Tensor v = oracle::random_matrix(n, dh, n * 11 + dh);
        const Tensor e = cat_forward_explicit(w, o, v);
        CHECK(max_rel_diff(cat_forward_gather(w, o, v), e) <= 1e-8);
        CHECK(max_rel_diff(cat_forward_fft(w, o, v), e) <= 1e-8);
      }
}

TEST_CASE("cyclic shift behaviour") {
  for (std::size_t n : {3u, 5u, 8u, 13u}) {
    const Tensor z = oracle::random_matrix(n, 1, n, 2.0);
    const Tensor v = oracle::random_matrix(n, 3, n + 1);
    for (long long s = -3; s <= 3; ++s) {
      const Tensor zs = roll_rows(z, s), vs = roll_rows(v, s);
      const Tensor base_row = cat_forward_explicit(softmax_column(z), Orientation::kRowShift, v);
      const Tensor moved_row = cat_forward_explicit(softmax_column(zs), Orientation::kRowShift, vs);
      CHECK(max_abs_diff(moved_row, base_row) <= 1e-10);
      const Tensor base_col = cat_forward_explicit(softmax_column(z), Orientation::kColShift, v);
      const Tensor moved_col = cat_forward_explicit(softmax_column(zs), Orientation::kColShift, vs);
      CHECK(max_abs_diff(moved_col, roll_rows(base_col, 2 * s)) <= 1e-10);
    }
  }
}

TEST_CASE("causal independence from later positions") {
  const std::size_t n = 7, d = 4;
  const CatParams p{oracle::random_matrix(d, 2, 1, 2.0), oracle::random_matrix(d, d, 2)};
  const Tensor x = oracle::random_matrix(n, d, 3);
  CatOptions opt;
  opt.causal = true;
  opt.orientation = Orientation::kColShift;
  const Tensor y = multihead_cat_forward(x, p, 2, opt);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    std::vector<double> px = x.to_vector();
    Rng rng(i);
    for (std::size_t r = i + 1; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) px[r * d + c] += rng.uniform(-5, 5);
    const Tensor yp = multihead_cat_forward(Tensor(x.shape(), px), p, 2, opt);
    for (std::size_t r = 0; r <= i; ++r)
      for (std::size_t c = 0; c < d; ++c) CHECK(yp(r, c) == y(r, c));
  }
}

TEST_CASE("multihead CAT gradients pass finite differences") {
  for (std::uint64_t seed = 0; seed < 3; ++seed)
    for (CatPath path : kPaths)
      for (Orientation o : kBoth)
        for (bool causal : {false, true}) {
          const std::size_t n = 6 + seed, d = 8 - 2 * seed % 4, h = 2;
          const Tensor at[] = {oracle::random_matrix(n, d, seed), oracle::random_matrix(d, h, seed + 1),
                               oracle::random_matrix(d, d, seed + 2)};
          CatOptions opt{path, o, causal};
          const auto report = finite_diff_check(
              [&](Tape&, std::span<const Var> v) {
                return multihead_cat(v[0], CatParamsT<Var>{v[1], v[2]}, h, opt);
              },
              at, 1e-5, 1e-4);
          CHECK_MESSAGE(report.passed, "path " << to_string(path) << " err "
                                                << report.max_rel_error);
        }
}

TEST_CASE("fft path never allocates an N x N block") {
  const std::size_t n = 256;
  const Tensor w = softmax_column(oracle::random_matrix(n, 1, 1));
  const Tensor v = oracle::random_matrix(n, 4, 2);
  (void)cached_fft_plan<double>(n);
  for (CatPath path : {CatPath::kGather, CatPath::kFft}) {
    HighWaterScope scope;
    (void)cat_forward(w, Orientation::kColShift, v, path);
    CHECK(scope.largest_block() < static_cast<std::int64_t>(n * n));
    CHECK(scope.transient_peak() < static_cast<std::int64_t>(10 * n * 4));
  }
  HighWaterScope scope;
  (void)cat_forward_explicit(w, Orientation::kColShift, v);
  CHECK(scope.largest_block() >= static_cast<std::int64_t>(n * n));
}
