// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.


#include "circat/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "circat/autograd.hpp"
#include "circat/error.hpp"
#include "circat/memory.hpp"
#include "circat/rng.hpp"
#include "circat/variants.hpp"

namespace circat {

const char* const kCsvHeader =
    "mechanism,path,N,D,H,precision,measure,reps,time_mean_ns,time_median_ns,time_min_ns,"
    "peak_scalars,attn_coeffs";

std::string_view to_string(Measure m) {
  return m == Measure::kForward ? "forward" : "forward_backward";
}

Measure parse_measure(std::string_view s) {
  if (s == "forward") return Measure::kForward;
  if (s == "forward_backward") return Measure::kForwardBackward;
  fail(ErrorCode::kInvalidArgument, "unknown measure '" + std::string(s) + "'");
}

std::string_view to_string(Precision p) { return p == Precision::kFloat64 ? "float64" : "float32"; }

Precision parse_precision(std::string_view s) {
  if (s == "float64") return Precision::kFloat64;
  if (s == "float32") return Precision::kFloat32;
  fail(ErrorCode::kInvalidArgument, "unknown precision '" + std::string(s) + "'");
}

std::string_view to_string(Mechanism m) { return m == Mechanism::kCat ? "cat" : "attention"; }

Mechanism parse_mechanism(std::string_view s) {
  if (s == "cat") return Mechanism::kCat;
  if (s == "attention") return Mechanism::kAttention;
  fail(ErrorCode::kInvalidArgument, "unknown mechanism '" + std::string(s) + "'");
}

void validate(const BenchCase& c) {
  require(c.reps >= 3, ErrorCode::kInvalidArgument, "bench: reps must be >= 3");
  require(c.warmup >= 1, ErrorCode::kInvalidArgument, "bench: warmup must be >= 1");
  require(c.n >= 1 && c.heads >= 1 && c.d % c.heads == 0 && c.d >= c.heads,
          ErrorCode::kInvalidArgument, "bench: need N >= 1 and D a positive multiple of H");
  if (c.mechanism == Mechanism::kAttention) {
    require(c.path == CatPath::kExplicit, ErrorCode::kUnsupported,
            "bench: attention has no '" + std::string(to_string(c.path)) +
                "' path (only 'explicit')");
    require(c.precision == Precision::kFloat64, ErrorCode::kUnsupported,
            "bench: attention runs in float64 only");
  }
  if (c.precision == Precision::kFloat32)
    require(c.measure == Measure::kForward, ErrorCode::kUnsupported,
            "bench: float32 supports the forward measure only");
}

Timing time_body(const std::function<void()>& body, std::size_t reps, std::size_t warmup) {
  require(reps >= 1, ErrorCode::kInvalidArgument, "time_body: reps must be >= 1");
  for (std::size_t i = 0; i < warmup; ++i) body();
  std::vector<double> ns(reps);
  for (auto& t : ns) {
    const auto start = std::chrono::steady_clock::now();
    body();
    const auto stop = std::chrono::steady_clock::now();
    t = static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count());
  }
  Timing out;
  out.mean_ns = std::accumulate(ns.begin(), ns.end(), 0.0) / static_cast<double>(reps);
  std::sort(ns.begin(), ns.end());
  out.min_ns = ns.front();
  out.median_ns = reps % 2 == 1 ? ns[reps / 2] : 0.5 * (ns[reps / 2 - 1] + ns[reps / 2]);
  return out;
}

namespace {

template <class T>
void matmul_into(const CountedVector<T>& a, const CountedVector<T>& b, std::size_t m,
                 std::size_t k, std::size_t p, std::size_t b_col0, std::size_t b_stride,
                 CountedVector<T>& out) {
  out.assign(m * p, T(0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t t = 0; t < k; ++t) {
      const T av = a[i * k + t];
      const T* brow = b.data() + t * b_stride + b_col0;
      T* orow = out.data() + i * p;
      for (std::size_t j = 0; j < p; ++j) orow[j] += av * brow[j];
    }
}

// Float CAT layer built from the templated mixing kernels.
struct FloatCat {
  std::size_t n, d, heads;
  CatPath path;
  CountedVector<float> x, w_a, w_v;

  void operator()() const {
    const std::size_t dh = d / heads;
    CountedVector<float> logits, v, w(n), mixed(n * dh), out(n * d);
    matmul_into(x, w_a, n, d, heads, 0, heads, logits);
    for (std::size_t h = 0; h < heads; ++h) {
      float mx = logits[h];
      for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits[i * heads + h]);
      float s = 0.0f;
      for (std::size_t i = 0; i < n; ++i) s += (w[i] = std::exp(logits[i * heads + h] - mx));
      for (auto& e : w) e /= s;
      matmul_into(x, w_v, n, d, dh, h * dh, d, v);
      const std::span<const float> ws(w), vs(v);
      switch (path) {
        case CatPath::kExplicit:
          circulant_mix_explicit<float>(ws, vs, dh, Orientation::kColShift, mixed);
          break;
        case CatPath::kGather:
          circulant_mix_gather<float>(ws, vs, dh, Orientation::kColShift, mixed);
          break;
        case CatPath::kFft:
          circulant_mix_fft<float>(ws, vs, dh, Orientation::kColShift, mixed);
          break;
      }
      for (std::size_t i = 0; i < n; ++i)
        std::copy_n(mixed.data() + i * dh, dh, out.data() + i * d + h * dh);
    }
  }
};

CountedVector<float> to_float(const Tensor& t) {
  CountedVector<float> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = static_cast<float>(t[i]);
  return out;
}

}  // namespace

BenchResult run_bench(const BenchCase& c) {
  validate(c);
  Rng rng(c.seed);
  const double sd = 1.0 / std::sqrt(static_cast<double>(c.d));
  const Tensor x = Tensor::normal(Shape{c.n, c.d}, rng);
  std::function<void()> body;
  if (c.mechanism == Mechanism::kCat) {
    const CatParams p{Tensor::normal(Shape{c.d, c.heads}, rng, sd),
                      Tensor::normal(Shape{c.d, c.d}, rng, sd)};
    const CatOptions o{c.path};
    if (c.precision == Precision::kFloat32) {
      auto f = std::make_shared<FloatCat>(
          FloatCat{c.n, c.d, c.heads, c.path, to_float(x), to_float(p.w_a), to_float(p.w_v)});
      body = [f] { (*f)(); };
    } else if (c.measure == Measure::kForward) {
      body = [=] { multihead_cat_forward(x, p, c.heads, o); };
    } else {
      body = [=] {
        Tape tape;
        const Var xv = tape.leaf(x);
        const CatParamsT<Var> pv{tape.leaf(p.w_a), tape.leaf(p.w_v)};
        tape.backward(sum(multihead_cat(xv, pv, c.heads, o)));
      };
    }
  } else {
    const AttentionParams p{Tensor::normal(Shape{c.d, c.d}, rng, sd),
                            Tensor::normal(Shape{c.d, c.d}, rng, sd),
                            Tensor::normal(Shape{c.d, c.d}, rng, sd)};
    if (c.measure == Measure::kForward) {
      body = [=] { standard_attention_forward(x, p, c.heads, false); };
    } else {
      body = [=] {
        Tape tape;
        const Var xv = tape.leaf(x);
        const AttentionParamsT<Var> pv{tape.leaf(p.w_q), tape.leaf(p.w_k), tape.leaf(p.w_v)};
        tape.backward(sum(standard_attention(xv, pv, c.heads, false)));
      };
    }
  }
  BenchResult r;
  r.bench = c;
  r.time = time_body(body, c.reps, c.warmup);
  {
    HighWaterScope scope;
    body();
    r.peak_scalars = scope.transient_peak();
  }
  r.attn_coeffs = count_attention_coefficients(c.n, c.heads, c.mechanism);
  return r;
}

std::vector<ScalingRatio> scaling_ratios(std::span<const BenchResult> results) {
  std::vector<ScalingRatio> out;
  for (std::size_t i = 1; i < results.size(); ++i)
    out.push_back({results[i - 1].bench.n, results[i].bench.n,
                   results[i].time.median_ns / results[i - 1].time.median_ns});
  return out;
}

Sweep scaling_sweep(const BenchCase& base, std::span<const std::size_t> n_list) {
  for (std::size_t i = 1; i < n_list.size(); ++i)
    require(n_list[i] > n_list[i - 1], ErrorCode::kInvalidArgument,
            "scaling_sweep: N list must be strictly ascending");
  Sweep s;
  for (std::size_t n : n_list) {
    BenchCase c = base;
    c.n = n;
    s.results.push_back(run_bench(c));
  }
  s.ratios = scaling_ratios(s.results);
  return s;
}

ProjectionCost projection_cost(double n, double d, double heads, double k) {
  require(n > 0 && d > 0 && heads > 0 && k > 0 && k <= 1, ErrorCode::kInvalidArgument,
          "projection_cost: need positive N, D, H and 0 < K <= 1");
  ProjectionCost c;
  c.gqa_inner = d + 2.0 * d * k;
  c.cat_inner = d + heads;
  c.gqa_flops = 2.0 * n * d * c.gqa_inner;
  c.cat_flops = 2.0 * n * d * c.cat_inner;
  c.ratio = c.gqa_inner / c.cat_inner;
  return c;
}

namespace {

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_field(const std::string& s, const std::string& what) {
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  require(r.ec == std::errc() && r.ptr == s.data() + s.size(), ErrorCode::kInvalidArgument,
          "read_csv: bad " + what + " '" + s + "'");
  return v;
}

}  // namespace

void write_csv(std::span<const BenchResult> results, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::kIo, "write_csv: cannot open " + path.string());
  out << kCsvHeader << '\n';
  for (const BenchResult& r : results) {
    const BenchCase& c = r.bench;
    out << to_string(c.mechanism) << ',' << to_string(c.path) << ',' << c.n << ',' << c.d << ','
        << c.heads << ',' << to_string(c.precision) << ',' << to_string(c.measure) << ','
        << c.reps << ',' << num(r.time.mean_ns) << ',' << num(r.time.median_ns) << ','
        << num(r.time.min_ns) << ',' << r.peak_scalars << ',' << r.attn_coeffs << '\n';
  }
  out.flush();
  require(out.good(), ErrorCode::kIo, "write_csv: write failed for " + path.string());
}

std::vector<BenchResult> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kIo, "read_csv: cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  require(line == kCsvHeader, ErrorCode::kInvalidArgument,
          "read_csv: unexpected header in " + path.string());
  std::vector<BenchResult> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    require(f.size() == 13, ErrorCode::kInvalidArgument, "read_csv: expected 13 fields: " + line);
    BenchResult r;
    r.bench.mechanism = parse_mechanism(f[0]);
    r.bench.path = parse_cat_path(f[1]);
    r.bench.n = parse_field<std::size_t>(f[2], "N");
    r.bench.d = parse_field<std::size_t>(f[3], "D");
    r.bench.heads = parse_field<std::size_t>(f[4], "H");
    r.bench.precision = parse_precision(f[5]);
    r.bench.measure = parse_measure(f[6]);
    r.bench.reps = parse_field<std::size_t>(f[7], "reps");
    r.time.mean_ns = parse_field<double>(f[8], "time_mean_ns");
    r.time.median_ns = parse_field<double>(f[9], "time_median_ns");
    r.time.min_ns = parse_field<double>(f[10], "time_min_ns");
    r.peak_scalars = parse_field<std::int64_t>(f[11], "peak_scalars");
    r.attn_coeffs = parse_field<std::size_t>(f[12], "attn_coeffs");
    out.push_back(r);
  }
  return out;
}

}  // namespace circat
