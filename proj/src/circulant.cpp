// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include "circat/circulant.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

namespace circat {
namespace {

std::size_t circulant_index(std::size_t i, std::size_t j, std::size_t n, Orientation o) {
  return o == Orientation::kRowShift ? (j + n - i) % n : (i + n - j) % n;
}

Orientation flipped(Orientation o) {
  return o == Orientation::kRowShift ? Orientation::kColShift : Orientation::kRowShift;
}

void require_vector(const Tensor& w, const char* what) {
  require(w.cols() == 1 && w.shape().rank() <= 2, ErrorCode::kShapeMismatch,
          std::string(what) + ": kernel must be N x 1, got " + w.shape().to_string());
}

void require_conforming(const Tensor& w, const Tensor& v, const char* what) {
  require_vector(w, what);
  require(v.shape().rank() <= 2 && v.rows() == w.size(), ErrorCode::kShapeMismatch,
          std::string(what) + ": kernel length " + std::to_string(w.size()) +
              " does not match value rows " + v.shape().to_string());
}

template <class T>
void fft_columns(std::span<const T> v, std::size_t cols, std::size_t c, ComplexVector<T>& buf) {
  const std::size_t n = buf.size();
  for (std::size_t i = 0; i < n; ++i) buf[i] = std::complex<T>(v[i * cols + c], T(0));
}

}  // namespace

std::string_view to_string(Orientation o) {
  return o == Orientation::kRowShift ? "row_shift" : "col_shift";
}

std::string_view to_string(CatPath p) {
  switch (p) {
    case CatPath::kExplicit: return "explicit";
    case CatPath::kGather: return "gather";
    case CatPath::kFft: return "fft";
  }
  return "unknown";
}

Orientation parse_orientation(std::string_view s) {
  if (s == "row_shift" || s == "row") return Orientation::kRowShift;
  if (s == "col_shift" || s == "col") return Orientation::kColShift;
  fail(ErrorCode::kInvalidArgument, "unknown orientation '" + std::string(s) + "'");
}

CatPath parse_cat_path(std::string_view s) {
  if (s == "explicit") return CatPath::kExplicit;
  if (s == "gather") return CatPath::kGather;
  if (s == "fft") return CatPath::kFft;
  fail(ErrorCode::kInvalidArgument, "unknown execution path '" + std::string(s) + "'");
}

CirculantKernel::CirculantKernel(Tensor weights, Orientation orientation)
    : weights_(reshape(weights, Shape{weights.size(), 1})), orientation_(orientation) {
  double total = 0.0;
  for (double x : weights_.data()) {
    require(std::isfinite(x) && x >= 0.0, ErrorCode::kInvalidArgument,
            "CirculantKernel: weights must be finite and nonnegative");
    total += x;
  }
  require(std::abs(total - 1.0) <= 1e-10, ErrorCode::kInvalidArgument,
          "CirculantKernel: weights must sum to 1");
}

CirculantKernel build_kernel(const Tensor& x, const Tensor& w_a, Orientation orientation) {
  require(w_a.cols() == 1 && w_a.rows() == x.cols(), ErrorCode::kShapeMismatch,
          "build_kernel: w_a must be D x 1 with D = " + std::to_string(x.cols()));
  const Tensor z = matmul(x, w_a);
  const Tensor row = softmax_rows(reshape(z, Shape{1, z.size()}));
  return CirculantKernel(reshape(row, Shape{row.size(), 1}), orientation);
}

Tensor materialize_circulant(const Tensor& w, Orientation orientation) {
  require_vector(w, "materialize_circulant");
  const std::size_t n = w.size();
  Buffer out(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = w[circulant_index(i, j, n, orientation)];
  return Tensor(Shape{n, n}, std::move(out));
}

Tensor materialize_circulant(const CirculantKernel& k) {
  return materialize_circulant(k.weights(), k.orientation());
}

template <class T>
const FftPlan<T>& cached_fft_plan(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<FftPlan<T>>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<FftPlan<T>>(n);
  return *slot;
}

template const FftPlan<double>& cached_fft_plan<double>(std::size_t);
template const FftPlan<float>& cached_fft_plan<float>(std::size_t);

template <class T>
void circulant_mix_explicit(std::span<const T> w, std::span<const T> v, std::size_t cols,
                            Orientation orientation, std::span<T> out) {
  const std::size_t n = w.size();
  CountedVector<T> m(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m[i * n + j] = w[circulant_index(i, j, n, orientation)];
  std::fill(out.begin(), out.end(), T(0));
  for (std::size_t i = 0; i < n; ++i) {
    T* orow = out.data() + i * cols;
    for (std::size_t j = 0; j < n; ++j) {
      const T a = m[i * n + j];
      const T* vrow = v.data() + j * cols;
      for (std::size_t c = 0; c < cols; ++c) orow[c] += a * vrow[c];
    }
  }
}

template <class T>
void circulant_mix_gather(std::span<const T> w, std::span<const T> v, std::size_t cols,
                          Orientation orientation, std::span<T> out) {
  const std::size_t n = w.size();
  std::fill(out.begin(), out.end(), T(0));
  // out = sum_m w[m] * roll(v, +m) for kColShift, roll(v, -m) for kRowShift,
  // accumulated in ascending m.
  // The roll is two contiguous row blocks, so each m is a pair of axpy runs.
  auto axpy = [cols](T a, const T* x, T* y, std::size_t rows) {
    for (std::size_t e = 0; e < rows * cols; ++e) y[e] += a * x[e];
  };
  for (std::size_t m = 0; m < n; ++m) {
    const T wm = w[m];
    const std::size_t s = orientation == Orientation::kColShift ? (n - m) % n : m;
    // out row i reads v row (i + s) mod n.
    axpy(wm, v.data() + s * cols, out.data(), n - s);
    axpy(wm, v.data(), out.data() + (n - s) * cols, s);
  }
}

template <class T>
void circulant_mix_fft(std::span<const T> w, std::span<const T> v, std::size_t cols,
                       Orientation orientation, std::span<T> out) {
  const std::size_t n = w.size();
  const FftPlan<T>& plan = cached_fft_plan<T>(n);
  ComplexVector<T> buf(n), spec(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = std::complex<T>(w[i], T(0));
  ComplexVector<T> wf = plan.forward(buf);
  if (orientation == Orientation::kRowShift)
    for (auto& x : wf) x = std::conj(x);
  T wsum = 0;
  for (T x : w) wsum += std::abs(x);
  for (std::size_t c = 0; c < cols; ++c) {
    fft_columns(v, cols, c, buf);
    T vmax = 0;
    for (const auto& x : buf) vmax = std::max(vmax, std::abs(x.real()));
    plan.forward_into(buf, spec);
    for (std::size_t k = 0; k < n; ++k) spec[k] *= wf[k];
    plan.inverse_into(spec, buf);
    T residue = 0;
    for (std::size_t i = 0; i < n; ++i) {
      residue = std::max(residue, std::abs(buf[i].imag()));
      out[i * cols + c] = buf[i].real();
    }
    require(residue <= kImagResidueTol<T> * std::max(T(1), wsum * vmax), ErrorCode::kInternal,
            "cat_forward_fft: imaginary residue too large");
  }
}

#define CIRCAT_INSTANTIATE_MIX(T)                                                                \
  template void circulant_mix_explicit<T>(std::span<const T>, std::span<const T>, std::size_t, \
                                          Orientation, std::span<T>);                          \
  template void circulant_mix_gather<T>(std::span<const T>, std::span<const T>, std::size_t,   \
                                        Orientation, std::span<T>);                            \
  template void circulant_mix_fft<T>(std::span<const T>, std::span<const T>, std::size_t,      \
                                     Orientation, std::span<T>);
CIRCAT_INSTANTIATE_MIX(double)
CIRCAT_INSTANTIATE_MIX(float)
#undef CIRCAT_INSTANTIATE_MIX

namespace {

using MixFn = void (*)(std::span<const double>, std::span<const double>, std::size_t, Orientation,
                       std::span<double>);

Tensor run_mix(MixFn fn, const Tensor& w, Orientation orientation, const Tensor& v,
               const char* what) {
  require_conforming(w, v, what);
  Buffer out(v.size());
  fn(w.data(), v.data(), v.cols(), orientation, out);
  Tensor result(Shape{v.rows(), v.cols()}, std::move(out));
  check_finite(result, what);
  return result;
}

}  // namespace

Tensor cat_forward_explicit(const Tensor& w, Orientation orientation, const Tensor& v) {
  return run_mix(&circulant_mix_explicit<double>, w, orientation, v, "cat_forward_explicit");
}

Tensor cat_forward_gather(const Tensor& w, Orientation orientation, const Tensor& v) {
  return run_mix(&circulant_mix_gather<double>, w, orientation, v, "cat_forward_gather");
}

Tensor cat_forward_fft(const Tensor& w, Orientation orientation, const Tensor& v) {
  return run_mix(&circulant_mix_fft<double>, w, orientation, v, "cat_forward_fft");
}

Tensor cat_forward(const Tensor& w, Orientation orientation, const Tensor& v, CatPath path) {
  switch (path) {
    case CatPath::kExplicit: return cat_forward_explicit(w, orientation, v);
    case CatPath::kGather: return cat_forward_gather(w, orientation, v);
    case CatPath::kFft: return cat_forward_fft(w, orientation, v);
  }
  fail(ErrorCode::kInvalidArgument, "unknown path");
}

Tensor cat_forward_explicit(const CirculantKernel& k, const Tensor& v) {
  return cat_forward_explicit(k.weights(), k.orientation(), v);
}
Tensor cat_forward_gather(const CirculantKernel& k, const Tensor& v) {
  return cat_forward_gather(k.weights(), k.orientation(), v);
}
Tensor cat_forward_fft(const CirculantKernel& k, const Tensor& v) {
  return cat_forward_fft(k.weights(), k.orientation(), v);
}

Tensor cat_forward_causal(const CirculantKernel& k, const Tensor& v) {
  require_conforming(k.weights(), v, "cat_forward_causal");
  const std::size_t n = k.size();
  const Tensor m = materialize_circulant(k);
  Buffer masked(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double mass = 0.0;
    for (std::size_t j = 0; j <= i; ++j) mass += m(i, j);
    require(mass > 0.0, ErrorCode::kInternal, "cat_forward_causal: row with no allowed mass");
    for (std::size_t j = 0; j <= i; ++j) masked[i * n + j] = m(i, j) / mass;
  }
  return matmul(Tensor(Shape{n, n}, std::move(masked)), v);
}

Tensor cat_forward_causal_logits(const Tensor& logits, Orientation orientation, const Tensor& v) {
  require_conforming(logits, v, "cat_forward_causal");
  return matmul(softmax_rows_causal(materialize_circulant(logits, orientation)), v);
}

Var materialize_circulant(Var w, Orientation orientation) {
  return w.tape().record(materialize_circulant(w.value(), orientation), {w},
                         [w, orientation](Tape& t, std::span<const double> g) {
                           auto gw = t.grad_buffer(w);
                           const std::size_t n = gw.size();
                           for (std::size_t i = 0; i < n; ++i)
                             for (std::size_t j = 0; j < n; ++j)
                               gw[circulant_index(i, j, n, orientation)] += g[i * n + j];
                         });
}

namespace {

// d/dw of sum(g . mix(w, v)): kColShift gives sum_c correlate(v_c, g_c),
// kRowShift gives sum_c correlate(g_c, v_c).
void kernel_grad_fft(const Tensor& v, std::span<const double> g, Orientation orientation,
                     std::span<double> gw) {
  const std::size_t n = v.rows(), cols = v.cols();
  const FftPlan<double>& plan = cached_fft_plan<double>(n);
  ComplexVector<double> buf(n), vf(n), gf(n), acc(n, {0.0, 0.0});
  for (std::size_t c = 0; c < cols; ++c) {
    fft_columns(v.data(), cols, c, buf);
    plan.forward_into(buf, vf);
    fft_columns(g, cols, c, buf);
    plan.forward_into(buf, gf);
    for (std::size_t k = 0; k < n; ++k)
      acc[k] += orientation == Orientation::kColShift ? std::conj(vf[k]) * gf[k]
                                                      : std::conj(gf[k]) * vf[k];
  }
  plan.inverse_into(acc, buf);
  for (std::size_t k = 0; k < n; ++k) gw[k] += buf[k].real();
}

void kernel_grad_gather(const Tensor& v, std::span<const double> g, Orientation orientation,
                        std::span<double> gw) {
  const std::size_t n = v.rows(), cols = v.cols();
  const auto vd = v.data();
  for (std::size_t m = 0; m < n; ++m) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t src = orientation == Orientation::kColShift ? (i + n - m) % n : (i + m) % n;
      for (std::size_t c = 0; c < cols; ++c) acc += g[i * cols + c] * vd[src * cols + c];
    }
    gw[m] += acc;
  }
}

}  // namespace

Var cat_mix(Var w, Var v, Orientation orientation, CatPath path) {
  if (path == CatPath::kExplicit) return matmul(materialize_circulant(w, orientation), v);
  Tensor out = cat_forward(w.value(), orientation, v.value(), path);
  return w.tape().record(
      std::move(out), {w, v}, [w, v, orientation, path](Tape& t, std::span<const double> g) {
        const Tensor& wv = w.value();
        const Tensor& vv = v.value();
        if (auto gv = t.grad_buffer(v); !gv.empty()) {
          Buffer back(vv.size());
          if (path == CatPath::kFft)
            circulant_mix_fft<double>(wv.data(), g, vv.cols(), flipped(orientation), back);
          else
            circulant_mix_gather<double>(wv.data(), g, vv.cols(), flipped(orientation), back);
          for (std::size_t i = 0; i < back.size(); ++i) gv[i] += back[i];
        }
        if (auto gw = t.grad_buffer(w); !gw.empty()) {
          if (path == CatPath::kFft)
            kernel_grad_fft(vv, g, orientation, gw);
          else
            kernel_grad_gather(vv, g, orientation, gw);
        }
      });
}

Var cat_mix_causal(Var logits, Var v, Orientation orientation) {
  require_conforming(logits.value(), v.value(), "cat_mix_causal");
  return matmul(softmax_rows(materialize_circulant(logits, orientation), /*causal=*/true), v);
}

Var column_softmax(Var z) {
  require(z.cols() == 1, ErrorCode::kShapeMismatch, "column_softmax: expected N x 1");
  return transpose(softmax_rows(transpose(z)));
}

Var multihead_cat(Var x, const CatParamsT<Var>& params, std::size_t heads,
                  const CatOptions& options, MapSink* maps) {
  const std::size_t d = x.cols();
  require(heads >= 1 && d % heads == 0, ErrorCode::kInvalidArgument,
          "multihead_cat: D = " + std::to_string(d) + " not divisible by H = " +
              std::to_string(heads));
  require(params.w_a.rows() == d && params.w_a.cols() == heads, ErrorCode::kShapeMismatch,
          "multihead_cat: w_a must be D x H");
  require(params.w_v.rows() == d && params.w_v.cols() == d, ErrorCode::kShapeMismatch,
          "multihead_cat: w_v must be D x D");
  const std::size_t dh = d / heads;
  Var z_all = matmul(x, params.w_a);
  Var v_all = matmul(x, params.w_v);
  std::vector<Var> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var z = slice_cols(z_all, h, 1);
    if (options.logit_scale != 1.0) z = scale(z, options.logit_scale);
    Var v = heads == 1 ? v_all : slice_cols(v_all, h * dh, dh);
    if (options.causal) {
      outs.push_back(cat_mix_causal(z, v, options.orientation));
      if (maps)
        maps->push_back(softmax_rows_causal(materialize_circulant(z.value(), options.orientation)));
    } else {
      Var w = column_softmax(z);
      outs.push_back(cat_mix(w, v, options.orientation, options.path));
      if (maps) maps->push_back(materialize_circulant(w.value(), options.orientation));
    }
  }
  return heads == 1 ? outs.front() : concat_cols(outs);
}

Tensor multihead_cat_forward(const Tensor& x, const CatParams& params, std::size_t heads,
                             const CatOptions& options) {
  Tape tape;
  const CatParamsT<Var> bound{tape.constant(params.w_a), tape.constant(params.w_v)};
  return multihead_cat(tape.constant(x), bound, heads, options).value();
}

std::size_t count_attention_coefficients(std::size_t n, std::size_t heads, Mechanism mechanism) {
  require(n >= 1 && heads >= 1, ErrorCode::kInvalidArgument,
          "count_attention_coefficients: arguments must be positive");
  return mechanism == Mechanism::kAttention ? heads * n * n : heads * n;
}

}  // namespace circat
