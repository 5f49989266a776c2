// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "circat/autograd.hpp"
#include "circat/fft.hpp"
#include "circat/tensor.hpp"

namespace circat {

// Which circulant a weight vector w of length N generates (0-indexed):
//   kRowShift: M[i][j] = w[(j - i) mod N]. First row is w and each row is the
//              previous one shifted right by one. Computes circular
//              correlation.
//   kColShift: M[i][j] = w[(i - j) mod N]. First column is w. Computes
//              circular convolution, i.e. IFFT(FFT(w) . FFT(v)).
// The two coincide for N <= 2.
enum class Orientation { kRowShift, kColShift };

enum class CatPath { kExplicit, kGather, kFft };

std::string_view to_string(Orientation o);
std::string_view to_string(CatPath p);
Orientation parse_orientation(std::string_view s);
CatPath parse_cat_path(std::string_view s);

// Post-softmax generator of an implicit N x N attention map.
class CirculantKernel {
 public:
  // Throws kInvalidArgument unless weights are N x 1 (or length N),
  // nonnegative and sum to 1 within 1e-10.
  CirculantKernel(Tensor weights, Orientation orientation);

  const Tensor& weights() const { return weights_; }
  Orientation orientation() const { return orientation_; }
  std::size_t size() const { return weights_.size(); }

 private:
  Tensor weights_;
  Orientation orientation_;
};

// softmax(x w_a) taken over the N positions.
CirculantKernel build_kernel(const Tensor& x, const Tensor& w_a,
                             Orientation orientation = Orientation::kColShift);

// Any length-N vector, normalised or not.
Tensor materialize_circulant(const Tensor& w, Orientation orientation);
Tensor materialize_circulant(const CirculantKernel& k);

// Mixing paths; all compute materialize_circulant(w) * v.
Tensor cat_forward_explicit(const Tensor& w, Orientation orientation, const Tensor& v);
Tensor cat_forward_gather(const Tensor& w, Orientation orientation, const Tensor& v);
Tensor cat_forward_fft(const Tensor& w, Orientation orientation, const Tensor& v);
Tensor cat_forward(const Tensor& w, Orientation orientation, const Tensor& v, CatPath path);

Tensor cat_forward_explicit(const CirculantKernel& k, const Tensor& v);
Tensor cat_forward_gather(const CirculantKernel& k, const Tensor& v);
Tensor cat_forward_fft(const CirculantKernel& k, const Tensor& v);

// Causal mixing: the circulant with entries j > i removed and each row
// renormalised over j <= i. The logit form computes each row as a softmax
// over the allowed raw logits, so row i never reads a logit outside its
// allowed set.
Tensor cat_forward_causal(const CirculantKernel& k, const Tensor& v);
Tensor cat_forward_causal_logits(const Tensor& logits, Orientation orientation, const Tensor& v);

// Span-level kernels shared by the tensor paths and the benchmarks. `v` and
// `out` are row-major n x cols; `out` is overwritten.
template <class T>
void circulant_mix_explicit(std::span<const T> w, std::span<const T> v, std::size_t cols,
                            Orientation orientation, std::span<T> out);
template <class T>
void circulant_mix_gather(std::span<const T> w, std::span<const T> v, std::size_t cols,
                          Orientation orientation, std::span<T> out);
template <class T>
void circulant_mix_fft(std::span<const T> w, std::span<const T> v, std::size_t cols,
                       Orientation orientation, std::span<T> out);

// Plan cache keyed by length, one per thread.
template <class T>
const FftPlan<T>& cached_fft_plan(std::size_t n);

// Recording versions. w is N x 1.
Var materialize_circulant(Var w, Orientation orientation);
Var cat_mix(Var w, Var v, Orientation orientation, CatPath path);
Var cat_mix_causal(Var logits, Var v, Orientation orientation);
// Softmax over the entries of an N x 1 column.
Var column_softmax(Var z);

// Collects per-head N x N maps for visualisation when non-null.
using MapSink = std::vector<Tensor>;

// CAT parameters for all heads. Head h reads column h of w_a (D x H) and
// columns [h*D/H, (h+1)*D/H) of w_v (D x D), giving (D + H) * D scalars.
template <class H>
struct CatParamsT {
  H w_a;
  H w_v;

  template <class F>
  void for_each(F&& f) {
    f("w_a", w_a);
    f("w_v", w_v);
  }
  template <class F>
  void for_each(F&& f) const {
    f("w_a", w_a);
    f("w_v", w_v);
  }
};
using CatParams = CatParamsT<Tensor>;

struct CatOptions {
  CatPath path = CatPath::kFft;
  Orientation orientation = Orientation::kColShift;
  bool causal = false;
  // Multiplies Z = X W_A before the softmax. 1 means unscaled.
  double logit_scale = 1.0;
};

Var multihead_cat(Var x, const CatParamsT<Var>& params, std::size_t heads,
                  const CatOptions& options, MapSink* maps = nullptr);
Tensor multihead_cat_forward(const Tensor& x, const CatParams& params, std::size_t heads,
                             const CatOptions& options);

enum class Mechanism { kAttention, kCat };

// H * N^2 coefficients for attention, H * N for CAT.
std::size_t count_attention_coefficients(std::size_t n, std::size_t heads, Mechanism mechanism);

}  // namespace circat
