// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "circat/autograd.hpp"
#include "circat/circulant.hpp"
#include "circat/tensor.hpp"

namespace circat {

class Rng;

// Token mixers. Each parameter set is a template over the handle type so the
// same layout serves stored weights (Tensor) and a recorded pass (Var).
enum class MixerKind { kAttention, kCat, kAvgKeyQkv, kQOnly, kVOnly, kGqa };

std::string_view to_string(MixerKind kind);
MixerKind parse_mixer_kind(std::string_view s);

template <class H>
struct AttentionParamsT {
  H w_q, w_k, w_v;  // D x D each

  template <class F> void for_each(F&& f) { f("w_q", w_q); f("w_k", w_k); f("w_v", w_v); }
  template <class F> void for_each(F&& f) const { f("w_q", w_q); f("w_k", w_k); f("w_v", w_v); }
};

// Circular qkv with an averaged key: z = Q mean(K)^T / sqrt(D_h) per head.
template <class H>
struct AvgKeyParamsT {
  H w_q, w_k, w_v;  // D x D each

  template <class F> void for_each(F&& f) { f("w_q", w_q); f("w_k", w_k); f("w_v", w_v); }
  template <class F> void for_each(F&& f) const { f("w_q", w_q); f("w_k", w_k); f("w_v", w_v); }
};

// Kernel from the input, values from a trainable N x D table.
template <class H>
struct QOnlyParamsT {
  H w_a;  // D x H
  H v_t;  // N x D

  template <class F> void for_each(F&& f) { f("w_a", w_a); f("v_t", v_t); }
  template <class F> void for_each(F&& f) const { f("w_a", w_a); f("v_t", v_t); }
};

// Trainable kernels, one length-N column per value channel, values from the
// input. (N + D) * D scalars.
template <class H>
struct VOnlyParamsT {
  H z_t;  // N x D
  H w_v;  // D x D

  template <class F> void for_each(F&& f) { f("z_t", z_t); f("w_v", w_v); }
  template <class F> void for_each(F&& f) const { f("z_t", z_t); f("w_v", w_v); }
};

// Grouped-query attention. Keys/values have D*K columns split into
// G = D*K / D_h groups; query head h reads group h / (H / G).
template <class H>
struct GqaParamsT {
  H w_q;       // D x D
  H w_k, w_v;  // D x (D*K)

  template <class F> void for_each(F&& f) { f("w_q", w_q); f("w_k", w_k); f("w_v", w_v); }
  template <class F> void for_each(F&& f) const { f("w_q", w_q); f("w_k", w_k); f("w_v", w_v); }
};

template <class H>
using MixerParamsT = std::variant<AttentionParamsT<H>, CatParamsT<H>, AvgKeyParamsT<H>,
                                  QOnlyParamsT<H>, VOnlyParamsT<H>, GqaParamsT<H>>;

using AttentionParams = AttentionParamsT<Tensor>;
using AvgKeyParams = AvgKeyParamsT<Tensor>;
using QOnlyParams = QOnlyParamsT<Tensor>;
using VOnlyParams = VOnlyParamsT<Tensor>;
using GqaParams = GqaParamsT<Tensor>;
using MixerParams = MixerParamsT<Tensor>;
using MixerVars = MixerParamsT<Var>;

template <class H>
MixerKind kind_of(const MixerParamsT<H>& p) {
  return static_cast<MixerKind>(p.index());
}

struct MixerOptions {
  std::size_t heads = 1;
  CatPath path = CatPath::kFft;
  Orientation orientation = Orientation::kColShift;
  bool causal = false;
  // Applied to the CAT / q-only logits. The averaged-key variant always
  // divides by sqrt(D_h) as in its defining formula.
  double cat_logit_scale = 1.0;
};

// Parameter set of the given kind with N(0, stddev^2) entries. `n` binds the
// q-only / v-only tables; `gqa_ratio` is K.
MixerParams init_mixer(MixerKind kind, std::size_t d, std::size_t heads, std::size_t n,
                       double gqa_ratio, Rng& rng, double stddev);

// Closed-form learnable scalar counts. kCat: (D+H)D, kAttention/kAvgKeyQkv:
// 3D^2, kQOnly: (N+H)D, kVOnly: (N+D)D, kGqa: D^2 + 2 D (D K).
std::size_t param_count(MixerKind kind, std::size_t d, std::size_t heads, std::size_t n,
                        double gqa_ratio = 1.0);
// Accepts the MixerKind names plus "cat-alter", the per-layer average over an
// attention + CAT pair, (2D + H/2) D (H must be even).
std::size_t param_count(std::string_view mechanism, std::size_t d, std::size_t heads,
                        std::size_t n, double gqa_ratio = 1.0);

std::size_t scalar_count(const MixerParams& p);
std::vector<std::pair<std::string, Tensor>> named_tensors(const MixerParams& p);

MixerVars bind(Tape& tape, const MixerParams& p, bool requires_grad);

Var standard_attention(Var x, const AttentionParamsT<Var>& p, std::size_t heads, bool causal,
                       MapSink* maps = nullptr);
Tensor standard_attention_forward(const Tensor& x, const AttentionParams& p, std::size_t heads,
                                  bool causal);

Var mixer_forward(Var x, const MixerVars& p, const MixerOptions& options, MapSink* maps = nullptr);
Tensor variant_forward(const Tensor& x, const MixerParams& p, const MixerOptions& options);

// Number of key/value groups for a GQA ratio: max(1, round(H * K)).
std::size_t gqa_groups(std::size_t heads, double ratio);

}  // namespace circat
