// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include "circat/variants.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "circat/rng.hpp"

namespace circat {
namespace {

void require_shape(const Tensor& t, std::size_t rows, std::size_t cols, const char* what) {
  require(t.rows() == rows && t.cols() == cols, ErrorCode::kShapeMismatch,
          std::string(what) + ": expected [" + std::to_string(rows) + "x" + std::to_string(cols) +
              "], got " + t.shape().to_string());
}

std::size_t head_width(std::size_t d, std::size_t heads, const char* what) {
  require(heads >= 1 && d % heads == 0, ErrorCode::kInvalidArgument,
          std::string(what) + ": D = " + std::to_string(d) + " not divisible by H = " +
              std::to_string(heads));
  return d / heads;
}

// Key positions sorted by the bit patterns of their (key, value) rows. Rows
// that compare equal contribute identical terms, so every reduction over keys
// taken in this order is independent of how the tokens were ordered.
std::vector<std::size_t> canonical_key_order(const Tensor& k, const Tensor& v) {
  std::vector<std::size_t> order(k.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto bits = [](double x) { return std::bit_cast<std::uint64_t>(x); };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    for (std::size_t c = 0; c < k.cols(); ++c)
      if (bits(k(a, c)) != bits(k(b, c))) return bits(k(a, c)) < bits(k(b, c));
    for (std::size_t c = 0; c < v.cols(); ++c)
      if (bits(v(a, c)) != bits(v(b, c))) return bits(v(a, c)) < bits(v(b, c));
    return false;
  });
  return order;
}

// One softmax attention head; q, k are N x dh. Without a mask the keys are
// visited in canonical order, which makes the head exactly equivariant to
// permutations of the tokens.
Var attention_head(Var q, Var k, Var v, bool causal, MapSink* maps) {
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  if (causal) {
    Var a = softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt), true);
    if (maps) maps->push_back(a.value());
    return matmul(a, v);
  }
  const std::vector<std::size_t> order = canonical_key_order(k.value(), v.value());
  Var kc = gather_rows(k, order), vc = gather_rows(v, order);
  Var a = softmax_rows(scale(matmul(q, transpose(kc)), inv_sqrt), false);
  if (maps) {
    const Tensor& av = a.value();
    const std::size_t n = av.rows();
    Buffer map(av.size());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < order.size(); ++j) map[i * order.size() + order[j]] = av(i, j);
    maps->push_back(Tensor(av.shape(), std::move(map)));
  }
  return matmul(a, vc);
}

// Mixes v with the circulant generated by the N x 1 logits z.
Var circulant_head(Var z, Var v, const MixerOptions& options, MapSink* maps) {
  if (options.causal) {
    if (maps) maps->push_back(softmax_rows_causal(materialize_circulant(z.value(), options.orientation)));
    return cat_mix_causal(z, v, options.orientation);
  }
  Var w = column_softmax(z);
  if (maps) maps->push_back(materialize_circulant(w.value(), options.orientation));
  return cat_mix(w, v, options.orientation, options.path);
}

Var concat_heads(std::vector<Var>& outs) {
  return outs.size() == 1 ? outs.front() : concat_cols(outs);
}

template <template <class> class P>
P<Var> bind_struct(Tape& tape, const P<Tensor>& p, bool requires_grad) {
  std::vector<Tensor> src;
  p.for_each([&](const char*, const Tensor& t) { src.push_back(t); });
  P<Var> out;
  std::size_t i = 0;
  out.for_each([&](const char*, Var& v) { v = tape.leaf(src[i++], requires_grad); });
  return out;
}

Var avg_key_forward(Var x, const AvgKeyParamsT<Var>& p, const MixerOptions& options,
                    MapSink* maps) {
  const std::size_t d = x.cols();
  const std::size_t dh = head_width(d, options.heads, "avg_key");
  require_shape(p.w_q.value(), d, d, "avg_key w_q");
  require_shape(p.w_k.value(), d, d, "avg_key w_k");
  require_shape(p.w_v.value(), d, d, "avg_key w_v");
  require(!options.causal, ErrorCode::kUnsupported,
          "avg_key: the averaged key spans all positions and has no causal form");
  Var q = matmul(x, p.w_q), k = matmul(x, p.w_k), v = matmul(x, p.w_v);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> outs;
  for (std::size_t h = 0; h < options.heads; ++h) {
    Var k_avg = mean_rows(slice_cols(k, h * dh, dh));
    Var z = scale(matmul(slice_cols(q, h * dh, dh), transpose(k_avg)), inv_sqrt);
    outs.push_back(circulant_head(z, slice_cols(v, h * dh, dh), options, maps));
  }
  return concat_heads(outs);
}

Var q_only_forward(Var x, const QOnlyParamsT<Var>& p, const MixerOptions& options,
                   MapSink* maps) {
  const std::size_t n = x.rows(), d = x.cols();
  const std::size_t dh = head_width(d, options.heads, "q_only");
  require_shape(p.w_a.value(), d, options.heads, "q_only w_a");
  require(p.v_t.rows() == n, ErrorCode::kShapeMismatch,
          "q_only: input length " + std::to_string(n) + " differs from bound N = " +
              std::to_string(p.v_t.rows()));
  require_shape(p.v_t.value(), n, d, "q_only v_t");
  Var z_all = matmul(x, p.w_a);
  std::vector<Var> outs;
  for (std::size_t h = 0; h < options.heads; ++h) {
    Var z = slice_cols(z_all, h, 1);
    if (options.cat_logit_scale != 1.0) z = scale(z, options.cat_logit_scale);
    outs.push_back(circulant_head(z, slice_cols(p.v_t, h * dh, dh), options, maps));
  }
  return concat_heads(outs);
}

Var v_only_forward(Var x, const VOnlyParamsT<Var>& p, const MixerOptions& options,
                   MapSink* maps) {
  const std::size_t n = x.rows(), d = x.cols();
  require(p.z_t.rows() == n, ErrorCode::kShapeMismatch,
          "v_only: input length " + std::to_string(n) + " differs from bound N = " +
              std::to_string(p.z_t.rows()));
  require_shape(p.z_t.value(), n, d, "v_only z_t");
  require_shape(p.w_v.value(), d, d, "v_only w_v");
  Var v = matmul(x, p.w_v);
  std::vector<Var> outs;
  for (std::size_t c = 0; c < d; ++c)
    outs.push_back(circulant_head(slice_cols(p.z_t, c, 1), slice_cols(v, c, 1), options, maps));
  return concat_heads(outs);
}

Var gqa_forward(Var x, const GqaParamsT<Var>& p, const MixerOptions& options, MapSink* maps) {
  const std::size_t d = x.cols();
  const std::size_t dh = head_width(d, options.heads, "gqa");
  require_shape(p.w_q.value(), d, d, "gqa w_q");
  const std::size_t kv = p.w_k.cols();
  require(kv % dh == 0 && kv >= dh, ErrorCode::kShapeMismatch,
          "gqa: key width must be a multiple of the head width");
  require_shape(p.w_v.value(), d, kv, "gqa w_v");
  const std::size_t groups = kv / dh;
  require(options.heads % groups == 0, ErrorCode::kInvalidArgument,
          "gqa: heads must be divisible by the group count");
  const std::size_t per_group = options.heads / groups;
  Var q = matmul(x, p.w_q), k = matmul(x, p.w_k), v = matmul(x, p.w_v);
  std::vector<Var> outs;
  for (std::size_t h = 0; h < options.heads; ++h) {
    const std::size_t g = h / per_group;
    outs.push_back(attention_head(slice_cols(q, h * dh, dh), slice_cols(k, g * dh, dh),
                                  slice_cols(v, g * dh, dh), options.causal, maps));
  }
  return concat_heads(outs);
}

}  // namespace

std::string_view to_string(MixerKind kind) {
  switch (kind) {
    case MixerKind::kAttention: return "attention";
    case MixerKind::kCat: return "cat";
    case MixerKind::kAvgKeyQkv: return "avgkey-qkv";
    case MixerKind::kQOnly: return "q-only";
    case MixerKind::kVOnly: return "v-only";
    case MixerKind::kGqa: return "gqa";
  }
  return "unknown";
}

MixerKind parse_mixer_kind(std::string_view s) {
  for (MixerKind k : {MixerKind::kAttention, MixerKind::kCat, MixerKind::kAvgKeyQkv,
                      MixerKind::kQOnly, MixerKind::kVOnly, MixerKind::kGqa}) {
    if (to_string(k) == s) return k;
  }
  fail(ErrorCode::kInvalidArgument, "unknown mechanism '" + std::string(s) + "'");
}

std::size_t gqa_groups(std::size_t heads, double ratio) {
  require(ratio > 0.0 && ratio <= 1.0, ErrorCode::kInvalidArgument,
          "gqa ratio K must lie in (0, 1]");
  const double g = std::round(static_cast<double>(heads) * ratio);
  return g < 1.0 ? 1 : static_cast<std::size_t>(g);
}

namespace {

std::size_t gqa_kv_width(std::size_t d, std::size_t heads, double ratio) {
  const std::size_t groups = gqa_groups(heads, ratio);
  const std::size_t dh = head_width(d, heads, "gqa");
  require(heads % groups == 0, ErrorCode::kInvalidArgument,
          "gqa: H = " + std::to_string(heads) + " not divisible by " + std::to_string(groups) +
              " groups");
  const double want = static_cast<double>(d) * ratio;
  require(std::abs(want - static_cast<double>(groups * dh)) < 1e-9, ErrorCode::kInvalidArgument,
          "gqa: D*K must equal groups * D/H (H*K integral)");
  return groups * dh;
}

}  // namespace

MixerParams init_mixer(MixerKind kind, std::size_t d, std::size_t heads, std::size_t n,
                       double gqa_ratio, Rng& rng, double stddev) {
  head_width(d, heads, "init_mixer");
  auto mat = [&](std::size_t r, std::size_t c) { return Tensor::normal(Shape{r, c}, rng, stddev); };
  switch (kind) {
    case MixerKind::kAttention: return AttentionParams{mat(d, d), mat(d, d), mat(d, d)};
    case MixerKind::kCat: return CatParams{mat(d, heads), mat(d, d)};
    case MixerKind::kAvgKeyQkv: return AvgKeyParams{mat(d, d), mat(d, d), mat(d, d)};
    case MixerKind::kQOnly: return QOnlyParams{mat(d, heads), mat(n, d)};
    case MixerKind::kVOnly: return VOnlyParams{mat(n, d), mat(d, d)};
    case MixerKind::kGqa: {
      const std::size_t kv = gqa_kv_width(d, heads, gqa_ratio);
      return GqaParams{mat(d, d), mat(d, kv), mat(d, kv)};
    }
  }
  fail(ErrorCode::kInvalidArgument, "init_mixer: unknown kind");
}

std::size_t param_count(MixerKind kind, std::size_t d, std::size_t heads, std::size_t n,
                        double gqa_ratio) {
  require(d >= 1 && heads >= 1 && n >= 1, ErrorCode::kInvalidArgument,
          "param_count: arguments must be positive");
  switch (kind) {
    case MixerKind::kAttention:
    case MixerKind::kAvgKeyQkv: return 3 * d * d;
    case MixerKind::kCat: return (d + heads) * d;
    case MixerKind::kQOnly: return (n + heads) * d;
    case MixerKind::kVOnly: return (n + d) * d;
    case MixerKind::kGqa: return d * d + 2 * d * gqa_kv_width(d, heads, gqa_ratio);
  }
  fail(ErrorCode::kInvalidArgument, "param_count: unknown kind");
}

std::size_t param_count(std::string_view mechanism, std::size_t d, std::size_t heads,
                        std::size_t n, double gqa_ratio) {
  if (mechanism == "cat-alter") {
    require(heads % 2 == 0, ErrorCode::kInvalidArgument, "param_count: cat-alter needs even H");
    require(d >= 1 && heads >= 1, ErrorCode::kInvalidArgument,
            "param_count: arguments must be positive");
    return (2 * d + heads / 2) * d;
  }
  return param_count(parse_mixer_kind(mechanism), d, heads, n, gqa_ratio);
}

std::vector<std::pair<std::string, Tensor>> named_tensors(const MixerParams& p) {
  std::vector<std::pair<std::string, Tensor>> out;
  std::visit([&](const auto& s) { s.for_each([&](const char* name, const Tensor& t) { out.emplace_back(name, t); }); },
             p);
  return out;
}

std::size_t scalar_count(const MixerParams& p) {
  std::size_t total = 0;
  for (const auto& [name, t] : named_tensors(p)) total += t.size();
  return total;
}

MixerVars bind(Tape& tape, const MixerParams& p, bool requires_grad) {
  return std::visit([&](const auto& s) -> MixerVars { return bind_struct(tape, s, requires_grad); },
                    p);
}

Var standard_attention(Var x, const AttentionParamsT<Var>& p, std::size_t heads, bool causal,
                       MapSink* maps) {
  const std::size_t d = x.cols();
  const std::size_t dh = head_width(d, heads, "attention");
  require_shape(p.w_q.value(), d, d, "attention w_q");
  require_shape(p.w_k.value(), d, d, "attention w_k");
  require_shape(p.w_v.value(), d, d, "attention w_v");
  Var q = matmul(x, p.w_q), k = matmul(x, p.w_k), v = matmul(x, p.w_v);
  std::vector<Var> outs;
  for (std::size_t h = 0; h < heads; ++h)
    outs.push_back(attention_head(slice_cols(q, h * dh, dh), slice_cols(k, h * dh, dh),
                                  slice_cols(v, h * dh, dh), causal, maps));
  return concat_heads(outs);
}

Tensor standard_attention_forward(const Tensor& x, const AttentionParams& p, std::size_t heads,
                                  bool causal) {
  Tape tape;
  const auto bound = bind_struct(tape, p, false);
  return standard_attention(tape.constant(x), bound, heads, causal).value();
}

Var mixer_forward(Var x, const MixerVars& p, const MixerOptions& options, MapSink* maps) {
  return std::visit(
      [&](const auto& s) -> Var {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, AttentionParamsT<Var>>) {
          return standard_attention(x, s, options.heads, options.causal, maps);
        } else if constexpr (std::is_same_v<S, CatParamsT<Var>>) {
          CatOptions cat{options.path, options.orientation, options.causal, options.cat_logit_scale};
          return multihead_cat(x, s, options.heads, cat, maps);
        } else if constexpr (std::is_same_v<S, AvgKeyParamsT<Var>>) {
          return avg_key_forward(x, s, options, maps);
        } else if constexpr (std::is_same_v<S, QOnlyParamsT<Var>>) {
          return q_only_forward(x, s, options, maps);
        } else if constexpr (std::is_same_v<S, VOnlyParamsT<Var>>) {
          return v_only_forward(x, s, options, maps);
        } else {
          return gqa_forward(x, s, options, maps);
        }
      },
      p);
}

Tensor variant_forward(const Tensor& x, const MixerParams& p, const MixerOptions& options) {
  Tape tape;
  const MixerVars bound = bind(tape, p, false);
  return mixer_forward(tape.constant(x), bound, options).value();
}

}  // namespace circat
