// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.


#include "circat/verify.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numeric>

#include "circat/autograd.hpp"
#include "circat/circulant.hpp"
#include "circat/error.hpp"
#include "circat/fft.hpp"
#include "circat/memory.hpp"
#include "circat/model.hpp"
#include "circat/rng.hpp"
#include "circat/variants.hpp"

namespace circat {
namespace {

using cd = std::complex<double>;

class Recorder {
 public:
  Recorder(VerifyReport& report, std::string suite) : report_(report), suite_(std::move(suite)) {}

  // Runs `body`, which reports each case's error through the callback.
  void property(const std::string& name, double tolerance,
                const std::function<void(const std::function<void(double)>&)>& body) {
    PropertyResult r{suite_, name, tolerance, 0.0, 0, true};
    body([&](double err) {
      ++r.cases;
      if (std::isnan(err) || err > r.worst_error) r.worst_error = std::isnan(err) ? INFINITY : err;
    });
    r.passed = r.worst_error <= tolerance;
    report_.properties.push_back(r);
  }

 private:
  VerifyReport& report_;
  std::string suite_;
};

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t s = seed * 0x9e3779b97f4a7c15ULL + salt;
  return Rng::splitmix64(s);
}

Tensor rand(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  return Tensor::uniform(Shape{r, c}, rng, -scale, scale);
}

Tensor softmax_col(const Tensor& z) { return transpose(softmax_rows(transpose(z))); }

double rel(double err, double ref) { return err / std::max(ref, 1e-300); }

double max_abs(std::span<const cd> x) {
  double m = 0.0;
  for (const cd& v : x) m = std::max(m, std::abs(v));
  return m;
}

const std::size_t kPathGrid[] = {1, 2, 3, 4, 5, 7, 8, 12, 16, 100, 196, 256, 257};
constexpr Orientation kOrients[] = {Orientation::kRowShift, Orientation::kColShift};
constexpr CatPath kPaths[] = {CatPath::kExplicit, CatPath::kGather, CatPath::kFft};

void fft_suite(VerifyReport& report, std::uint64_t seed) {
  Recorder rec(report, "fft");
  std::vector<std::size_t> lengths;
  for (std::size_t l = 1; l <= 32; ++l) lengths.push_back(l);
  for (std::size_t l : {64u, 100u, 128u, 257u, 1000u, 1024u}) lengths.push_back(l);
  Rng rng(mix(seed, 1));
  auto signal = [&](std::size_t l) {
    std::vector<cd> x(l);
    for (auto& v : x) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    return x;
  };

  rec.property("fft_matches_naive_dft", 1e-12, [&](auto report_err) {
    for (std::size_t l : lengths) {
      const auto x = signal(l);
      const FftPlan<double> plan(l);
      const auto got = plan.forward(x);
      const auto want = naive_dft(x);
      double err = 0.0;
      for (std::size_t k = 0; k < l; ++k) err = std::max(err, std::abs(got[k] - want[k]));
      report_err(rel(err, max_abs(want)));
    }
  });
  rec.property("inverse_round_trip", 1e-12, [&](auto report_err) {
    for (std::size_t l : lengths) {
      const auto x = signal(l);
      const FftPlan<double> plan(l);
      const auto back = plan.inverse(plan.forward(x));
      double err = 0.0;
      for (std::size_t k = 0; k < l; ++k) err = std::max(err, std::abs(back[k] - x[k]));
      report_err(rel(err, max_abs(x)));
    }
  });
  rec.property("parseval", 1e-12, [&](auto report_err) {
    for (std::size_t l : lengths) {
      const auto x = signal(l);
      const auto f = FftPlan<double>(l).forward(x);
      long double ex = 0.0L, ef = 0.0L;
      for (const cd& v : x) ex += std::norm(v);
      for (const cd& v : f) ef += std::norm(v);
      ef /= static_cast<long double>(l);
      report_err(static_cast<double>(std::abs(ex - ef) / ex));
    }
  });
  rec.property("linearity", 1e-12, [&](auto report_err) {
    for (std::size_t l : lengths) {
      const auto x = signal(l), y = signal(l);
      const cd a(rng.uniform(-2, 2), rng.uniform(-2, 2)), b(rng.uniform(-2, 2), 0.0);
      std::vector<cd> comb(l);
      for (std::size_t i = 0; i < l; ++i) comb[i] = a * x[i] + b * y[i];
      const FftPlan<double> plan(l);
      const auto fx = plan.forward(x), fy = plan.forward(y), fc = plan.forward(comb);
      double err = 0.0, ref = 0.0;
      for (std::size_t k = 0; k < l; ++k) {
        const cd want = a * fx[k] + b * fy[k];
        err = std::max(err, std::abs(fc[k] - want));
        ref = std::max(ref, std::abs(want));
      }
      report_err(rel(err, ref));
    }
  });
  rec.property("convolution_theorem", 1e-10, [&](auto report_err) {
    for (std::size_t l : lengths) {
      std::vector<double> z(l), v(l);
      for (auto& e : z) e = rng.uniform(-1, 1);
      for (auto& e : v) e = rng.uniform(-1, 1);
      const auto conv = circular_convolve(z, v);
      const auto corr = circular_correlate(z, v);
      double err = 0.0, ref = 0.0;
      for (std::size_t i = 0; i < l; ++i) {
        double c = 0.0, r = 0.0;
        for (std::size_t j = 0; j < l; ++j) {
          c += z[(i + l - j) % l] * v[j];
          r += z[(j + l - i) % l] * v[j];
        }
        err = std::max({err, std::abs(conv[i] - c), std::abs(corr[i] - r)});
        ref = std::max({ref, std::abs(c), std::abs(r)});
      }
      report_err(rel(err, std::max(ref, 1.0)));
    }
  });
}

void circulant_suite(VerifyReport& report, std::uint64_t seed) {
  Recorder rec(report, "circulant");
  rec.property("path_equivalence", 1e-8, [&](auto report_err) {
    for (std::uint64_t s = 0; s < 5; ++s) {
      Rng rng(mix(seed, 100 + s));
      for (std::size_t n : kPathGrid)
        for (std::size_t dh : {1u, 4u})
          for (Orientation o : kOrients) {
            const Tensor w = softmax_col(rand(n, 1, rng, 3.0));
            const Tensor v = rand(n, dh, rng);
            const Tensor e = cat_forward_explicit(w, o, v);
            const Tensor g = cat_forward_gather(w, o, v);
            const Tensor f = cat_forward_fft(w, o, v);
            report_err(std::max({max_rel_diff(g, e), max_rel_diff(f, e), max_rel_diff(f, g)}));
          }
    }
  });
  const std::size_t grid[] = {1, 2, 3, 5, 8, 16, 100, 196, 256};
  rec.property("softmax_circulant_commutation", 1e-10, [&](auto report_err) {
    Rng rng(mix(seed, 2));
    for (std::size_t n : grid)
      for (Orientation o : kOrients) {
        const Tensor z = rand(n, 1, rng, 4.0);
        report_err(max_abs_diff(softmax_rows(materialize_circulant(z, o)),
                                materialize_circulant(softmax_col(z), o)));
      }
  });
  rec.property("row_stochastic", 1e-10, [&](auto report_err) {
    Rng rng(mix(seed, 3));
    for (std::size_t n : grid)
      for (Orientation o : kOrients) {
        const Tensor m = materialize_circulant(softmax_col(rand(n, 1, rng, 4.0)), o);
        for (std::size_t i = 0; i < n; ++i) {
          long double total = 0.0L;
          for (std::size_t j = 0; j < n; ++j) {
            total += m(i, j);
            if (m(i, j) < 0.0) report_err(INFINITY);
          }
          report_err(static_cast<double>(std::abs(total - 1.0L)));
        }
      }
  });
  // Largest single allocation relative to N^2; below 1 means no N x N block.
  rec.property("gather_fft_allocate_no_n_squared_block", 0.5, [&](auto report_err) {
    Rng rng(mix(seed, 4));
    for (std::size_t n : {64u, 256u, 1024u})
      for (CatPath path : {CatPath::kGather, CatPath::kFft}) {
        const Tensor w = softmax_col(rand(n, 1, rng));
        const Tensor v = rand(n, 4, rng);
        HighWaterScope scope;
        (void)cat_forward(w, Orientation::kColShift, v, path);
        report_err(static_cast<double>(scope.largest_block()) / static_cast<double>(n * n));
      }
  });
  rec.property("explicit_allocates_n_squared_block", 0.0, [&](auto report_err) {
    Rng rng(mix(seed, 5));
    for (std::size_t n : {64u, 256u}) {
      const Tensor w = softmax_col(rand(n, 1, rng));
      const Tensor v = rand(n, 4, rng);
      HighWaterScope scope;
      (void)cat_forward_explicit(w, Orientation::kColShift, v);
      report_err(scope.largest_block() >= static_cast<std::int64_t>(n * n) ? 0.0 : 1.0);
    }
  });
  rec.property("coefficient_counts", 0.0, [&](auto report_err) {
    for (std::size_t n : {1u, 196u, 256u})
      for (std::size_t h : {1u, 12u, 16u}) {
        report_err(std::abs(static_cast<double>(count_attention_coefficients(n, h, Mechanism::kCat)) -
                            static_cast<double>(h * n)));
        report_err(std::abs(
            static_cast<double>(count_attention_coefficients(n, h, Mechanism::kAttention)) -
            static_cast<double>(h * n * n)));
      }
  });
}

constexpr MixerKind kKinds[] = {MixerKind::kAttention, MixerKind::kCat,   MixerKind::kAvgKeyQkv,
                                MixerKind::kQOnly,     MixerKind::kVOnly, MixerKind::kGqa};

void variants_suite(VerifyReport& report, std::uint64_t seed) {
  Recorder rec(report, "variants");
  struct Dims {
    std::size_t d, h, n;
  };
  const Dims grid[] = {{8, 2, 4}, {64, 4, 32}, {768, 12, 196}, {1024, 16, 256}};
  rec.property("param_count_audit", 0.0, [&](auto report_err) {
    Rng rng(mix(seed, 10));
    for (const Dims& g : grid) {
      const double k = g.h % 4 == 0 ? 0.25 : 0.5;
      for (MixerKind kind : kKinds) {
        const MixerParams p = init_mixer(kind, g.d, g.h, g.n, k, rng, 0.02);
        report_err(std::abs(static_cast<double>(scalar_count(p)) -
                            static_cast<double>(param_count(kind, g.d, g.h, g.n, k))));
      }
    }
  });
  rec.property("cat_alter_pair_average", 0.0, [&](auto report_err) {
    for (const Dims& g : grid) {
      const double pair = static_cast<double>(param_count(MixerKind::kAttention, g.d, g.h, g.n) +
                                              param_count(MixerKind::kCat, g.d, g.h, g.n));
      const double closed = static_cast<double>((2 * g.d + g.h / 2) * g.d);
      report_err(std::abs(pair / 2.0 - closed));
      report_err(std::abs(static_cast<double>(param_count("cat-alter", g.d, g.h, g.n)) - closed));
    }
  });
  rec.property("gqa_ratio_one_equals_attention", 1e-10, [&](auto report_err) {
    Rng rng(mix(seed, 11));
    for (bool causal : {false, true}) {
      const GqaParams g =
          std::get<GqaParams>(init_mixer(MixerKind::kGqa, 8, 4, 7, 1.0, rng, 0.5));
      const Tensor x = rand(7, 8, rng);
      MixerOptions o{4};
      o.causal = causal;
      report_err(max_rel_diff(variant_forward(x, g, o),
                              standard_attention_forward(x, {g.w_q, g.w_k, g.w_v}, 4, causal)));
    }
  });
  rec.property("cat_variant_is_multihead_cat", 0.0, [&](auto report_err) {
    Rng rng(mix(seed, 12));
    const MixerParams p = init_mixer(MixerKind::kCat, 8, 2, 9, 1.0, rng, 0.5);
    const Tensor x = rand(9, 8, rng);
    for (CatPath path : kPaths)
      report_err(max_abs_diff(variant_forward(x, p, {2, path}),
                              multihead_cat_forward(x, std::get<CatParams>(p), 2, {path})));
  });
  rec.property("all_variants_finite", 0.0, [&](auto report_err) {
    Rng rng(mix(seed, 13));
    for (MixerKind kind : kKinds) {
      const MixerParams p = init_mixer(kind, 8, 2, 6, 0.5, rng, 0.5);
      report_err(variant_forward(rand(6, 8, rng), p, {2}).all_finite() ? 0.0 : 1.0);
    }
  });
}

ModelConfig tiny_model(const std::string& mixer, Objective objective) {
  ModelConfig c;
  c.n_layers = 2;
  c.d = 8;
  c.heads = 2;
  c.n_max = 6;
  c.schedule = build_schedule(mixer, 2);
  c.objective = objective;
  c.pooling = objective == Objective::kClassification ? Pooling::kAvg : Pooling::kNone;
  c.input_vocab = 5;
  c.outputs = 3;
  return c;
}

void gradients_suite(VerifyReport& report, std::uint64_t seed) {
  Recorder rec(report, "gradients");
  const std::size_t n = 6, d = 4, h = 2;
  auto check_mixer = [&](MixerKind kind, CatPath path, bool causal, auto report_err) {
    for (std::uint64_t s = 0; s < 3; ++s) {
      Rng rng(mix(seed, 200 + s));
      const MixerParams p = init_mixer(kind, d, h, n, 0.5, rng, 0.7);
      std::vector<Tensor> at = {rand(n, d, rng)};
      for (const auto& [name, t] : named_tensors(p)) at.push_back(t);
      MixerOptions o{h, path};
      o.causal = causal;
      const auto r = finite_diff_check(
          [&](Tape& tape, std::span<const Var> v) {
            MixerVars bound = bind(tape, p, false);
            std::size_t i = 1;
            std::visit([&](auto& m) { m.for_each([&](const char*, Var& slot) { slot = v[i++]; }); },
                       bound);
            return mixer_forward(v[0], bound, o);
          },
          at, 1e-5, 1e-4);
      report_err(r.max_rel_error);
    }
  };
  for (MixerKind kind : kKinds) {
    if (kind == MixerKind::kCat) {
      for (CatPath path : kPaths)
        rec.property("cat_" + std::string(to_string(path)), 1e-4, [&](auto report_err) {
          for (bool causal : {false, true}) check_mixer(kind, path, causal, report_err);
        });
      continue;
    }
    rec.property(std::string(to_string(kind)), 1e-4, [&](auto report_err) {
      check_mixer(kind, CatPath::kFft, false, report_err);
      if (kind != MixerKind::kAvgKeyQkv) check_mixer(kind, CatPath::kFft, true, report_err);
    });
  }
  rec.property("model_2_block", 1e-4, [&](auto report_err) {
    for (const char* mixer : {"attention", "cat", "cat-alter"})
      for (std::uint64_t s = 0; s < 3; ++s) {
        const ModelConfig c = tiny_model(mixer, Objective::kMaskedLm);
        const ModelParams p = init_model(c, mix(seed, 300 + s));
        const ModelInput in{{1, 4, 0, 2, 3, 1}, {}};
        const Example ex{in.tokens, {1, 3, 4}, {0, 2, 1}};
        const auto r = finite_diff_check(
            [&](Tape& tape, std::span<const Var> v) {
              ModelVars vars = bind(tape, p, false);
              rebind(vars, v);
              return example_loss_sum(model_forward(tape, in, c, vars), ex);
            },
            flatten(p), 1e-5, 1e-4);
        report_err(r.max_rel_error);
      }
  });
}

// Largest change among rows before the first perturbed position.
double prefix_change(const Tensor& a, const Tensor& b, std::size_t rows) {
  double err = 0.0;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t c = 0; c < a.cols(); ++c) {
      if (a(i, c) != b(i, c)) err = std::max(err, std::abs(a(i, c) - b(i, c)));
      if (std::isnan(a(i, c)) != std::isnan(b(i, c))) err = INFINITY;
    }
  return err;
}

void causal_suite(VerifyReport& report, std::uint64_t seed) {
  Recorder rec(report, "causal");
  const std::size_t n = 8, d = 8, h = 2;
  for (MixerKind kind : kKinds) {
    if (kind == MixerKind::kAvgKeyQkv) continue;
    const std::vector<CatPath> paths =
        kind == MixerKind::kAttention || kind == MixerKind::kGqa
            ? std::vector<CatPath>{CatPath::kFft}
            : std::vector<CatPath>{CatPath::kExplicit, CatPath::kGather, CatPath::kFft};
    rec.property("layer_" + std::string(to_string(kind)), 0.0, [&](auto report_err) {
      Rng rng(mix(seed, 400 + static_cast<std::uint64_t>(kind)));
      const MixerParams p = init_mixer(kind, d, h, n, 0.5, rng, 0.7);
      const Tensor x = rand(n, d, rng);
      for (CatPath path : paths) {
        MixerOptions o{h, path};
        o.causal = true;
        const Tensor y = variant_forward(x, p, o);
        for (std::size_t j = 1; j < n; ++j) {
          std::vector<double> px = x.to_vector();
          for (std::size_t r = j; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) px[r * d + c] += rng.uniform(-5, 5);
          report_err(prefix_change(variant_forward(Tensor(x.shape(), px), p, o), y, j));
        }
      }
    });
  }
  rec.property("model_causal_lm", 0.0, [&](auto report_err) {
    Rng rng(mix(seed, 450));
    for (const char* mixer : {"attention", "cat", "cat-alter"})
      for (CatPath path : kPaths) {
        ModelConfig c = tiny_model(mixer, Objective::kCausalLm);
        c.path = path;
        const ModelParams p = init_model(c, mix(seed, 451));
        std::vector<std::size_t> tokens(c.n_max);
        for (auto& t : tokens) t = rng.below(c.input_vocab);
        const Tensor y = model_logits({tokens, {}}, c, p);
        for (std::size_t j = 1; j < tokens.size(); ++j) {
          std::vector<std::size_t> changed = tokens;
          for (std::size_t r = j; r < tokens.size(); ++r)
            changed[r] = (changed[r] + 1 + rng.below(c.input_vocab - 1)) % c.input_vocab;
          report_err(prefix_change(model_logits({changed, {}}, c, p), y, j));
        }
      }
  });
}

std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  return perm;
}

Tensor permute_rows(const Tensor& x, const std::vector<std::size_t>& perm) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t c = 0; c < x.cols(); ++c) out[i * x.cols() + c] = x(perm[i], c);
  return Tensor(x.shape(), out);
}

void symmetry_suite(VerifyReport& report, std::uint64_t seed) {
  Recorder rec(report, "symmetry");
  const std::size_t sizes[] = {3, 5, 8, 13, 64};
  auto shift_cases = [&](Orientation o, auto report_err) {
    Rng rng(mix(seed, 500));
    for (std::size_t n : sizes) {
      const Tensor z = rand(n, 1, rng, 2.0), v = rand(n, 3, rng);
      for (long long s = -3; s <= 3; ++s)
        for (CatPath path : kPaths) {
          const Tensor base = cat_forward(softmax_col(z), o, v, path);
          const Tensor moved = cat_forward(softmax_col(roll_rows(z, s)), o, roll_rows(v, s), path);
          report_err(o == Orientation::kRowShift ? max_abs_diff(moved, base)
                                                 : max_abs_diff(moved, roll_rows(base, 2 * s)));
        }
    }
  };
  rec.property("row_shift_invariance", 1e-10,
               [&](auto report_err) { shift_cases(Orientation::kRowShift, report_err); });
  rec.property("col_shift_rolls_by_2s", 1e-10,
               [&](auto report_err) { shift_cases(Orientation::kColShift, report_err); });
  rec.property("attention_permutation_equivariance", 0.0, [&](auto report_err) {
    Rng rng(mix(seed, 510));
    const std::size_t n = 9, d = 8;
    const MixerParams p = init_mixer(MixerKind::kAttention, d, 2, n, 1.0, rng, 0.7);
    const Tensor x = rand(n, d, rng);
    const Tensor y = variant_forward(x, p, {2});
    for (int t = 0; t < 20; ++t) {
      const auto perm = random_permutation(n, rng);
      report_err(max_abs_diff(variant_forward(permute_rows(x, perm), p, {2}), permute_rows(y, perm)));
    }
  });
  rec.property("model_without_positions_permutation_equivariance", 0.0, [&](auto report_err) {
    Rng rng(mix(seed, 520));
    ModelConfig c = tiny_model("attention", Objective::kMaskedLm);
    c.positions = false;
    const ModelParams p = init_model(c, mix(seed, 521));
    std::vector<std::size_t> tokens(c.n_max);
    for (auto& t : tokens) t = rng.below(c.input_vocab);
    const Tensor y = model_logits({tokens, {}}, c, p);
    for (int t = 0; t < 10; ++t) {
      const auto perm = random_permutation(tokens.size(), rng);
      std::vector<std::size_t> moved(tokens.size());
      for (std::size_t i = 0; i < perm.size(); ++i) moved[i] = tokens[perm[i]];
      report_err(max_abs_diff(model_logits({moved, {}}, c, p), permute_rows(y, perm)));
    }
  });
}

}  // namespace

bool VerifyReport::passed() const {
  return std::all_of(properties.begin(), properties.end(),
                     [](const PropertyResult& p) { return p.passed; });
}

nlohmann::json VerifyReport::to_json() const {
  nlohmann::json props = nlohmann::json::array();
  for (const PropertyResult& p : properties)
    props.push_back({{"suite", p.suite},
                     {"name", p.name},
                     {"tolerance", p.tolerance},
                     {"worst_error", std::isfinite(p.worst_error) ? nlohmann::json(p.worst_error)
                                                                  : nlohmann::json(nullptr)},
                     {"cases", p.cases},
                     {"passed", p.passed}});
  return {{"kind", "circat-verify-report"},
          {"version", 1},
          {"suite", suite},
          {"seed", seed},
          {"passed", passed()},
          {"properties", props}};
}

const std::vector<std::string>& verify_suites() {
  static const std::vector<std::string> names = {"all",       "fft",    "circulant", "variants",
                                                 "gradients", "causal", "symmetry"};
  return names;
}

bool is_verify_suite(std::string_view name) {
  const auto& s = verify_suites();
  return std::find(s.begin(), s.end(), name) != s.end();
}

VerifyReport run_verify(std::string_view suite, std::uint64_t seed) {
  require(is_verify_suite(suite), ErrorCode::kInvalidArgument,
          "unknown verify suite '" + std::string(suite) + "'");
  VerifyReport report{std::string(suite), seed, {}};
  const bool all = suite == "all";
  if (all || suite == "fft") fft_suite(report, seed);
  if (all || suite == "circulant") circulant_suite(report, seed);
  if (all || suite == "variants") variants_suite(report, seed);
  if (all || suite == "gradients") gradients_suite(report, seed);
  if (all || suite == "causal") causal_suite(report, seed);
  if (all || suite == "symmetry") symmetry_suite(report, seed);
  return report;
}

}  // namespace circat
