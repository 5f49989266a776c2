// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.


#include "circat/circat.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include "circat/bench.hpp"
#include "circat/circulant.hpp"
#include "circat/error.hpp"
#include "circat/export.hpp"
#include "circat/fft.hpp"
#include "circat/toy.hpp"
#include "circat/variants.hpp"
#include "circat/verify.hpp"

struct circat_tensor {
  circat::Tensor value;
};

struct circat_bench_results {
  std::vector<circat::BenchResult> rows;
};

struct circat_trainer {
  circat::ToyRun run;
  circat::TrainResult last;
};

struct circat_model {
  circat::TrainState state;
};

namespace {

thread_local std::string g_last_error;

circat_status to_status(circat::ErrorCode code) {
  switch (code) {
    case circat::ErrorCode::kShapeMismatch: return CIRCAT_ERR_SHAPE;
    case circat::ErrorCode::kNonFinite: return CIRCAT_ERR_NON_FINITE;
    case circat::ErrorCode::kInvalidArgument: return CIRCAT_ERR_INVALID_ARGUMENT;
    case circat::ErrorCode::kIo: return CIRCAT_ERR_IO;
    case circat::ErrorCode::kUnsupported: return CIRCAT_ERR_UNSUPPORTED;
    case circat::ErrorCode::kInternal: return CIRCAT_ERR_INTERNAL;
  }
  return CIRCAT_ERR_INTERNAL;
}

template <class F>
circat_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return CIRCAT_OK;
  } catch (const circat::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("invalid JSON: ") + e.what();
    return CIRCAT_ERR_INVALID_ARGUMENT;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return CIRCAT_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CIRCAT_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  circat::require(p != nullptr, circat::ErrorCode::kInvalidArgument,
                  std::string(what) + " must not be null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* circat_version(void) { return "0.1.0"; }

const char* circat_last_error(void) { return g_last_error.c_str(); }

const char* circat_status_name(circat_status status) {
  switch (status) {
    case CIRCAT_OK: return "ok";
    case CIRCAT_ERR_SHAPE: return "shape_mismatch";
    case CIRCAT_ERR_NON_FINITE: return "non_finite";
    case CIRCAT_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case CIRCAT_ERR_IO: return "io";
    case CIRCAT_ERR_UNSUPPORTED: return "unsupported";
    case CIRCAT_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void circat_string_free(char* s) { std::free(s); }

circat_status circat_tensor_create(const size_t* dims, size_t rank, const double* data,
                                   circat_tensor** out) {
  return guarded([&] {
    need(dims, "dims");
    need(out, "out");
    circat::Shape shape(std::vector<std::size_t>(dims, dims + rank));
    need(data, "data");
    *out = new circat_tensor{circat::Tensor(shape, std::span<const double>(data, shape.numel()))};
  });
}

void circat_tensor_free(circat_tensor* t) { delete t; }

circat_status circat_tensor_shape(const circat_tensor* t, size_t* dims, size_t capacity,
                                  size_t* rank) {
  return guarded([&] {
    need(t, "tensor");
    need(rank, "rank");
    const auto& d = t->value.shape().dims();
    *rank = d.size();
    for (std::size_t i = 0; i < d.size() && i < capacity; ++i) dims[i] = d[i];
  });
}

size_t circat_tensor_numel(const circat_tensor* t) { return t ? t->value.size() : 0; }

circat_status circat_tensor_read(const circat_tensor* t, double* out, size_t capacity) {
  return guarded([&] {
    need(t, "tensor");
    need(out, "out");
    circat::require(capacity >= t->value.size(), circat::ErrorCode::kShapeMismatch,
                    "circat_tensor_read: capacity " + std::to_string(capacity) + " below " +
                        std::to_string(t->value.size()));
    std::copy(t->value.data().begin(), t->value.data().end(), out);
  });
}

circat_status circat_cat_forward(const circat_tensor* x, const circat_tensor* w_a,
                                 const circat_tensor* w_v, size_t heads, const char* path,
                                 const char* orientation, int causal, circat_tensor** out) {
  return guarded([&] {
    need(x, "x");
    need(w_a, "w_a");
    need(w_v, "w_v");
    need(path, "path");
    need(orientation, "orientation");
    need(out, "out");
    circat::CatOptions o;
    o.path = circat::parse_cat_path(path);
    o.orientation = circat::parse_orientation(orientation);
    o.causal = causal != 0;
    circat::Tensor y =
        circat::multihead_cat_forward(x->value, {w_a->value, w_v->value}, heads, o);
    *out = new circat_tensor{std::move(y)};
  });
}

circat_status circat_circular_convolve(const double* z, const double* v, size_t n, int correlate,
                                       double* out) {
  return guarded([&] {
    need(z, "z");
    need(v, "v");
    need(out, "out");
    circat::require(n >= 1, circat::ErrorCode::kInvalidArgument, "length must be >= 1");
    const std::span<const double> zs(z, n), vs(v, n);
    const auto r = correlate ? circat::circular_correlate(zs, vs) : circat::circular_convolve(zs, vs);
    std::copy(r.begin(), r.end(), out);
  });
}

circat_status circat_cost_model(double n, double d, double heads, double k,
                                circat_projection_cost* out) {
  return guarded([&] {
    need(out, "out");
    const circat::ProjectionCost c = circat::projection_cost(n, d, heads, k);
    *out = {c.gqa_flops, c.cat_flops, c.gqa_inner, c.cat_inner, c.ratio};
  });
}

circat_status circat_param_count(const char* mechanism, size_t d, size_t heads, size_t n,
                                 double gqa_ratio, size_t* out) {
  return guarded([&] {
    need(mechanism, "mechanism");
    need(out, "out");
    *out = circat::param_count(std::string_view(mechanism), d, heads, n, gqa_ratio);
  });
}

circat_status circat_verify(const char* suite, uint64_t seed, char** report_json, int* passed) {
  return guarded([&] {
    need(suite, "suite");
    need(report_json, "report_json");
    const circat::VerifyReport r = circat::run_verify(suite, seed);
    *report_json = dup_string(r.to_json().dump(2));
    if (passed) *passed = r.passed() ? 1 : 0;
  });
}

circat_status circat_bench_sweep(const circat_bench_case* base, const size_t* n_list, size_t count,
                                 circat_bench_results** out) {
  return guarded([&] {
    need(base, "case");
    need(out, "out");
    circat::require(count >= 1 && n_list != nullptr, circat::ErrorCode::kInvalidArgument,
                    "bench: empty N list");
    circat::BenchCase c;
    c.mechanism = circat::parse_mechanism(base->mechanism ? base->mechanism : "cat");
    c.path = circat::parse_cat_path(base->path ? base->path : "fft");
    c.precision = circat::parse_precision(base->precision ? base->precision : "float64");
    c.measure = circat::parse_measure(base->measure ? base->measure : "forward");
    c.d = base->d;
    c.heads = base->heads;
    c.reps = base->reps;
    c.warmup = base->warmup;
    c.seed = base->seed;
    c.n = n_list[0];
    circat::validate(c);
    auto r = std::make_unique<circat_bench_results>();
    r->rows = circat::scaling_sweep(c, std::span<const std::size_t>(n_list, count)).results;
    *out = r.release();
  });
}

size_t circat_bench_size(const circat_bench_results* r) { return r ? r->rows.size() : 0; }

circat_status circat_bench_row_at(const circat_bench_results* r, size_t i, circat_bench_row* out) {
  return guarded([&] {
    need(r, "results");
    need(out, "out");
    circat::require(i < r->rows.size(), circat::ErrorCode::kInvalidArgument, "row out of range");
    const circat::BenchResult& b = r->rows[i];
    *out = {b.bench.n,         b.bench.d,          b.bench.heads,   b.bench.reps,
            b.time.mean_ns,    b.time.median_ns,   b.time.min_ns,   b.peak_scalars,
            b.attn_coeffs};
  });
}

circat_status circat_bench_write_csv(const circat_bench_results* r, const char* path) {
  return guarded([&] {
    need(r, "results");
    need(path, "path");
    circat::write_csv(r->rows, path);
  });
}

void circat_bench_free(circat_bench_results* r) { delete r; }

circat_status circat_trainer_defaults(char** config_json) {
  return guarded([&] {
    need(config_json, "config_json");
    *config_json = dup_string(circat::to_json(circat::ToyRunConfig{}).dump());
  });
}

circat_status circat_trainer_create(const char* config_json, circat_trainer** out) {
  return guarded([&] {
    need(out, "out");
    const nlohmann::json j = config_json && *config_json ? nlohmann::json::parse(config_json)
                                                         : nlohmann::json::object();
    auto t = std::make_unique<circat_trainer>();
    t->run = circat::prepare_toy_run(circat::toy_config_from_json(j));
    *out = t.release();
  });
}

circat_status circat_trainer_config(const circat_trainer* t, char** config_json) {
  return guarded([&] {
    need(t, "trainer");
    need(config_json, "config_json");
    *config_json = dup_string(circat::to_json(t->run.config).dump());
  });
}

circat_status circat_trainer_run(circat_trainer* t, circat_progress_fn progress, void* user,
                                 circat_train_summary* out) {
  circat_status status = guarded([&] {
    need(t, "trainer");
    t->last = circat::run_toy(t->run, [&](const circat::TrainPoint& p) {
      if (progress) progress(p.step, p.loss, user);
    });
    if (out) {
      *out = {t->last.steps_done, t->last.final_loss,
              t->last.curve.empty() ? t->last.final_loss : t->last.curve.back().loss,
              circat::scalar_count(t->run.state.params), t->last.diverged ? 1 : 0};
    }
  });
  if (status == CIRCAT_OK && t->last.diverged) {
    g_last_error = t->last.error;
    status = CIRCAT_ERR_NON_FINITE;
  }
  return status;
}

circat_status circat_trainer_save(const circat_trainer* t, const char* path) {
  return guarded([&] {
    need(t, "trainer");
    need(path, "path");
    circat::save_checkpoint(path, t->run.state);
  });
}

void circat_trainer_free(circat_trainer* t) { delete t; }

circat_status circat_model_load(const char* path, circat_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new circat_model{circat::load_checkpoint(path)};
  });
}

circat_status circat_model_info(const circat_model* m, char** info_json) {
  return guarded([&] {
    need(m, "model");
    need(info_json, "info_json");
    nlohmann::json j = {{"config", m->state.config},
                        {"seed", m->state.seed},
                        {"step", m->state.optim.step},
                        {"parameter_count", circat::scalar_count(m->state.params)}};
    *info_json = dup_string(j.dump());
  });
}

circat_status circat_model_export_maps(const circat_model* m, const size_t* tokens,
                                       size_t token_count, uint64_t seed, const char* out_dir,
                                       size_t cap, char** summary_json) {
  return guarded([&] {
    need(m, "model");
    need(out_dir, "out_dir");
    circat::ModelInput input;
    if (token_count > 0) {
      need(tokens, "tokens");
      circat::require(m->state.config.input_dim == 0, circat::ErrorCode::kInvalidArgument,
                      "export: this model takes patch inputs, not tokens");
      input.tokens.assign(tokens, tokens + token_count);
    } else {
      input = circat::random_model_input(m->state.config, seed);
    }
    const circat::MapExport ex =
        circat::export_maps(m->state.config, m->state.params, input, out_dir, cap);
    if (summary_json) {
      nlohmann::json files = nlohmann::json::array();
      for (const auto& f : ex.files) files.push_back(f.string());
      nlohmann::json per_layer = nlohmann::json::array();
      for (std::size_t l = 0; l < ex.layers; ++l)
        per_layer.push_back({{"layer", l},
                             {"mixer", std::string(circat::to_string(m->state.config.schedule[l]))},
                             {"maps", ex.maps[l].size()}});
      nlohmann::json tok = nlohmann::json::array();
      for (std::size_t t : input.tokens) tok.push_back(t);
      *summary_json = dup_string(nlohmann::json{{"n", ex.n},
                                                {"layers", per_layer},
                                                {"input_tokens", tok},
                                                {"mosaic",
                                                 {{"path", ex.mosaic.string()},
                                                  {"width", ex.tiles_per_row * ex.n},
                                                  {"height", ex.layers * ex.n},
                                                  {"tiles_per_row", ex.tiles_per_row},
                                                  {"tile_rows", ex.layers}}},
                                                {"raw", ex.raw.string()},
                                                {"files", files}}
                                     .dump());
    }
  });
}

void circat_model_free(circat_model* m) { delete m; }

}  // extern "C"
