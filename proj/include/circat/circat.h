// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.


/* C interface to the circat library. Every function returns a circat_status;
 * on failure circat_last_error() describes the problem (thread-local, valid
 * until the next call on the same thread). Strings returned through char**
 * are owned by the caller and released with circat_string_free. */
#ifndef CIRCAT_CIRCAT_H_
#define CIRCAT_CIRCAT_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CIRCAT_API __declspec(dllexport)
#else
#define CIRCAT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum circat_status {
  CIRCAT_OK = 0,
  CIRCAT_ERR_SHAPE = 1,
  CIRCAT_ERR_NON_FINITE = 2,
  CIRCAT_ERR_INVALID_ARGUMENT = 3,
  CIRCAT_ERR_IO = 4,
  CIRCAT_ERR_UNSUPPORTED = 5,
  CIRCAT_ERR_INTERNAL = 6
} circat_status;

CIRCAT_API const char* circat_version(void);
CIRCAT_API const char* circat_last_error(void);
CIRCAT_API const char* circat_status_name(circat_status status);
CIRCAT_API void circat_string_free(char* s);

/* Dense row-major float64 tensor of rank 1..3. */
typedef struct circat_tensor circat_tensor;

CIRCAT_API circat_status circat_tensor_create(const size_t* dims, size_t rank, const double* data,
                                              circat_tensor** out);
CIRCAT_API void circat_tensor_free(circat_tensor* t);
/* Writes up to `capacity` extents into dims and the rank into *rank. */
CIRCAT_API circat_status circat_tensor_shape(const circat_tensor* t, size_t* dims, size_t capacity,
                                             size_t* rank);
CIRCAT_API size_t circat_tensor_numel(const circat_tensor* t);
CIRCAT_API circat_status circat_tensor_read(const circat_tensor* t, double* out, size_t capacity);

/* Multi-head CAT layer. x is N x D, w_a is D x H, w_v is D x D.
 * path: "explicit" | "gather" | "fft"; orientation: "row_shift" | "col_shift". */
CIRCAT_API circat_status circat_cat_forward(const circat_tensor* x, const circat_tensor* w_a,
                                            const circat_tensor* w_v, size_t heads,
                                            const char* path, const char* orientation, int causal,
                                            circat_tensor** out);

/* out_i = sum_j z[(i - j) mod n] v_j, or z[(j - i) mod n] when correlate != 0. */
CIRCAT_API circat_status circat_circular_convolve(const double* z, const double* v, size_t n,
                                                  int correlate, double* out);

typedef struct circat_projection_cost {
  double gqa_flops;
  double cat_flops;
  double gqa_inner;
  double cat_inner;
  double ratio;
} circat_projection_cost;

CIRCAT_API circat_status circat_cost_model(double n, double d, double heads, double k,
                                           circat_projection_cost* out);

/* mechanism: a mixer name or "cat-alter". */
CIRCAT_API circat_status circat_param_count(const char* mechanism, size_t d, size_t heads,
                                            size_t n, double gqa_ratio, size_t* out);

/* Runs a verification suite; *report_json receives the JSON report and
 * *passed is 1 when every property holds. */
CIRCAT_API circat_status circat_verify(const char* suite, uint64_t seed, char** report_json,
                                       int* passed);

typedef struct circat_bench_case {
  const char* mechanism; /* "attention" | "cat" */
  const char* path;      /* "explicit" | "gather" | "fft" */
  const char* precision; /* "float64" | "float32" */
  const char* measure;   /* "forward" | "forward_backward" */
  size_t n, d, heads, reps, warmup;
  uint64_t seed;
} circat_bench_case;

typedef struct circat_bench_row {
  size_t n, d, heads, reps;
  double time_mean_ns, time_median_ns, time_min_ns;
  int64_t peak_scalars;
  size_t attn_coeffs;
} circat_bench_row;

typedef struct circat_bench_results circat_bench_results;

/* Times `base` at every N of the strictly ascending list. */
CIRCAT_API circat_status circat_bench_sweep(const circat_bench_case* base, const size_t* n_list,
                                            size_t count, circat_bench_results** out);
CIRCAT_API size_t circat_bench_size(const circat_bench_results* r);
CIRCAT_API circat_status circat_bench_row_at(const circat_bench_results* r, size_t i,
                                             circat_bench_row* out);
CIRCAT_API circat_status circat_bench_write_csv(const circat_bench_results* r, const char* path);
CIRCAT_API void circat_bench_free(circat_bench_results* r);

/* Toy training. config_json holds any subset of the run keys documented in
 * docs/schemas/train_config.schema.json; missing keys take defaults. */
typedef struct circat_trainer circat_trainer;

/* Return nonzero to stop training early. */
typedef int (*circat_progress_fn)(size_t step, double loss, void* user);

typedef struct circat_train_summary {
  size_t steps_done;
  double final_loss;
  double last_batch_loss;
  size_t parameter_count;
  int diverged;
} circat_train_summary;

/* Default run configuration as JSON. */
CIRCAT_API circat_status circat_trainer_defaults(char** config_json);
CIRCAT_API circat_status circat_trainer_create(const char* config_json, circat_trainer** out);
/* Fully resolved configuration, defaults included. */
CIRCAT_API circat_status circat_trainer_config(const circat_trainer* t, char** config_json);
/* Returns CIRCAT_ERR_NON_FINITE when training diverged; the summary is
 * filled either way. */
CIRCAT_API circat_status circat_trainer_run(circat_trainer* t, circat_progress_fn progress,
                                            void* user, circat_train_summary* out);
CIRCAT_API circat_status circat_trainer_save(const circat_trainer* t, const char* path);
CIRCAT_API void circat_trainer_free(circat_trainer* t);

/* Trained model loaded from a checkpoint written by circat_trainer_save. */
typedef struct circat_model circat_model;

CIRCAT_API circat_status circat_model_load(const char* path, circat_model** out);
/* Model configuration as JSON. */
CIRCAT_API circat_status circat_model_info(const circat_model* m, char** info_json);
/* Exports per-(layer, head) maps, a mosaic and the raw maps into out_dir.
 * With token_count == 0 the input is drawn from `seed`. *summary_json lists
 * the written files and mosaic geometry. */
CIRCAT_API circat_status circat_model_export_maps(const circat_model* m, const size_t* tokens,
                                                  size_t token_count, uint64_t seed,
                                                  const char* out_dir, size_t cap,
                                                  char** summary_json);
CIRCAT_API void circat_model_free(circat_model* m);

#ifdef __cplusplus
}
#endif

#endif /* CIRCAT_CIRCAT_H_ */
