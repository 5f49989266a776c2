// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.


#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "circat/circulant.hpp"

namespace circat {

enum class Measure { kForward, kForwardBackward };
enum class Precision { kFloat64, kFloat32 };

std::string_view to_string(Measure m);
Measure parse_measure(std::string_view s);
std::string_view to_string(Precision p);
Precision parse_precision(std::string_view s);
std::string_view to_string(Mechanism m);
Mechanism parse_mechanism(std::string_view s);

// Supported: attention with the explicit path; CAT with every path. float32
// covers CAT forward only.
struct BenchCase {
  Mechanism mechanism = Mechanism::kCat;
  CatPath path = CatPath::kFft;
  std::size_t n = 256;
  std::size_t d = 64;
  std::size_t heads = 4;
  Precision precision = Precision::kFloat64;
  std::size_t reps = 10;
  std::size_t warmup = 1;
  Measure measure = Measure::kForward;
  std::uint64_t seed = 0;
};

struct Timing {
  double mean_ns = 0.0;
  double median_ns = 0.0;
  double min_ns = 0.0;
};

struct BenchResult {
  BenchCase bench;
  Timing time;
  std::int64_t peak_scalars = 0;
  std::size_t attn_coeffs = 0;
};

// Throws kUnsupported for unsupported combinations, kInvalidArgument for
// reps < 3, warmup < 1 or bad shapes.
void validate(const BenchCase& c);

// Runs `body` warmup times, then times `reps` calls on a monotonic clock.
Timing time_body(const std::function<void()>& body, std::size_t reps, std::size_t warmup);

// One layer (projections + mixing) on random inputs. peak_scalars is the
// transient high-water mark of one extra untimed run.
BenchResult run_bench(const BenchCase& c);

struct ScalingRatio {
  std::size_t n_from = 0;
  std::size_t n_to = 0;
  double ratio = 0.0;  // median(n_to) / median(n_from)
};

struct Sweep {
  std::vector<BenchResult> results;
  std::vector<ScalingRatio> ratios;  // consecutive pairs of results
};

std::vector<ScalingRatio> scaling_ratios(std::span<const BenchResult> results);

// `base` supplies everything but N. n_list must be strictly ascending.
Sweep scaling_sweep(const BenchCase& base, std::span<const std::size_t> n_list);

struct ProjectionCost {
  double gqa_flops = 0.0;  // 2 N D (D + 2 D K)
  double cat_flops = 0.0;  // 2 N D (D + H)
  double gqa_inner = 0.0;  // D + 2 D K
  double cat_inner = 0.0;  // D + H
  double ratio = 0.0;      // gqa / cat
};

ProjectionCost projection_cost(double n, double d, double heads, double k);

extern const char* const kCsvHeader;

void write_csv(std::span<const BenchResult> results, const std::filesystem::path& path);
std::vector<BenchResult> read_csv(const std::filesystem::path& path);

}  // namespace circat
