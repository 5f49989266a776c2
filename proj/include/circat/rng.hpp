// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <array>
#include <cstdint>

namespace circat {

// Deterministic generator shared by tests, tasks and initialisation.
//
// State is seeded by four successive SplitMix64 outputs of the user seed and
// advanced by xoshiro256** (Blackman & Vigna). uniform() returns the top 53
// bits scaled by 2^-53, so it lies in [0, 1). normal() uses Box-Muller on
// two uniforms, with the first uniform mapped to (0, 1] to avoid log(0);
// it consumes exactly two uniforms per call and caches nothing, so streams
// are reproducible from the algorithm description alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();
  double uniform(double lo, double hi);
  double normal();
  double normal(double mean, double stddev);
  // Uniform integer in [0, bound) by rejection, bound >= 1.
  std::uint64_t below(std::uint64_t bound);
  bool bernoulli(double p);

  static std::uint64_t splitmix64(std::uint64_t& state);

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace circat
