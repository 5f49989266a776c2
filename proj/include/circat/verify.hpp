// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.


#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace circat {

// One checked property. `worst_error` is the largest deviation observed
// over all cases; the property passes when it does not exceed `tolerance`.
struct PropertyResult {
  std::string suite;
  std::string name;
  double tolerance = 0.0;
  double worst_error = 0.0;
  std::size_t cases = 0;
  bool passed = false;
};

struct VerifyReport {
  std::string suite;
  std::uint64_t seed = 0;
  std::vector<PropertyResult> properties;

  bool passed() const;
  nlohmann::json to_json() const;
};

// "all", "fft", "circulant", "variants", "gradients", "causal", "symmetry".
const std::vector<std::string>& verify_suites();
bool is_verify_suite(std::string_view name);

// Deterministic for a given (suite, seed); throws kInvalidArgument for an
// unknown suite.
VerifyReport run_verify(std::string_view suite, std::uint64_t seed);

}  // namespace circat
