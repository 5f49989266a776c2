// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include "circat/memory.hpp"

namespace circat {

ScalarCounter& scalar_counter() {
  thread_local ScalarCounter counter;
  return counter;
}

HighWaterScope::HighWaterScope() : baseline_(scalar_counter().current) {
  scalar_counter().peak = baseline_;
  scalar_counter().largest_block = 0;
}

std::int64_t HighWaterScope::transient_peak() const { return scalar_counter().peak - baseline_; }

std::int64_t HighWaterScope::largest_block() const { return scalar_counter().largest_block; }

}  // namespace circat
