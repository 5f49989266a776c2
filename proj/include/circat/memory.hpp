// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

namespace circat {

// Per-thread accounting of live scalars held by library buffers. Used as a
// portable proxy for peak memory: a complex value counts as two scalars, a
// float or double as one.
struct ScalarCounter {
  std::int64_t current = 0;
  std::int64_t peak = 0;
  // Largest single allocation seen since the last reset, in scalars.
  std::int64_t largest_block = 0;

  void add(std::int64_t n) {
    current += n;
    if (current > peak) peak = current;
    if (n > largest_block) largest_block = n;
  }
  void remove(std::int64_t n) { current -= n; }
};

ScalarCounter& scalar_counter();

template <class T>
struct scalars_per_element {
  static constexpr std::int64_t value = 1;
};
template <class T>
struct scalars_per_element<std::complex<T>> {
  static constexpr std::int64_t value = 2;
};

template <class T>
class CountingAllocator {
 public:
  using value_type = T;

  CountingAllocator() noexcept = default;
  template <class U>
  CountingAllocator(const CountingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    scalar_counter().add(static_cast<std::int64_t>(n) * scalars_per_element<T>::value);
    return std::allocator<T>{}.allocate(n);
  }
  void deallocate(T* p, std::size_t n) noexcept {
    scalar_counter().remove(static_cast<std::int64_t>(n) * scalars_per_element<T>::value);
    std::allocator<T>{}.deallocate(p, n);
  }

  template <class U>
  bool operator==(const CountingAllocator<U>&) const noexcept {
    return true;
  }
};

template <class T>
using CountedVector = std::vector<T, CountingAllocator<T>>;

using Buffer = CountedVector<double>;

// Scope that measures the transient high-water mark above the live count at
// construction time.
class HighWaterScope {
 public:
  HighWaterScope();
  std::int64_t transient_peak() const;
  std::int64_t largest_block() const;

 private:
  std::int64_t baseline_;
};

}  // namespace circat
