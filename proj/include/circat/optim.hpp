// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.


#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "circat/tensor.hpp"

namespace circat {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  // Global gradient-norm clip; <= 0 disables.
  double max_grad_norm = 0.0;
};

// First/second moments mirror the parameter list; `step` counts applied
// updates.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t step = 0;

  static AdamState zeros_like(std::span<const Tensor> params);
};

// sqrt(sum of squares) over every gradient entry.
double global_norm(std::span<const Tensor> grads);

// One AdamW update with decoupled decay:
//   p <- p - lr * wd * p - lr * m_hat / (sqrt(v_hat) + eps).
// Gradients are rescaled first when their global norm exceeds
// max_grad_norm. Returns the pre-clip norm. Throws kNonFinite on a
// non-finite gradient, leaving params and state untouched.
double adamw_update(std::vector<Tensor>& params, std::span<const Tensor> grads, AdamState& state,
                    const AdamWConfig& config);

}  // namespace circat
