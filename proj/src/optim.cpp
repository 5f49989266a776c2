// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.


#include "circat/optim.hpp"

#include <cmath>
#include <string>

#include "circat/error.hpp"

namespace circat {

AdamState AdamState::zeros_like(std::span<const Tensor> params) {
  AdamState s;
  for (const Tensor& p : params) {
    s.m.push_back(Tensor::zeros(p.shape()));
    s.v.push_back(Tensor::zeros(p.shape()));
  }
  return s;
}

double global_norm(std::span<const Tensor> grads) {
  long double acc = 0.0L;
  for (const Tensor& g : grads)
    for (double x : g.data()) acc += static_cast<long double>(x) * x;
  return static_cast<double>(std::sqrt(acc));
}

double adamw_update(std::vector<Tensor>& params, std::span<const Tensor> grads, AdamState& state,
                    const AdamWConfig& config) {
  require(grads.size() == params.size() && state.m.size() == params.size() &&
              state.v.size() == params.size(),
          ErrorCode::kShapeMismatch, "adamw_update: parameter, gradient and moment counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(grads[i].shape() == params[i].shape() && state.m[i].shape() == params[i].shape(),
            ErrorCode::kShapeMismatch,
            "adamw_update: shape mismatch at parameter " + std::to_string(i));
    check_finite(grads[i], "adamw_update gradient");
  }
  const double norm = global_norm(grads);
  const double clip =
      config.max_grad_norm > 0.0 && norm > config.max_grad_norm ? config.max_grad_norm / norm : 1.0;

  const std::size_t t = state.step + 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto p = params[i].data();
    const auto g = grads[i].data();
    const auto m0 = state.m[i].data();
    const auto v0 = state.v[i].data();
    Buffer np(p.size()), nm(p.size()), nv(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g[j] * clip;
      nm[j] = config.beta1 * m0[j] + (1.0 - config.beta1) * gj;
      nv[j] = config.beta2 * v0[j] + (1.0 - config.beta2) * gj * gj;
      const double step = (nm[j] / bc1) / (std::sqrt(nv[j] / bc2) + config.eps);
      np[j] = p[j] - config.lr * config.weight_decay * p[j] - config.lr * step;
    }
    const Shape shape = params[i].shape();
    params[i] = Tensor(shape, std::move(np));
    state.m[i] = Tensor(shape, std::move(nm));
    state.v[i] = Tensor(shape, std::move(nv));
  }
  state.step = t;
  return norm;
}

}  // namespace circat
