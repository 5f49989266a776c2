// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "circat/tensor.hpp"

namespace circat {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape
// lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Records one forward pass. Nodes are appended in evaluation order, so the
// node list is already topologically sorted; backward() walks it in reverse.
class Tape {
 public:
  // Receives the gradient of the node's output and accumulates into inputs
  // through Tape::accumulate.
  using BackwardFn = std::function<void(Tape&, std::span<const double>)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Backward is dropped when no input requires a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);

  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
  // Gradient after backward(); zeros for nodes the loss does not reach.
  Tensor grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // For backward rules: add `delta` into the gradient of `v` (no-op when v
  // does not require a gradient).
  void accumulate(Var v, std::span<const double> delta);
  // Mutable gradient buffer of `v`, zero-initialised on first use. Empty
  // span when v does not require a gradient.
  std::span<double> grad_buffer(Var v);

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    Buffer grad;
  };

  std::deque<Node> nodes_;
};

// Recording operations. All inputs must live on the same tape.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
// x[N×D] + bias[1×D] broadcast over rows.
Var add_row(Var x, Var bias);
// Sum of all entries as a 1×1 tensor.
Var sum(Var a);
Var softmax_rows(Var a, bool causal = false);
Var mean_rows(Var a);
Var roll_rows(Var a, long long shift);
Var transpose(Var a);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var concat_cols(std::span<const Var> parts);
// Rows of `table` selected by `indices` (embedding lookup).
Var gather_rows(Var table, std::span<const std::size_t> indices);
// tanh-approximated GELU.
Var gelu(Var a);
// Row-wise layer normalisation with learned gain/bias of shape 1×D.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
// Sum over selected rows of -log softmax(logits[row])[label].
Var cross_entropy_sum(Var logits, std::span<const std::size_t> rows,
                      std::span<const std::size_t> labels);

struct GradCheckReport {
  bool passed = false;
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

using MultiFn = std::function<Var(Tape&, std::span<const Var>)>;

// Compares the analytic gradient of sum(f(inputs)) with central differences
// on every coordinate of every input. Error per coordinate is
// |analytic - numeric| / max(1, |analytic|, |numeric|).
// Throws kInvalidArgument when two evaluations of f at the same point differ.
GradCheckReport finite_diff_check(const MultiFn& f, std::span<const Tensor> at, double step,
                                  double tol);
GradCheckReport finite_diff_check(const std::function<Var(Var)>& f, const Tensor& at, double step,
                                  double tol);

}  // namespace circat
