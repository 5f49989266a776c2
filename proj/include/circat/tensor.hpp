// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "circat/error.hpp"
#include "circat/memory.hpp"

namespace circat {

class Rng;

class Shape {
 public:
  Shape() : dims_{1} {}
  Shape(std::initializer_list<std::size_t> dims);
  explicit Shape(std::vector<std::size_t> dims);

  std::size_t rank() const { return dims_.size(); }
  std::size_t operator[](std::size_t axis) const { return dims_.at(axis); }
  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t numel() const;

  // Matrix view: rank-1 shapes are column vectors.
  std::size_t rows() const { return dims_[0]; }
  std::size_t cols() const { return dims_.size() >= 2 ? dims_[1] : 1; }

  std::string to_string() const;

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::vector<std::size_t> dims_;
};

// Immutable dense row-major array of doubles. Copies share storage.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, Buffer data);
  Tensor(Shape shape, std::span<const double> data);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor column(std::span<const double> values);
  static Tensor identity(std::size_t n);
  static Tensor normal(Shape shape, Rng& rng, double stddev = 1.0);
  static Tensor uniform(Shape shape, Rng& rng, double lo, double hi);

  const Shape& shape() const { return shape_; }
  std::size_t rows() const { return shape_.rows(); }
  std::size_t cols() const { return shape_.cols(); }
  std::size_t size() const { return data_->size(); }

  std::span<const double> data() const { return {data_->data(), data_->size()}; }
  double operator[](std::size_t i) const { return (*data_)[i]; }
  double operator()(std::size_t r, std::size_t c) const { return (*data_)[r * cols() + c]; }

  bool all_finite() const;
  std::vector<double> to_vector() const { return {data_->begin(), data_->end()}; }

 private:
  Shape shape_;
  std::shared_ptr<const Buffer> data_;
};

// Throws kNonFinite naming `what` when any entry is NaN or Inf.
void check_finite(const Tensor& t, const char* what);

double max_abs_diff(const Tensor& a, const Tensor& b);
// max |a-b| / max(max|b|, tiny); shapes must agree.
double max_rel_diff(const Tensor& a, const Tensor& b);

// Plain (untracked) kernels. Gradient-recording versions live in autograd.hpp.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor softmax_rows(const Tensor& a);
// Softmax restricted to columns j <= i in row i; other entries are exactly 0.
Tensor softmax_rows_causal(const Tensor& a);
Tensor mean_rows(const Tensor& a);
Tensor roll_rows(const Tensor& a, long long shift);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor reshape(const Tensor& a, Shape shape);
double sum(const Tensor& a);

}  // namespace circat
