// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include "circat/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "circat/rng.hpp"

namespace circat {
namespace {

void require_matrix(const Tensor& a, const char* what) {
  require(a.shape().rank() <= 2, ErrorCode::kShapeMismatch,
          std::string(what) + ": expected a matrix, got " + a.shape().to_string());
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  require(a.shape() == b.shape(), ErrorCode::kShapeMismatch,
          std::string(what) + ": shape " + a.shape().to_string() + " vs " + b.shape().to_string());
}

std::size_t wrap(long long shift, std::size_t n) {
  const long long m = static_cast<long long>(n);
  return static_cast<std::size_t>(((shift % m) + m) % m);
}

Tensor finished(Tensor t, const char* what) {
  check_finite(t, what);
  return t;
}

}  // namespace

Shape::Shape(std::initializer_list<std::size_t> dims) : Shape(std::vector<std::size_t>(dims)) {}

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  require(!dims_.empty() && dims_.size() <= 3, ErrorCode::kShapeMismatch, "shape rank must be 1..3");
  for (std::size_t d : dims_) {
    require(d >= 1, ErrorCode::kShapeMismatch, "shape extents must be >= 1");
  }
}

std::size_t Shape::numel() const {
  std::size_t n = 1;
  for (std::size_t d : dims_) n *= d;
  return n;
}

std::string Shape::to_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? "x" : "") << dims_[i];
  os << ']';
  return os.str();
}

Tensor::Tensor() : Tensor(Shape{1}, Buffer(1, 0.0)) {}

Tensor::Tensor(Shape shape, Buffer data)
    : shape_(std::move(shape)), data_(std::make_shared<const Buffer>(std::move(data))) {
  require(data_->size() == shape_.numel(), ErrorCode::kShapeMismatch,
          "tensor data length " + std::to_string(data_->size()) + " does not match shape " +
              shape_.to_string());
}

Tensor::Tensor(Shape shape, std::span<const double> data)
    : Tensor(std::move(shape), Buffer(data.begin(), data.end())) {}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = shape.numel();
  return Tensor(std::move(shape), Buffer(n, value));
}

Tensor Tensor::scalar(double value) { return full(Shape{1, 1}, value); }

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  require(rows.size() > 0, ErrorCode::kShapeMismatch, "from_rows: no rows");
  const std::size_t cols = rows.begin()->size();
  Buffer data;
  data.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    require(r.size() == cols, ErrorCode::kShapeMismatch, "from_rows: ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor(Shape{rows.size(), cols}, std::move(data));
}

Tensor Tensor::column(std::span<const double> values) {
  return Tensor(Shape{values.size(), 1}, values);
}

Tensor Tensor::identity(std::size_t n) {
  Buffer data(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) data[i * n + i] = 1.0;
  return Tensor(Shape{n, n}, std::move(data));
}

Tensor Tensor::normal(Shape shape, Rng& rng, double stddev) {
  Buffer data(shape.numel());
  for (double& x : data) x = stddev * rng.normal();
  return Tensor(std::move(shape), std::move(data));
}

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi) {
  Buffer data(shape.numel());
  for (double& x : data) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(data));
}

bool Tensor::all_finite() const {
  return std::all_of(data_->begin(), data_->end(), [](double x) { return std::isfinite(x); });
}

void check_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) fail(ErrorCode::kNonFinite, std::string(what) + ": non-finite value");
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

double max_rel_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_rel_diff");
  double scale = 0.0;
  for (double x : b.data()) scale = std::max(scale, std::abs(x));
  return max_abs_diff(a, b) / std::max(scale, std::numeric_limits<double>::min());
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), p = b.cols();
  require(b.rows() == k, ErrorCode::kShapeMismatch,
          "matmul: inner extents differ, " + a.shape().to_string() + " x " + b.shape().to_string());
  Buffer out(m * p, 0.0);
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * p;
    for (std::size_t t = 0; t < k; ++t) {
      const double av = ad[i * k + t];
      const double* brow = bd.data() + t * p;
      for (std::size_t j = 0; j < p; ++j) orow[j] += av * brow[j];
    }
  }
  return finished(Tensor(Shape{m, p}, std::move(out)), "matmul");
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  Buffer out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a(i, j);
  return Tensor(Shape{n, m}, std::move(out));
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Buffer out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return finished(Tensor(a.shape(), std::move(out)), "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Buffer out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return finished(Tensor(a.shape(), std::move(out)), "sub");
}

Tensor scale(const Tensor& a, double s) {
  Buffer out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return finished(Tensor(a.shape(), std::move(out)), "scale");
}

namespace {

Tensor softmax_impl(const Tensor& a, bool causal, const char* what) {
  require_matrix(a, what);
  check_finite(a, what);
  const std::size_t m = a.rows(), n = a.cols();
  Buffer out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t allowed = causal ? std::min(n, i + 1) : n;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < allowed; ++j) mx = std::max(mx, a(i, j));
    double total = 0.0;
    for (std::size_t j = 0; j < allowed; ++j) {
      const double e = std::exp(a(i, j) - mx);
      out[i * n + j] = e;
      total += e;
    }
    for (std::size_t j = 0; j < allowed; ++j) out[i * n + j] /= total;
  }
  return Tensor(Shape{m, n}, std::move(out));
}

}  // namespace

Tensor softmax_rows(const Tensor& a) { return softmax_impl(a, false, "softmax_rows"); }

Tensor softmax_rows_causal(const Tensor& a) { return softmax_impl(a, true, "softmax_rows_causal"); }

Tensor mean_rows(const Tensor& a) {
  require_matrix(a, "mean_rows");
  const std::size_t m = a.rows(), n = a.cols();
  Buffer out(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += a(i, j);
  for (double& x : out) x /= static_cast<double>(m);
  return finished(Tensor(Shape{1, n}, std::move(out)), "mean_rows");
}

Tensor roll_rows(const Tensor& a, long long shift) {
  require_matrix(a, "roll_rows");
  const std::size_t m = a.rows(), n = a.cols();
  const std::size_t s = wrap(shift, m);
  Buffer out(m * n);
  const auto ad = a.data();
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t src = (i + m - s) % m;
    std::copy_n(ad.data() + src * n, n, out.data() + i * n);
  }
  return Tensor(a.shape(), std::move(out));
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count) {
  require_matrix(a, "slice_cols");
  require(count >= 1 && begin + count <= a.cols(), ErrorCode::kShapeMismatch,
          "slice_cols: range out of bounds");
  const std::size_t m = a.rows();
  Buffer out(m * count);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = a(i, begin + j);
  return Tensor(Shape{m, count}, std::move(out));
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count) {
  require_matrix(a, "slice_rows");
  require(count >= 1 && begin + count <= a.rows(), ErrorCode::kShapeMismatch,
          "slice_rows: range out of bounds");
  const auto ad = a.data();
  const std::size_t n = a.cols();
  return Tensor(Shape{count, n}, ad.subspan(begin * n, count * n));
}

Tensor concat_cols(std::span<const Tensor> parts) {
  require(!parts.empty(), ErrorCode::kShapeMismatch, "concat_cols: no parts");
  const std::size_t m = parts.front().rows();
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    require(p.rows() == m, ErrorCode::kShapeMismatch, "concat_cols: row counts differ");
    total += p.cols();
  }
  Buffer out(m * total);
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) out[i * total + offset + j] = p(i, j);
    offset += p.cols();
  }
  return Tensor(Shape{m, total}, std::move(out));
}

Tensor reshape(const Tensor& a, Shape shape) {
  require(shape.numel() == a.size(), ErrorCode::kShapeMismatch, "reshape: element count differs");
  return Tensor(std::move(shape), a.data());
}

double sum(const Tensor& a) {
  double total = 0.0;
  for (double x : a.data()) total += x;
  return total;
}

}  // namespace circat
