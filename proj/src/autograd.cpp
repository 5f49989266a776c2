// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include "circat/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace circat {
namespace {

void require_same_tape(Var a, Var b, const char* what) {
  require(&a.tape() == &b.tape(), ErrorCode::kInvalidArgument,
          std::string(what) + ": operands recorded on different tapes");
}

}  // namespace

const Tensor& Var::value() const {
  require(tape_ != nullptr, ErrorCode::kInvalidArgument, "use of an unbound Var");
  return tape_->value(id_);
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  for (Var in : inputs) {
    require(&in.tape() == this, ErrorCode::kInvalidArgument, "input recorded on another tape");
    require(in.id() < nodes_.size(), ErrorCode::kInternal, "tape input out of order");
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
  require(&loss.tape() == this, ErrorCode::kInvalidArgument, "loss recorded on another tape");
  require(loss.value().size() == 1, ErrorCode::kShapeMismatch,
          "backward: loss must be scalar, got " + loss.shape().to_string());
  for (Node& n : nodes_) n.grad.clear();
  if (!nodes_[loss.id()].requires_grad) return;
  nodes_[loss.id()].grad.assign(1, 1.0);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.backward || node.grad.empty()) continue;
    for (std::size_t in : node.inputs) {
      require(in < id, ErrorCode::kInternal, "cycle in gradient tape");
    }
    node.backward(*this, std::span<const double>(node.grad.data(), node.grad.size()));
  }
}

Tensor Tape::grad(Var v) const {
  const Node& node = nodes_.at(v.id());
  if (node.grad.empty()) return Tensor::zeros(node.value.shape());
  return Tensor(node.value.shape(), node.grad);
}

std::span<double> Tape::grad_buffer(Var v) {
  Node& node = nodes_.at(v.id());
  if (!node.requires_grad) return {};
  if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
  return {node.grad.data(), node.grad.size()};
}

void Tape::accumulate(Var v, std::span<const double> delta) {
  auto g = grad_buffer(v);
  if (g.empty()) return;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  Tensor out = matmul(a.value(), b.value());
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, std::span<const double> g) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const std::size_t m = av.rows(), k = av.cols(), p = bv.cols();
    if (auto ga = t.grad_buffer(a); !ga.empty()) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t r = 0; r < k; ++r) {
          double acc = 0.0;
          for (std::size_t j = 0; j < p; ++j) acc += g[i * p + j] * bv(r, j);
          ga[i * k + r] += acc;
        }
    }
    if (auto gb = t.grad_buffer(b); !gb.empty()) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t r = 0; r < k; ++r) {
          const double x = av(i, r);
          for (std::size_t j = 0; j < p; ++j) gb[r * p + j] += x * g[i * p + j];
        }
    }
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  return a.tape().record(add(a.value(), b.value()), {a, b},
                         [a, b](Tape& t, std::span<const double> g) {
                           t.accumulate(a, g);
                           t.accumulate(b, g);
                         });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b, "sub");
  return a.tape().record(sub(a.value(), b.value()), {a, b},
                         [a, b](Tape& t, std::span<const double> g) {
                           t.accumulate(a, g);
                           if (auto gb = t.grad_buffer(b); !gb.empty())
                             for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
                         });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b, "mul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.shape() == bv.shape(), ErrorCode::kShapeMismatch, "mul: shapes differ");
  Buffer out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  Tensor value(av.shape(), std::move(out));
  check_finite(value, "mul");
  return a.tape().record(std::move(value), {a, b}, [a, b](Tape& t, std::span<const double> g) {
    if (auto ga = t.grad_buffer(a); !ga.empty())
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * b.value()[i];
    if (auto gb = t.grad_buffer(b); !gb.empty())
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * a.value()[i];
  });
}

Var scale(Var a, double s) {
  return a.tape().record(scale(a.value(), s), {a}, [a, s](Tape& t, std::span<const double> g) {
    auto ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += s * g[i];
  });
}

Var add_row(Var x, Var bias) {
  require_same_tape(x, bias, "add_row");
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  require(bv.size() == n, ErrorCode::kShapeMismatch, "add_row: bias width differs");
  Buffer out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv(i, j) + bv[j];
  Tensor value(xv.shape(), std::move(out));
  check_finite(value, "add_row");
  return x.tape().record(std::move(value), {x, bias},
                         [x, bias, m, n](Tape& t, std::span<const double> g) {
                           t.accumulate(x, g);
                           if (auto gb = t.grad_buffer(bias); !gb.empty())
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
                         });
}

Var sum(Var a) {
  return a.tape().record(Tensor::scalar(sum(a.value())), {a},
                         [a](Tape& t, std::span<const double> g) {
                           auto ga = t.grad_buffer(a);
                           for (double& x : ga) x += g[0];
                         });
}

Var softmax_rows(Var a, bool causal) {
  Tensor out = causal ? softmax_rows_causal(a.value()) : softmax_rows(a.value());
  const Tensor y = out;
  return a.tape().record(std::move(out), {a}, [a, y](Tape& t, std::span<const double> g) {
    auto ga = t.grad_buffer(a);
    const std::size_t m = y.rows(), n = y.cols();
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y(i, j);
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += y(i, j) * (g[i * n + j] - dot);
    }
  });
}

Var mean_rows(Var a) {
  return a.tape().record(mean_rows(a.value()), {a}, [a](Tape& t, std::span<const double> g) {
    auto ga = t.grad_buffer(a);
    const std::size_t m = a.rows(), n = a.cols();
    const double inv = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j] * inv;
  });
}

Var roll_rows(Var a, long long shift) {
  return a.tape().record(roll_rows(a.value(), shift), {a},
                         [a, shift](Tape& t, std::span<const double> g) {
                           const Tensor back = roll_rows(Tensor(a.shape(), g), -shift);
                           t.accumulate(a, back.data());
                         });
}

Var transpose(Var a) {
  return a.tape().record(transpose(a.value()), {a}, [a](Tape& t, std::span<const double> g) {
    const std::size_t m = a.rows(), n = a.cols();
    auto ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  return a.tape().record(slice_cols(a.value(), begin, count), {a},
                         [a, begin, count](Tape& t, std::span<const double> g) {
                           auto ga = t.grad_buffer(a);
                           const std::size_t m = a.rows(), n = a.cols();
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < count; ++j)
                               ga[i * n + begin + j] += g[i * count + j];
                         });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), ErrorCode::kShapeMismatch, "concat_cols: no parts");
  std::vector<Tensor> values;
  values.reserve(parts.size());
  for (Var p : parts) values.push_back(p.value());
  Tape& tape = parts.front().tape();
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape.record(concat_cols(values), parts, [inputs](Tape& t, std::span<const double> g) {
    const std::size_t m = inputs.front().rows();
    std::size_t total = 0;
    for (Var p : inputs) total += p.cols();
    std::size_t offset = 0;
    for (Var p : inputs) {
      const std::size_t w = p.cols();
      if (auto gp = t.grad_buffer(p); !gp.empty())
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < w; ++j) gp[i * w + j] += g[i * total + offset + j];
      offset += w;
    }
  });
}

Var gather_rows(Var table, std::span<const std::size_t> indices) {
  const Tensor& tv = table.value();
  const std::size_t n = tv.cols();
  require(!indices.empty(), ErrorCode::kShapeMismatch, "gather_rows: no indices");
  Buffer out(indices.size() * n);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < tv.rows(), ErrorCode::kInvalidArgument,
            "gather_rows: index " + std::to_string(indices[i]) + " out of range");
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = tv(indices[i], j);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return table.tape().record(Tensor(Shape{indices.size(), n}, std::move(out)), {table},
                             [table, idx, n](Tape& t, std::span<const double> g) {
                               auto gt = t.grad_buffer(table);
                               for (std::size_t i = 0; i < idx.size(); ++i)
                                 for (std::size_t j = 0; j < n; ++j)
                                   gt[idx[i] * n + j] += g[i * n + j];
                             });
}

namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

}  // namespace

Var gelu(Var a) {
  const Tensor& av = a.value();
  Buffer out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = av[i];
    out[i] = 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x)));
  }
  return a.tape().record(Tensor(av.shape(), std::move(out)), {a},
                         [a](Tape& t, std::span<const double> g) {
                           auto ga = t.grad_buffer(a);
                           const Tensor& av = a.value();
                           for (std::size_t i = 0; i < ga.size(); ++i) {
                             const double x = av[i];
                             const double u = kGeluC * (x + 0.044715 * x * x * x);
                             const double th = std::tanh(u);
                             const double du = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
                             ga[i] += g[i] * (0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du);
                           }
                         });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  require_same_tape(x, gain, "layer_norm");
  require_same_tape(x, bias, "layer_norm");
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  require(gain.value().size() == n && bias.value().size() == n, ErrorCode::kShapeMismatch,
          "layer_norm: gain/bias width differs");
  Buffer xhat(m * n), inv_std(m), out(m * n);
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  for (std::size_t i = 0; i < m; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += xv(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (xv(i, j) - mean) * (xv(i, j) - mean);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (xv(i, j) - mean) * inv_std[i];
      out[i * n + j] = xhat[i * n + j] * gv[j] + bv[j];
    }
  }
  Tensor value(xv.shape(), std::move(out));
  check_finite(value, "layer_norm");
  Tensor xh(xv.shape(), std::move(xhat));
  Tensor istd(Shape{m}, std::move(inv_std));
  return x.tape().record(
      std::move(value), {x, gain, bias},
      [x, gain, bias, xh, istd, m, n](Tape& t, std::span<const double> g) {
        const Tensor& gv = gain.value();
        if (auto gg = t.grad_buffer(gain); !gg.empty())
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gg[j] += g[i * n + j] * xh(i, j);
        if (auto gb = t.grad_buffer(bias); !gb.empty())
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
        if (auto gx = t.grad_buffer(x); !gx.empty()) {
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t i = 0; i < m; ++i) {
            double sum_d = 0.0, sum_dx = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double d = g[i * n + j] * gv[j];
              sum_d += d;
              sum_dx += d * xh(i, j);
            }
            for (std::size_t j = 0; j < n; ++j) {
              const double d = g[i * n + j] * gv[j];
              gx[i * n + j] += istd[i] * (d - inv_n * sum_d - xh(i, j) * inv_n * sum_dx);
            }
          }
        }
      });
}

Var cross_entropy_sum(Var logits, std::span<const std::size_t> rows,
                      std::span<const std::size_t> labels) {
  require(rows.size() == labels.size(), ErrorCode::kShapeMismatch,
          "cross_entropy: rows/labels length differ");
  require(!rows.empty(), ErrorCode::kInvalidArgument, "cross_entropy: empty target set");
  const Tensor& lv = logits.value();
  const std::size_t n = lv.cols();
  Buffer probs(rows.size() * n);
  double total = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r] < lv.rows(), ErrorCode::kInvalidArgument, "cross_entropy: row out of range");
    require(labels[r] < n, ErrorCode::kInvalidArgument, "cross_entropy: label out of range");
    double mx = lv(rows[r], 0);
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, lv(rows[r], j));
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(lv(rows[r], j) - mx);
    for (std::size_t j = 0; j < n; ++j) probs[r * n + j] = std::exp(lv(rows[r], j) - mx) / z;
    total += -(lv(rows[r], labels[r]) - mx - std::log(z));
  }
  Tensor value = Tensor::scalar(total);
  check_finite(value, "cross_entropy");
  std::vector<std::size_t> rs(rows.begin(), rows.end()), ls(labels.begin(), labels.end());
  Tensor p(Shape{rows.size(), n}, std::move(probs));
  return logits.tape().record(std::move(value), {logits},
                              [logits, rs, ls, p, n](Tape& t, std::span<const double> g) {
                                auto gl = t.grad_buffer(logits);
                                for (std::size_t r = 0; r < rs.size(); ++r) {
                                  for (std::size_t j = 0; j < n; ++j)
                                    gl[rs[r] * n + j] += g[0] * p(r, j);
                                  gl[rs[r] * n + ls[r]] -= g[0];
                                }
                              });
}

GradCheckReport finite_diff_check(const MultiFn& f, std::span<const Tensor> at, double step,
                                  double tol) {
  require(step > 0.0, ErrorCode::kInvalidArgument, "finite_diff_check: step must be positive");
  auto evaluate = [&](std::span<const Tensor> point) {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& t : point) vars.push_back(tape.constant(t));
    long double total = 0.0L;
    for (double x : f(tape, vars).value().data()) total += x;
    return total;
  };

  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& t : at) vars.push_back(tape.leaf(t));
  Var out = f(tape, vars);
  long double first = 0.0L;
  for (double x : out.value().data()) first += x;
  require(first == evaluate(at), ErrorCode::kInvalidArgument,
          "finite_diff_check: function is not deterministic");
  tape.backward(sum(out));

  GradCheckReport report;
  std::vector<Tensor> point(at.begin(), at.end());
  for (std::size_t k = 0; k < at.size(); ++k) {
    const Tensor analytic = tape.grad(vars[k]);
    std::vector<double> coords = at[k].to_vector();
    for (std::size_t i = 0; i < coords.size(); ++i) {
      const double original = coords[i];
      // Divide by the representable step actually taken.
      const double hi = original + step, lo = original - step;
      coords[i] = hi;
      point[k] = Tensor(at[k].shape(), coords);
      const long double up = evaluate(point);
      coords[i] = lo;
      point[k] = Tensor(at[k].shape(), coords);
      const long double down = evaluate(point);
      coords[i] = original;
      const double numeric = static_cast<double>((up - down) / (static_cast<long double>(hi) - lo));
      const double a = analytic[i];
      const double err =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (err >= report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_input = k;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
    point[k] = at[k];
  }
  report.passed = report.max_rel_error <= tol;
  return report;
}

GradCheckReport finite_diff_check(const std::function<Var(Var)>& f, const Tensor& at, double step,
                                  double tol) {
  const Tensor inputs[] = {at};
  return finite_diff_check([&f](Tape&, std::span<const Var> v) { return f(v[0]); }, inputs, step,
                           tol);
}

}  // namespace circat
