// Copyright 2026 The DMDK Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense row-major matrices and a small reverse-mode differentiation engine.
//
// A Var is a shared handle to a node of the computation graph. Leaves are
// created with constant() or parameter(); every op below returns a fresh
// node that remembers its parents and how to push gradients back to them.
// Calling backward() on a 1x1 node fills `grad` on every reachable node that
// requires a gradient. Gradients accumulate, so parameters must be cleared
// with zero_grad() between optimizer steps.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dmdk/error.hpp"

namespace dmdk {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                       " does not match " + std::to_string(rows_) + "x" +
                       std::to_string(cols_));
    }
  }
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ShapeError("ragged matrix literal");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Matrix row(std::span<const double> values) {
    return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row_span(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row_span(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::string shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }
  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Matrix& operator+=(const Matrix& o) {
    if (!same_shape(o)) throw ShapeError("add: " + shape_string() + " vs " + o.shape_string());
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw ShapeError("compare: " + a.shape_string() + " vs " + b.shape_string());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

// Plain value kernels. The differentiable ops below are built on these.
namespace kernel {

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: shape mismatch " + a.shape_string() + " x " + b.shape_string());
  }
  Matrix out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* o = out.row_span(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double av = a(i, k);
      if (av == 0.0) continue;
      const double* br = b.row_span(k).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += av * br[j];
    }
  }
  return out;
}

// a^T b without materializing the transpose.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: shape mismatch " + a.shape_string() + " x " + b.shape_string());
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* br = b.row_span(k).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double av = a(k, i);
      if (av == 0.0) continue;
      double* o = out.row_span(i).data();
      for (std::size_t j = 0; j < b.cols(); ++j) o[j] += av * br[j];
    }
  }
  return out;
}

// a b^T without materializing the transpose.
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: shape mismatch " + a.shape_string() + " x " + b.shape_string());
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ar = a.row_span(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* br = b.row_span(j).data();
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += ar[k] * br[k];
      out(i, j) = s;
    }
  }
  return out;
}

inline Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

// Row-wise softmax with max subtraction. With `causal`, entry (i, j) for
// j > i is excluded and set to exactly zero.
inline Matrix softmax_rows(const Matrix& a, bool causal = false) {
  if (causal && a.rows() != a.cols()) {
    throw ShapeError("causal softmax needs a square score matrix, got " + a.shape_string());
  }
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const std::size_t width = causal ? i + 1 : a.cols();
    if (width == 0) continue;
    double mx = a(i, 0);
    for (std::size_t j = 1; j < width; ++j) mx = std::max(mx, a(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      const double e = std::exp(a(i, j) - mx);
      out(i, j) = e;
      sum += e;
    }
    for (std::size_t j = 0; j < width; ++j) out(i, j) /= sum;
  }
  return out;
}

inline Matrix relu(const Matrix& a) {
  Matrix out = a;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

}  // namespace kernel

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Matrix value;
  Matrix grad;  // empty until a gradient reaches this node
  std::vector<Var> parents;
  std::function<void(Node&)> backprop;
  bool requires_grad = false;
  const char* op = "leaf";

  bool is_leaf() const { return parents.empty(); }

  void accumulate(const Matrix& g) {
    if (!requires_grad) return;
    if (grad.empty() && !value.empty()) {
      grad = g;
    } else if (grad.same_shape(g)) {
      grad += g;
    } else {
      grad = g;  // zero-size nodes
    }
  }
};

inline Var constant(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return n;
}

inline Var parameter(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return n;
}

inline void zero_grad(std::span<const Var> params) {
  for (const auto& p : params) p->grad = Matrix();
}

// Gradient of a parameter, materialized as zeros when nothing reached it.
inline Matrix gradient_of(const Var& v) {
  if (v->grad.empty()) return Matrix(v->value.rows(), v->value.cols());
  return v->grad;
}

namespace detail {

inline Var make_node(Matrix value, std::vector<Var> parents, const char* op,
                     std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  const bool any = std::any_of(parents.begin(), parents.end(),
                               [](const Var& p) { return p->requires_grad; });
  if (any) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
  }
  return n;
}

inline void require_same(const Var& a, const Var& b, const char* op) {
  if (!a->value.same_shape(b->value)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a->value.shape_string() + " vs " +
                     b->value.shape_string());
  }
}

}  // namespace detail

inline Var matmul(const Var& a, const Var& b) {
  return detail::make_node(kernel::matmul(a->value, b->value), {a, b}, "matmul", [](Node& self) {
    const auto& a = self.parents[0];
    const auto& b = self.parents[1];
    if (a->requires_grad) a->accumulate(kernel::matmul_nt(self.grad, b->value));
    if (b->requires_grad) b->accumulate(kernel::matmul_tn(a->value, self.grad));
  });
}

// a b^T.
inline Var matmul_transposed(const Var& a, const Var& b) {
  return detail::make_node(kernel::matmul_nt(a->value, b->value), {a, b}, "matmul_nt",
                           [](Node& self) {
                             const auto& a = self.parents[0];
                             const auto& b = self.parents[1];
                             if (a->requires_grad) a->accumulate(kernel::matmul(self.grad, b->value));
                             if (b->requires_grad) b->accumulate(kernel::matmul_tn(self.grad, a->value));
                           });
}

inline Var add(const Var& a, const Var& b) {
  detail::require_same(a, b, "add");
  Matrix out = a->value;
  out += b->value;
  return detail::make_node(std::move(out), {a, b}, "add", [](Node& self) {
    self.parents[0]->accumulate(self.grad);
    self.parents[1]->accumulate(self.grad);
  });
}

inline Var mul(const Var& a, const Var& b) {
  detail::require_same(a, b, "mul");
  Matrix out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b->value[i];
  return detail::make_node(std::move(out), {a, b}, "mul", [](Node& self) {
    const auto& a = self.parents[0];
    const auto& b = self.parents[1];
    if (a->requires_grad) {
      Matrix g = self.grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= b->value[i];
      a->accumulate(g);
    }
    if (b->requires_grad) {
      Matrix g = self.grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= a->value[i];
      b->accumulate(g);
    }
  });
}

inline Var scale(const Var& a, double factor) {
  Matrix out = a->value;
  for (double& v : out.data()) v *= factor;
  return detail::make_node(std::move(out), {a}, "scale", [factor](Node& self) {
    Matrix g = self.grad;
    for (double& v : g.data()) v *= factor;
    self.parents[0]->accumulate(g);
  });
}

// Adds a 1 x cols row to every row of `a`.
inline Var add_row(const Var& a, const Var& row) {
  if (row->value.rows() != 1 || row->value.cols() != a->value.cols()) {
    throw ShapeError("add_row: " + a->value.shape_string() + " with bias " +
                     row->value.shape_string());
  }
  Matrix out = a->value;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += row->value(0, j);
  return detail::make_node(std::move(out), {a, row}, "add_row", [](Node& self) {
    self.parents[0]->accumulate(self.grad);
    if (self.parents[1]->requires_grad) {
      Matrix g(1, self.grad.cols());
      for (std::size_t i = 0; i < self.grad.rows(); ++i)
        for (std::size_t j = 0; j < self.grad.cols(); ++j) g(0, j) += self.grad(i, j);
      self.parents[1]->accumulate(g);
    }
  });
}

inline Var transpose(const Var& a) {
  return detail::make_node(kernel::transpose(a->value), {a}, "transpose", [](Node& self) {
    self.parents[0]->accumulate(kernel::transpose(self.grad));
  });
}

inline Var relu(const Var& a) {
  return detail::make_node(kernel::relu(a->value), {a}, "relu", [](Node& self) {
    const auto& a = self.parents[0];
    Matrix g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (a->value[i] <= 0.0) g[i] = 0.0;
    a->accumulate(g);
  });
}

inline Var softmax_rows(const Var& a, bool causal = false) {
  Matrix y = kernel::softmax_rows(a->value, causal);
  return detail::make_node(y, {a}, "softmax", [](Node& self) {
    const Matrix& y = self.value;
    Matrix g(y.rows(), y.cols());
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += self.grad(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) g(i, j) = y(i, j) * (self.grad(i, j) - dot);
    }
    self.parents[0]->accumulate(g);
  });
}

// Per-row normalization to zero mean and unit variance followed by
// `gain * x + bias`; gain and bias are 1 x cols rows.
inline Var layer_norm(const Var& a, const Var& gain, const Var& bias, double eps = 1e-5) {
  const std::size_t n = a->value.cols();
  if (gain->value.rows() != 1 || gain->value.cols() != n || !gain->value.same_shape(bias->value)) {
    throw ShapeError("layer_norm: input " + a->value.shape_string() + " gain " +
                     gain->value.shape_string() + " bias " + bias->value.shape_string());
  }
  Matrix xhat(a->value.rows(), n);
  std::vector<double> inv_std(a->value.rows());
  Matrix out(a->value.rows(), n);
  for (std::size_t i = 0; i < a->value.rows(); ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += a->value(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double c = a->value(i, j) - mean;
      var += c * c;
    }
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat(i, j) = (a->value(i, j) - mean) * inv_std[i];
      out(i, j) = gain->value(0, j) * xhat(i, j) + bias->value(0, j);
    }
  }
  return detail::make_node(
      std::move(out), {a, gain, bias}, "layer_norm",
      [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        const auto& a = self.parents[0];
        const auto& gain = self.parents[1];
        const auto& bias = self.parents[2];
        const std::size_t n = xhat.cols();
        if (gain->requires_grad || bias->requires_grad) {
          Matrix gg(1, n), gb(1, n);
          for (std::size_t i = 0; i < xhat.rows(); ++i)
            for (std::size_t j = 0; j < n; ++j) {
              gg(0, j) += self.grad(i, j) * xhat(i, j);
              gb(0, j) += self.grad(i, j);
            }
          gain->accumulate(gg);
          bias->accumulate(gb);
        }
        if (!a->requires_grad) return;
        Matrix ga(xhat.rows(), n);
        for (std::size_t i = 0; i < xhat.rows(); ++i) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const double d = self.grad(i, j) * gain->value(0, j);
            mean_d += d;
            mean_dx += d * xhat(i, j);
          }
          mean_d /= static_cast<double>(n);
          mean_dx /= static_cast<double>(n);
          for (std::size_t j = 0; j < n; ++j) {
            const double d = self.grad(i, j) * gain->value(0, j);
            ga(i, j) = inv_std[i] * (d - mean_d - xhat(i, j) * mean_dx);
          }
        }
        a->accumulate(ga);
      });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = parts.front()->value.rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p->value.rows() != rows) {
      throw ShapeError("concat_cols: row mismatch " + p->value.shape_string());
    }
    cols += p->value.cols();
  }
  Matrix out(rows, cols);
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < p->value.cols(); ++j) out(i, off + j) = p->value(i, j);
    off += p->value.cols();
  }
  return detail::make_node(std::move(out), parts, "concat_cols", [](Node& self) {
    std::size_t off = 0;
    for (const auto& p : self.parents) {
      const std::size_t c = p->value.cols();
      if (p->requires_grad) {
        Matrix g(self.grad.rows(), c);
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < c; ++j) g(i, j) = self.grad(i, off + j);
        p->accumulate(g);
      }
      off += c;
    }
  });
}

inline Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t cols = parts.front()->value.cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p->value.cols() != cols) {
      throw ShapeError("concat_rows: column mismatch " + parts.front()->value.shape_string() +
                       " vs " + p->value.shape_string());
    }
    rows += p->value.rows();
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const auto& p : parts) data.insert(data.end(), p->value.data().begin(), p->value.data().end());
  return detail::make_node(Matrix(rows, cols, std::move(data)), parts, "concat_rows",
                           [](Node& self) {
                             std::size_t off = 0;
                             for (const auto& p : self.parents) {
                               const std::size_t n = p->value.size();
                               if (p->requires_grad) {
                                 auto src = self.grad.data().subspan(off, n);
                                 p->accumulate(Matrix(p->value.rows(), p->value.cols(),
                                                      std::vector<double>(src.begin(), src.end())));
                               }
                               off += n;
                             }
                           });
}

// Row lookup: output row r is table row indices[r].
inline Var gather_rows(const Var& table, std::span<const std::size_t> indices) {
  const std::size_t cols = table->value.cols();
  Matrix out(indices.size(), cols);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= table->value.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(indices[r]) + " out of range for " +
                       table->value.shape_string());
    }
    auto src = table->value.row_span(indices[r]);
    std::copy(src.begin(), src.end(), out.row_span(r).begin());
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return detail::make_node(std::move(out), {table}, "gather_rows",
                           [idx = std::move(idx)](Node& self) {
                             const auto& t = self.parents[0];
                             Matrix g(t->value.rows(), t->value.cols());
                             for (std::size_t r = 0; r < idx.size(); ++r)
                               for (std::size_t j = 0; j < g.cols(); ++j) g(idx[r], j) += self.grad(r, j);
                             t->accumulate(g);
                           });
}

inline Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a->value.data()) s += v;
  return detail::make_node(Matrix(1, 1, s), {a}, "sum", [](Node& self) {
    const auto& a = self.parents[0];
    a->accumulate(Matrix(a->value.rows(), a->value.cols(), self.grad(0, 0)));
  });
}

// Mean of 1x1 nodes.
inline Var mean_of(const std::vector<Var>& scalars) {
  if (scalars.empty()) throw ShapeError("mean_of: no inputs");
  double s = 0.0;
  for (const auto& v : scalars) {
    if (v->value.rows() != 1 || v->value.cols() != 1) {
      throw ShapeError("mean_of: expected 1x1, got " + v->value.shape_string());
    }
    s += v->value(0, 0);
  }
  const double inv = 1.0 / static_cast<double>(scalars.size());
  return detail::make_node(Matrix(1, 1, s * inv), scalars, "mean_of", [inv](Node& self) {
    for (const auto& p : self.parents) p->accumulate(Matrix(1, 1, self.grad(0, 0) * inv));
  });
}

// Mean over rows of -log softmax(logits)[row, targets[row]].
inline Var cross_entropy(const Var& logits, std::span<const std::size_t> targets) {
  const Matrix& z = logits->value;
  if (targets.size() != z.rows() || z.rows() == 0) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                     z.shape_string());
  }
  Matrix probs = kernel::softmax_rows(z);
  double loss = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    if (targets[i] >= z.cols()) throw ShapeError("cross_entropy: target out of range");
    double mx = z(i, 0);
    for (std::size_t j = 1; j < z.cols(); ++j) mx = std::max(mx, z(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < z.cols(); ++j) s += std::exp(z(i, j) - mx);
    loss += -(z(i, targets[i]) - mx - std::log(s));
  }
  const double inv = 1.0 / static_cast<double>(z.rows());
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  return detail::make_node(Matrix(1, 1, loss * inv), {logits}, "cross_entropy",
                           [probs = std::move(probs), tg = std::move(tg), inv](Node& self) {
                             Matrix g = probs;
                             for (std::size_t i = 0; i < g.rows(); ++i) g(i, tg[i]) -= 1.0;
                             const double s = self.grad(0, 0) * inv;
                             for (double& v : g.data()) v *= s;
                             self.parents[0]->accumulate(g);
                           });
}

// Reverse sweep from a scalar output. Leaves accumulate into their existing
// gradient; interior nodes start from zero on every call.
inline void backward(const Var& output) {
  if (output->value.rows() != 1 || output->value.cols() != 1) {
    throw ShapeError("backward: seed must be a 1x1 scalar node, got " +
                     output->value.shape_string());
  }
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{output.get(), 0}};
  seen.insert(output.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order)
    if (!n->is_leaf()) n->grad = Matrix();
  if (!output->requires_grad) return;
  output->accumulate(Matrix(1, 1, 1.0));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && !n->grad.empty()) n->backprop(*n);
  }
}

}  // namespace dmdk
