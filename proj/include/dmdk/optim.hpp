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

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "dmdk/tensor.hpp"

namespace dmdk {

// Seeded generator whose draws are identical on every platform: the
// distributions are computed here instead of through <random>'s
// implementation-defined ones.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

// Glorot-uniform initialization.
inline Matrix xavier_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(-limit, limit);
  return m;
}

inline Matrix normal_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = stddev * rng.normal();
  return m;
}

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // L2 coefficient; the term weight_decay * theta is added to the gradient
  // before the moment updates.
  double weight_decay = 0.0;
};

struct AdamState {
  AdamConfig config;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::int64_t step_count = 0;
};

// One bias-corrected Adam update of `params` in place. Moments are created
// on the first call and must keep matching the parameter shapes afterwards.
inline void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " params but " +
                     std::to_string(grads.size()) + " gradients");
  }
  if (state.first_moment.empty()) {
    for (const Matrix* p : params) {
      state.first_moment.emplace_back(p->rows(), p->cols());
      state.second_moment.emplace_back(p->rows(), p->cols());
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state tracks " +
                     std::to_string(state.first_moment.size()) + " params, got " +
                     std::to_string(params.size()));
  }
  const AdamConfig& c = state.config;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& p = *params[k];
    const Matrix& g = grads[k];
    Matrix& m = state.first_moment[k];
    Matrix& v = state.second_moment[k];
    if (!g.same_shape(p) || !m.same_shape(p)) {
      throw ShapeError("adam_step: parameter " + std::to_string(k) + " is " + p.shape_string() +
                       " but gradient is " + g.shape_string() + " and moment is " +
                       m.shape_string());
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] + c.weight_decay * p[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

// Adam over graph parameters, reading each parameter's accumulated gradient.
class Adam {
 public:
  explicit Adam(AdamConfig config) { state_.config = config; }

  void step(std::span<const Var> params) {
    std::vector<Matrix*> values;
    std::vector<Matrix> grads;
    values.reserve(params.size());
    grads.reserve(params.size());
    for (const auto& p : params) {
      values.push_back(&p->value);
      grads.push_back(gradient_of(p));
    }
    adam_step(values, grads, state_);
  }

  const AdamState& state() const { return state_; }

 private:
  AdamState state_;
};

// Central-difference estimate of d f / d theta, one coordinate at a time.
// `theta` is perturbed in place and restored exactly before returning.
inline Matrix finite_diff_grad(const std::function<double()>& f, Matrix& theta, double h) {
  if (!(h > 0.0)) throw ValidationError("finite_diff_grad: step must be positive");
  Matrix g(theta.rows(), theta.cols());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + h;
    const double up = f();
    theta[i] = saved - h;
    const double down = f();
    theta[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Norm-wise relative error between two gradient estimates.
inline double relative_error(const Matrix& analytic, const Matrix& numeric, double floor = 1e-10) {
  if (!analytic.same_shape(numeric)) {
    throw ShapeError("relative_error: " + analytic.shape_string() + " vs " + numeric.shape_string());
  }
  Matrix diff = analytic;
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= numeric[i];
  const double denom = std::max({frobenius_norm(analytic), frobenius_norm(numeric), floor});
  return frobenius_norm(diff) / denom;
}

}  // namespace dmdk
