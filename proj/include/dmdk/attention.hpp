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

// Transformer building blocks: scaled dot-product attention, multi-head
// attention, the position-wise feed-forward network, layer norm parameters
// and token embeddings with positional encodings.

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dmdk/optim.hpp"
#include "dmdk/tensor.hpp"

namespace dmdk {

struct HeadParams {
  Var query;  // d x d_head
  Var key;    // d x d_head
  Var value;  // d x d_head
};

struct MhaParams {
  std::vector<HeadParams> heads;
  Var output;  // d x d

  std::size_t model_dim() const { return output->value.rows(); }
  std::size_t head_dim() const { return heads.front().query->value.cols(); }

  static MhaParams init(std::size_t dim, std::size_t num_heads, Rng& rng) {
    if (num_heads == 0 || dim % num_heads != 0) {
      throw ValidationError("model width " + std::to_string(dim) +
                            " is not divisible by head count " + std::to_string(num_heads));
    }
    const std::size_t dh = dim / num_heads;
    MhaParams p;
    for (std::size_t h = 0; h < num_heads; ++h) {
      p.heads.push_back({parameter(xavier_uniform(dim, dh, rng)),
                         parameter(xavier_uniform(dim, dh, rng)),
                         parameter(xavier_uniform(dim, dh, rng))});
    }
    p.output = parameter(xavier_uniform(dim, dim, rng));
    return p;
  }

  void append_parameters(const std::string& prefix,
                         std::vector<std::pair<std::string, Var>>& out) const {
    for (std::size_t h = 0; h < heads.size(); ++h) {
      const std::string hp = prefix + ".head" + std::to_string(h);
      out.emplace_back(hp + ".query", heads[h].query);
      out.emplace_back(hp + ".key", heads[h].key);
      out.emplace_back(hp + ".value", heads[h].value);
    }
    out.emplace_back(prefix + ".output", output);
  }
};

// softmax((x Wq)(y Wk)^T / sqrt(d_head)) (y Wv). With `causal`, query row h
// only sees key rows <= h, which requires x and y to have the same length.
inline Var scaled_dot_attention(const Var& x, const Var& y, const HeadParams& head,
                                bool causal = false) {
  const std::size_t d = head.query->value.rows();
  if (x->value.cols() != d || y->value.cols() != d) {
    throw ShapeError("attention: query " + x->value.shape_string() + " and key/value " +
                     y->value.shape_string() + " must both have width " + std::to_string(d));
  }
  if (causal && x->value.rows() != y->value.rows()) {
    throw ShapeError("attention: causal mask needs equal lengths, got " +
                     std::to_string(x->value.rows()) + " queries and " +
                     std::to_string(y->value.rows()) + " keys");
  }
  const double dk = static_cast<double>(head.query->value.cols());
  Var q = matmul(x, head.query);
  Var k = matmul(y, head.key);
  Var v = matmul(y, head.value);
  Var scores = scale(matmul_transposed(q, k), 1.0 / std::sqrt(dk));
  return matmul(softmax_rows(scores, causal), v);
}

// Attention weights of one head, without gradients. Used for inspection.
inline Matrix attention_weights(const Matrix& x, const Matrix& y, const HeadParams& head,
                                bool causal = false) {
  const double dk = static_cast<double>(head.query->value.cols());
  Matrix s = kernel::matmul_nt(kernel::matmul(x, head.query->value),
                               kernel::matmul(y, head.key->value));
  for (double& v : s.data()) v /= std::sqrt(dk);
  return kernel::softmax_rows(s, causal);
}

inline Var multi_head_attention(const Var& x, const Var& y, const MhaParams& params,
                                bool causal = false) {
  std::vector<Var> outs;
  outs.reserve(params.heads.size());
  for (const auto& h : params.heads) outs.push_back(scaled_dot_attention(x, y, h, causal));
  return matmul(concat_cols(outs), params.output);
}

struct FfnParams {
  Var w_in;   // d x inner
  Var b_in;   // 1 x inner
  Var w_out;  // inner x d
  Var b_out;  // 1 x d

  static FfnParams init(std::size_t dim, std::size_t multiplier, Rng& rng) {
    const std::size_t inner = dim * multiplier;
    return {parameter(xavier_uniform(dim, inner, rng)), parameter(Matrix(1, inner)),
            parameter(xavier_uniform(inner, dim, rng)), parameter(Matrix(1, dim))};
  }

  void append_parameters(const std::string& prefix,
                         std::vector<std::pair<std::string, Var>>& out) const {
    out.emplace_back(prefix + ".w_in", w_in);
    out.emplace_back(prefix + ".b_in", b_in);
    out.emplace_back(prefix + ".w_out", w_out);
    out.emplace_back(prefix + ".b_out", b_out);
  }
};

// max(0, x W_in + b_in) W_out + b_out, row-wise.
inline Var feed_forward(const Var& x, const FfnParams& p) {
  if (x->value.cols() != p.w_in->value.rows()) {
    throw ShapeError("feed_forward: input " + x->value.shape_string() + " for weights " +
                     p.w_in->value.shape_string());
  }
  Var hidden = relu(add_row(matmul(x, p.w_in), p.b_in));
  return add_row(matmul(hidden, p.w_out), p.b_out);
}

struct LayerNormParams {
  Var gain;
  Var bias;

  static LayerNormParams init(std::size_t dim) {
    return {parameter(Matrix(1, dim, 1.0)), parameter(Matrix(1, dim))};
  }
};

inline Var layer_norm(const Var& x, const LayerNormParams& p, double eps = 1e-5) {
  return layer_norm(x, p.gain, p.bias, eps);
}

enum class PositionalKind { kSinusoidal, kLearned };

// Row p: sin(p / 10000^(2i/d)) at even columns 2i, cos at odd columns 2i+1.
inline Matrix sinusoidal_positions(std::size_t length, std::size_t dim) {
  Matrix m(length, dim);
  for (std::size_t p = 0; p < length; ++p) {
    for (std::size_t j = 0; j < dim; ++j) {
      const double i2 = static_cast<double>(j - j % 2);
      const double angle =
          static_cast<double>(p) / std::pow(10000.0, i2 / static_cast<double>(dim));
      m(p, j) = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return m;
}

struct EmbeddingTable {
  Var tokens;  // vocab x d
  PositionalKind positional = PositionalKind::kSinusoidal;
  Var learned_positions;  // max_positions x d, only for kLearned

  std::size_t vocab_size() const { return tokens->value.rows(); }
  std::size_t dim() const { return tokens->value.cols(); }

  static EmbeddingTable init(std::size_t vocab, std::size_t dim, PositionalKind kind,
                             std::size_t max_positions, Rng& rng) {
    EmbeddingTable t;
    t.tokens = parameter(normal_matrix(vocab, dim, 1.0 / std::sqrt(static_cast<double>(dim)), rng));
    t.positional = kind;
    if (kind == PositionalKind::kLearned) {
      t.learned_positions = parameter(normal_matrix(max_positions, dim, 0.02, rng));
    }
    return t;
  }

  // Positional rows for the given positions.
  Var positions(std::span<const std::size_t> where) const {
    if (positional == PositionalKind::kLearned) {
      for (std::size_t p : where) {
        if (p >= learned_positions->value.rows()) {
          throw ValidationError("position " + std::to_string(p) + " exceeds learned table of " +
                                std::to_string(learned_positions->value.rows()));
        }
      }
      return gather_rows(learned_positions, where);
    }
    std::size_t longest = 0;
    for (std::size_t p : where) longest = std::max(longest, p + 1);
    const Matrix table = sinusoidal_positions(longest, dim());
    Matrix out(where.size(), dim());
    for (std::size_t r = 0; r < where.size(); ++r) {
      auto src = table.row_span(where[r]);
      std::copy(src.begin(), src.end(), out.row_span(r).begin());
    }
    return constant(std::move(out));
  }
};

// Row h = token embedding of tokens[h] + positional encoding of h.
inline Var embed_tokens(std::span<const std::size_t> tokens, const EmbeddingTable& table) {
  for (std::size_t t : tokens) {
    if (t >= table.vocab_size()) {
      throw ValidationError("token index " + std::to_string(t) + " outside vocabulary of " +
                            std::to_string(table.vocab_size()));
    }
  }
  if (tokens.empty()) return constant(Matrix(0, table.dim()));
  std::vector<std::size_t> pos(tokens.size());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
  return add(gather_rows(table.tokens, tokens), table.positions(pos));
}

}  // namespace dmdk
