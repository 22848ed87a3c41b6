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


#include <cmath>
#include <numbers>

#include "support.hpp"

namespace dmdk {
namespace {

using testing::expect_gradients_match;
using testing::matrices_near;
using testing::random_matrix;

HeadParams identity_head(std::size_t d) {
  return {parameter(Matrix::identity(d)), parameter(Matrix::identity(d)), parameter(Matrix::identity(d))};
}

// Plain loops, no shared code with the library kernels.
Matrix oracle_head(const Matrix& x, const Matrix& y, const Matrix& wq, const Matrix& wk, const Matrix& wv,
                   bool causal) {
  auto mm = [](const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < b.cols(); ++j) {
        double s = 0;
        for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
        c(i, j) = s;
      }
    return c;
  };
  const Matrix q = mm(x, wq), k = mm(y, wk), v = mm(y, wv);
  Matrix out(x.rows(), wv.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const std::size_t n = causal ? i + 1 : y.rows();
    std::vector<double> w(n);
    double total = 0;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0;
      for (std::size_t c = 0; c < q.cols(); ++c) s += q(i, c) * k(j, c);
      w[j] = std::exp(s / std::sqrt(static_cast<double>(q.cols())));
      total += w[j];
    }
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t c = 0; c < v.cols(); ++c) out(i, c) += w[j] / total * v(j, c);
  }
  return out;
}

TEST(ScaledDotAttention, SingleKeyReturnsItsValue) {
  Rng rng(1);
  MhaParams p = MhaParams::init(4, 2, rng);
  const Matrix x = random_matrix(3, 4, rng), y = random_matrix(1, 4, rng);
  Var out = scaled_dot_attention(constant(x), constant(y), p.heads[0]);
  const Matrix v = kernel::matmul(y, p.heads[0].value->value);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(out->value(r, c), v(0, c), 1e-15);
}

TEST(ScaledDotAttention, ZeroQueryAveragesValues) {
  Rng rng(2);
  HeadParams h{parameter(Matrix(3, 3)), parameter(random_matrix(3, 3, rng)), parameter(random_matrix(3, 3, rng))};
  const Matrix y = random_matrix(4, 3, rng);
  Var out = scaled_dot_attention(constant(random_matrix(2, 3, rng)), constant(y), h);
  const Matrix v = kernel::matmul(y, h.value->value);
  for (std::size_t c = 0; c < 3; ++c) {
    const double mean = (v(0, c) + v(1, c) + v(2, c) + v(3, c)) / 4;
    EXPECT_NEAR(out->value(0, c), mean, 1e-14);
    EXPECT_NEAR(out->value(1, c), mean, 1e-14);
  }
}

TEST(ScaledDotAttention, LogThreeScoresWeightValuesOneToThree) {
  // One head of width 2, identity projections: scores are x.y / sqrt(2),
  // so the second key scores ln 3 and gets weight 3/4.
  const double ln3 = std::log(3.0);
  Var x = constant(Matrix{{1, 0}});
  Var y = constant(Matrix{{0, 1}, {ln3 * std::sqrt(2.0), 5}});
  Var out = scaled_dot_attention(x, y, identity_head(2));
  EXPECT_NEAR(out->value(0, 1), 0.25 * 1 + 0.75 * 5, 1e-12);
}

TEST(ScaledDotAttention, ShapeErrors) {
  Rng rng(3);
  MhaParams p = MhaParams::init(4, 1, rng);
  EXPECT_THROW(scaled_dot_attention(constant(Matrix(2, 3)), constant(Matrix(2, 4)), p.heads[0]), ShapeError);
  EXPECT_THROW(scaled_dot_attention(constant(Matrix(2, 4)), constant(Matrix(3, 4)), p.heads[0], true), ShapeError);
}

TEST(ScaledDotAttention, MatchesLoopOracle) {
  Rng rng(4);
  for (bool causal : {false, true}) {
    MhaParams p = MhaParams::init(6, 3, rng);
    const Matrix x = random_matrix(5, 6, rng);
    const Matrix y = causal ? random_matrix(5, 6, rng) : random_matrix(7, 6, rng);
    for (const auto& h : p.heads) {
      Var out = scaled_dot_attention(constant(x), constant(y), h, causal);
      EXPECT_TRUE(matrices_near(out->value, oracle_head(x, y, h.query->value, h.key->value, h.value->value, causal),
                                1e-12));
    }
  }
}

TEST(ScaledDotAttention, WeightsAreDistributionsAndOutputInConvexHull) {
  Rng rng(5);
  MhaParams p = MhaParams::init(4, 2, rng);
  const Matrix x = random_matrix(6, 4, rng, 3.0), y = random_matrix(5, 4, rng, 3.0);
  for (const auto& h : p.heads) {
    const Matrix w = attention_weights(x, y, h);
    for (std::size_t r = 0; r < w.rows(); ++r) {
      double s = 0;
      for (double v : w.row_span(r)) {
        EXPECT_GE(v, 0.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
    const Matrix v = kernel::matmul(y, h.value->value);
    const Matrix out = scaled_dot_attention(constant(x), constant(y), h)->value;
    for (std::size_t r = 0; r < out.rows(); ++r)
      for (std::size_t c = 0; c < out.cols(); ++c) {
        double lo = v(0, c), hi = v(0, c);
        for (std::size_t j = 1; j < v.rows(); ++j) {
          lo = std::min(lo, v(j, c));
          hi = std::max(hi, v(j, c));
        }
        EXPECT_GE(out(r, c), lo - 1e-12);
        EXPECT_LE(out(r, c), hi + 1e-12);
      }
  }
}

TEST(ScaledDotAttention, CausalRowIgnoresLaterPositions) {
  Rng rng(6);
  MhaParams p = MhaParams::init(4, 2, rng);
  const Matrix x = random_matrix(5, 4, rng);
  for (std::size_t h = 0; h < 5; ++h) {
    Matrix y2 = x;
    for (std::size_t r = h + 1; r < 5; ++r)
      for (std::size_t c = 0; c < 4; ++c) y2(r, c) += rng.uniform(-5, 5);
    // Self-attention with queries fixed, keys/values changed after h.
    const Matrix a = multi_head_attention(constant(x), constant(x), p, true)->value;
    const Matrix b = multi_head_attention(constant(x), constant(y2), p, true)->value;
    for (std::size_t r = 0; r <= h; ++r)
      for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(a(r, c), b(r, c)) << "row " << r;
  }
}

TEST(MultiHeadAttention, SingleHeadWithIdentityOutputCollapses) {
  Rng rng(7);
  MhaParams p = MhaParams::init(4, 1, rng);
  p.output = parameter(Matrix::identity(4));
  const Var x = constant(random_matrix(3, 4, rng)), y = constant(random_matrix(5, 4, rng));
  EXPECT_EQ(multi_head_attention(x, y, p)->value, scaled_dot_attention(x, y, p.heads[0])->value);
}

TEST(MultiHeadAttention, OutputShapeIndependentOfKeyLength) {
  Rng rng(8);
  MhaParams p = MhaParams::init(8, 4, rng);
  for (std::size_t ly : {1u, 2u, 9u}) {
    Var out = multi_head_attention(constant(random_matrix(3, 8, rng)), constant(random_matrix(ly, 8, rng)), p);
    EXPECT_EQ(out->value.rows(), 3u);
    EXPECT_EQ(out->value.cols(), 8u);
  }
}

TEST(MultiHeadAttention, TwoHeadsMatchConcatThenProjectOracle) {
  Rng rng(9);
  MhaParams p = MhaParams::init(4, 2, rng);
  const Matrix x = random_matrix(3, 4, rng), y = random_matrix(5, 4, rng);
  Matrix cat(3, 4);
  for (std::size_t h = 0; h < 2; ++h) {
    const auto& hp = p.heads[h];
    const Matrix o = oracle_head(x, y, hp.query->value, hp.key->value, hp.value->value, false);
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 2; ++c) cat(r, 2 * h + c) = o(r, c);
  }
  Matrix expected(3, 4);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t k = 0; k < 4; ++k) expected(i, j) += cat(i, k) * p.output->value(k, j);
  EXPECT_TRUE(matrices_near(multi_head_attention(constant(x), constant(y), p)->value, expected, 1e-12));
}

TEST(MultiHeadAttention, IndivisibleWidthRejected) {
  Rng rng(10);
  EXPECT_THROW(MhaParams::init(6, 4, rng), ValidationError);
  EXPECT_THROW(MhaParams::init(6, 0, rng), ValidationError);
}

TEST(MultiHeadAttention, GradientsMatchFiniteDifferences) {
  Rng rng(11);
  MhaParams p = MhaParams::init(4, 2, rng);
  auto x = parameter(random_matrix(3, 4, rng));
  auto y = parameter(random_matrix(4, 4, rng));
  std::vector<Var> params{x, y, p.output};
  for (const auto& h : p.heads) params.insert(params.end(), {h.query, h.key, h.value});
  expect_gradients_match([&] { return sum(mul(multi_head_attention(x, y, p), multi_head_attention(x, y, p))); },
                         params, 1e-6);
  expect_gradients_match([&] { return sum(relu(multi_head_attention(x, x, p, true))); }, params, 1e-6);
}

TEST(FeedForward, ZeroWeightsGiveOutputBias) {
  Rng rng(12);
  FfnParams p = FfnParams::init(3, 4, rng);
  p.w_in = parameter(Matrix(3, 12));
  p.w_out = parameter(Matrix(12, 3));
  p.b_out = parameter(Matrix{{1, -2, 0.5}});
  Var out = feed_forward(constant(random_matrix(5, 3, rng)), p);
  for (std::size_t r = 0; r < 5; ++r) EXPECT_EQ(out->value(r, 1), -2.0);
}

TEST(FeedForward, ScalarHandTrace) {
  // d = 1, inner 4: relu(2x - 1 | x + 1 | -x | 0) . (1, 2, 3, 4) + 0.5 at x = 3
  // = 5 + 8 + 0 + 0 + 0.5.
  FfnParams p{parameter(Matrix{{2, 1, -1, 0}}), parameter(Matrix{{-1, 1, 0, 0}}),
              parameter(Matrix{{1}, {2}, {3}, {4}}), parameter(Matrix{{0.5}})};
  EXPECT_DOUBLE_EQ(feed_forward(constant(Matrix{{3}}), p)->value(0, 0), 13.5);
}

TEST(FeedForward, ShapePreservedAndInnerWidthIsMultiple) {
  Rng rng(13);
  FfnParams p = FfnParams::init(6, 4, rng);
  EXPECT_EQ(p.w_in->value.cols(), 24u);
  Var out = feed_forward(constant(random_matrix(7, 6, rng)), p);
  EXPECT_EQ(out->value.rows(), 7u);
  EXPECT_EQ(out->value.cols(), 6u);
  EXPECT_THROW(feed_forward(constant(Matrix(2, 5)), p), ShapeError);
}

TEST(FeedForward, GradientsMatchFiniteDifferences) {
  Rng rng(14);
  FfnParams p = FfnParams::init(3, 4, rng);
  for (double& v : p.b_in->value.data()) v = rng.uniform(-0.5, 0.5);
  auto x = parameter(random_matrix(4, 3, rng));
  expect_gradients_match([&] { return sum(mul(feed_forward(x, p), feed_forward(x, p))); },
                         {x, p.w_in, p.b_in, p.w_out, p.b_out}, 1e-6);
}

TEST(Embedding, EmptySequenceGivesZeroRows) {
  Rng rng(15);
  auto t = EmbeddingTable::init(10, 6, PositionalKind::kSinusoidal, 32, rng);
  Var e = embed_tokens(std::vector<std::size_t>{}, t);
  EXPECT_EQ(e->value.rows(), 0u);
  EXPECT_EQ(e->value.cols(), 6u);
}

TEST(Embedding, RepeatedTokenDiffersByPositionalRows) {
  Rng rng(16);
  for (auto kind : {PositionalKind::kSinusoidal, PositionalKind::kLearned}) {
    auto t = EmbeddingTable::init(10, 6, kind, 32, rng);
    const std::vector<std::size_t> toks{4, 4};
    const Matrix e = embed_tokens(toks, t)->value;
    const Matrix pos = t.positions(std::vector<std::size_t>{0, 1})->value;
    for (std::size_t c = 0; c < 6; ++c) {
      EXPECT_NEAR(e(1, c) - e(0, c), pos(1, c) - pos(0, c), 1e-15);
    }
  }
}

TEST(Embedding, SinusoidalPositionZeroAlternatesZeroOne) {
  const Matrix s = sinusoidal_positions(3, 8);
  for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(s(0, c), c % 2 == 0 ? 0.0 : 1.0);
  EXPECT_NEAR(s(1, 0), std::sin(1.0), 1e-15);
  EXPECT_NEAR(s(1, 3), std::cos(1.0 / std::pow(10000.0, 2.0 / 8)), 1e-15);
}

TEST(Embedding, OutOfVocabularyRejected) {
  Rng rng(17);
  auto t = EmbeddingTable::init(5, 4, PositionalKind::kSinusoidal, 8, rng);
  EXPECT_THROW(embed_tokens(std::vector<std::size_t>{1, 5}, t), ValidationError);
  auto learned = EmbeddingTable::init(5, 4, PositionalKind::kLearned, 2, rng);
  EXPECT_THROW(embed_tokens(std::vector<std::size_t>{1, 2, 3}, learned), ValidationError);
}

}  // namespace
}  // namespace dmdk
