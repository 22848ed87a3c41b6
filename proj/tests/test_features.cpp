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


#include <clocale>
#include <sstream>

#include "support.hpp"

namespace dmdk {
namespace {

using testing::matrices_near;
using testing::random_matrix;
using testing::scratch_dir;
using testing::write_file;

Matrix parse(const std::string& text) {
  std::istringstream in(text);
  return parse_features(in, "mem");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

TEST(LoadFeatures, HeaderAndRows) {
  EXPECT_EQ(parse("FMAT v1 2 3\n1 2 3\n-4.5 +5e-1 6\n"), (Matrix{{1, 2, 3}, {-4.5, 0.5, 6}}));
}

TEST(LoadFeatures, RowCountMismatchNamesBoth) {
  std::string text = "FMAT v1 49 2\n";
  for (int i = 0; i < 48; ++i) text += "0 0\n";
  const auto msg = error_of(text);
  EXPECT_NE(msg.find("49"), std::string::npos) << msg;
  EXPECT_NE(msg.find("48"), std::string::npos) << msg;
  EXPECT_NE(error_of("FMAT v1 1 2\n1 2\n3 4\n"), "");
}

TEST(LoadFeatures, BadCellsAndHeaders) {
  const auto msg = error_of("FMAT v1 2 2\n1 2\n3 x\n");
  EXPECT_NE(msg.find("row 1"), std::string::npos) << msg;
  EXPECT_NE(msg.find("col 1"), std::string::npos) << msg;
  EXPECT_NE(error_of("FMAT v1 1 2\n1 nan\n"), "");
  EXPECT_NE(error_of("FMAT v1 1 2\n1 inf\n"), "");
  EXPECT_NE(error_of("FMAT v1 1 2\n1,5 2\n"), "");
  EXPECT_NE(error_of("FMAT v1 1 3\n1 2\n"), "");
  EXPECT_NE(error_of("FMAT v2 1 1\n1\n"), "");
  EXPECT_NE(error_of("FMAT v1 0 1\n"), "");
  EXPECT_NE(error_of(""), "");
}

TEST(LoadFeatures, PaperScaleFileAccepted) {
  const auto dir = scratch_dir();
  Rng rng(1);
  const Matrix m = random_matrix(49, 2048, rng);
  save_features(dir / "big.fmat", m);
  EXPECT_EQ(load_features(dir / "big.fmat"), m);
  EXPECT_THROW(load_features(dir / "nope.fmat"), IoError);
}

TEST(LoadFeatures, IndependentOfGlobalLocale) {
  const std::string text = "FMAT v1 1 2\n0.25 1.5\n";
  const char* prev = std::setlocale(LC_ALL, nullptr);
  const std::string saved = prev ? prev : "C";
  bool switched = false;
  for (const char* name : {"de_DE.UTF-8", "fr_FR.UTF-8", "de_DE"})
    if (std::setlocale(LC_ALL, name)) {
      switched = true;
      break;
    }
  const Matrix m = parse(text);
  std::setlocale(LC_ALL, saved.c_str());
  EXPECT_EQ(m, (Matrix{{0.25, 1.5}}));
  if (!switched) GTEST_LOG_(INFO) << "no comma-decimal locale installed; parsed under C locale only";
}

TEST(Projection, IdentityAndZero) {
  Rng rng(2);
  const Matrix raw = random_matrix(3, 4, rng);
  ProjectionParams id{parameter(Matrix::identity(4)), parameter(Matrix(1, 4))};
  EXPECT_EQ(project_features(constant(raw), id)->value, raw);
  ProjectionParams zero{parameter(Matrix(4, 2)), parameter(Matrix{{0.5, -1}})};
  const Matrix out = project_features(constant(raw), zero)->value;
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(out(r, 0), 0.5);
    EXPECT_EQ(out(r, 1), -1.0);
  }
}

TEST(Projection, HandMultiplied) {
  ProjectionParams p{parameter(Matrix{{1, 0}, {0, 2}, {1, 1}}), parameter(Matrix{{0, 0.5}})};
  const Matrix raw{{1, 2, 3}, {0, -1, 4}};
  // [1+3, 4+3] + b and [4, -2+4] + b
  EXPECT_EQ(project_features(constant(raw), p)->value, (Matrix{{4, 7.5}, {4, 2.5}}));
  EXPECT_THROW(project_features(constant(Matrix(2, 4)), p), ShapeError);
}

TEST(Projection, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  ProjectionParams p = ProjectionParams::init(5, 3, rng);
  const Var raw = constant(random_matrix(4, 5, rng));
  testing::expect_gradients_match(
      [&] {
        Var x = project_features(raw, p);
        return sum(mul(x, x));
      },
      {p.weight, p.bias}, 1e-6);
}

TEST(FuseViews, SingleViewIsIdentity) {
  Rng rng(4);
  Var a = constant(random_matrix(4, 3, rng));
  EXPECT_EQ(fuse_views(a, nullptr), a);
}

TEST(FuseViews, TwoViewsConcatenateVerbatim) {
  Rng rng(5);
  Var a = constant(random_matrix(49, 6, rng));
  Var b = constant(random_matrix(49, 6, rng));
  const Matrix f = fuse_views(a, &b)->value;
  ASSERT_EQ(f.rows(), 98u);
  ASSERT_EQ(f.cols(), 6u);
  for (std::size_t r = 0; r < 49; ++r)
    for (std::size_t c = 0; c < 6; ++c) {
      EXPECT_EQ(f(r, c), a->value(r, c));
      EXPECT_EQ(f(49 + r, c), b->value(r, c));
    }
}

TEST(FuseViews, MeanModeAndMismatches) {
  Var a = constant(Matrix{{1, 2}});
  Var b = constant(Matrix{{3, 6}});
  EXPECT_EQ(fuse_views(a, &b, ViewFusion::kMean)->value, (Matrix{{2, 4}}));
  Var wide = constant(Matrix(1, 3));
  EXPECT_THROW(fuse_views(a, &wide), ShapeError);
  Var tall = constant(Matrix(2, 2));
  EXPECT_THROW(fuse_views(a, &tall, ViewFusion::kMean), ShapeError);
}

TEST(SaveFeatures, RoundTripIsBitExact) {
  const auto dir = scratch_dir();
  Rng rng(6);
  Matrix m = random_matrix(3, 5, rng, 1e6);
  m(0, 0) = 1e-300;
  m(1, 1) = -0.0;
  save_features(dir / "m.fmat", m);
  EXPECT_EQ(load_features(dir / "m.fmat"), m);
}

}  // namespace
}  // namespace dmdk
