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


// Helpers shared by the unit tests.

#pragma once

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "dmdk/dmdk.hpp"

namespace dmdk::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(-scale, scale);
  return m;
}

inline ::testing::AssertionResult matrices_near(const Matrix& a, const Matrix& b, double tol) {
  if (!a.same_shape(b)) {
    return ::testing::AssertionFailure() << "shapes differ: " << a.shape_string() << " vs " << b.shape_string();
  }
  const double d = max_abs_diff(a, b);
  if (d <= tol) return ::testing::AssertionSuccess();
  return ::testing::AssertionFailure() << "max abs diff " << d << " exceeds " << tol;
}

// Checks d sum(f) / d param by central differences for every param.
template <typename F>
void expect_gradients_match(F build, const std::vector<Var>& params, double tol = 1e-6) {
  zero_grad(params);
  backward(build());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Matrix analytic = gradient_of(params[k]);
    const Matrix numeric = finite_diff_grad([&] { return build()->value(0, 0); }, params[k]->value, 1e-5);
    EXPECT_LT(relative_error(analytic, numeric), tol) << "param " << k;
  }
}

// Fresh empty directory under the system temp dir, unique per test.
inline std::filesystem::path scratch_dir() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  auto dir = std::filesystem::temp_directory_path() / "dmdk_tests" /
             (std::string(info->test_suite_name()) + "." + info->name());
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace dmdk::testing
