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

// Precomputed image feature maps.
//
// A .fmat file is text: a header line "FMAT v1 <rows> <cols>" followed by
// exactly <rows> lines of <cols> whitespace-separated decimal numbers.
// Parsing uses std::from_chars and is independent of the C locale.

#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dmdk/optim.hpp"
#include "dmdk/tensor.hpp"

namespace dmdk {

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T v{};
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

inline Matrix parse_features(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(name + ": empty feature file");
  const auto head = detail::split_ws(line);
  if (head.size() != 4 || head[0] != "FMAT" || head[1] != "v1") {
    throw ValidationError(name + ": expected header 'FMAT v1 <rows> <cols>'");
  }
  const auto rows = detail::parse_number<std::size_t>(head[2]);
  const auto cols = detail::parse_number<std::size_t>(head[3]);
  if (!rows || !cols || *rows == 0 || *cols == 0) {
    throw ValidationError(name + ": header dimensions must be positive integers");
  }
  Matrix m(*rows, *cols);
  std::size_t r = 0;
  while (std::getline(in, line)) {
    const auto cells = detail::split_ws(line);
    if (cells.empty()) continue;
    if (r == *rows) {
      throw ValidationError(name + ": header promises " + std::to_string(*rows) +
                            " rows but the file has more");
    }
    if (cells.size() != *cols) {
      throw ValidationError(name + ": row " + std::to_string(r) + " has " +
                            std::to_string(cells.size()) + " values, expected " +
                            std::to_string(*cols));
    }
    for (std::size_t c = 0; c < *cols; ++c) {
      const auto v = detail::parse_number<double>(cells[c]);
      if (!v || !std::isfinite(*v)) {
        throw ValidationError(name + ": non-numeric value '" + std::string(cells[c]) + "' at row " +
                              std::to_string(r) + ", col " + std::to_string(c));
      }
      m(r, c) = *v;
    }
    ++r;
  }
  if (r != *rows) {
    throw ValidationError(name + ": header promises " + std::to_string(*rows) + " rows, found " +
                          std::to_string(r));
  }
  return m;
}

inline Matrix load_features(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open feature file " + path.string());
  return parse_features(in, path.string());
}

// Writes with round-trip precision.
inline void save_features(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write feature file " + path.string());
  out.imbue(std::locale::classic());
  out << "FMAT v1 " << m.rows() << " " << m.cols() << "\n" << std::setprecision(17);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? " " : "") << m(r, c);
    out << "\n";
  }
}

struct ProjectionParams {
  Var weight;  // d_in x d
  Var bias;    // 1 x d

  static ProjectionParams init(std::size_t in_dim, std::size_t dim, Rng& rng) {
    return {parameter(xavier_uniform(in_dim, dim, rng)), parameter(Matrix(1, dim))};
  }
};

// X = raw W + b.
inline Var project_features(const Var& raw, const ProjectionParams& p) {
  if (raw->value.cols() != p.weight->value.rows()) {
    throw ShapeError("project_features: raw width " + std::to_string(raw->value.cols()) +
                     " but projection expects " + std::to_string(p.weight->value.rows()));
  }
  return add_row(matmul(raw, p.weight), p.bias);
}

enum class ViewFusion { kConcat, kMean };

// Second view absent: identity. Otherwise token-axis concatenation, or the
// elementwise mean of two equally sized views.
inline Var fuse_views(const Var& a, const Var* b, ViewFusion mode = ViewFusion::kConcat) {
  if (b == nullptr) return a;
  if (a->value.cols() != (*b)->value.cols()) {
    throw ShapeError("fuse_views: view widths differ, " + a->value.shape_string() + " vs " +
                     (*b)->value.shape_string());
  }
  if (mode == ViewFusion::kConcat) return concat_rows({a, *b});
  if (a->value.rows() != (*b)->value.rows()) {
    throw ShapeError("fuse_views: mean fusion needs equal token counts, " +
                     a->value.shape_string() + " vs " + (*b)->value.shape_string());
  }
  return scale(add(a, *b), 0.5);
}

}  // namespace dmdk
