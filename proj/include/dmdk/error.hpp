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

#include <cstdlib>
#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dmdk {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Input data or configuration failed validation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

namespace log {

enum class Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

// Verbosity is read once from DMDK_LOG (error|warn|info|debug); default warn.
inline Level& threshold() {
  static Level level = [] {
    const char* env = std::getenv("DMDK_LOG");
    if (env == nullptr) return Level::kWarn;
    std::string_view v(env);
    if (v == "error") return Level::kError;
    if (v == "info") return Level::kInfo;
    if (v == "debug") return Level::kDebug;
    return Level::kWarn;
  }();
  return level;
}

inline void emit(Level level, std::string_view tag, std::string_view msg) {
  if (static_cast<int>(level) > static_cast<int>(threshold())) return;
  std::cerr << "[" << tag << "] " << msg << "\n";
}

inline void error(std::string_view msg) { emit(Level::kError, "error", msg); }
inline void warn(std::string_view msg) { emit(Level::kWarn, "warn", msg); }
inline void info(std::string_view msg) { emit(Level::kInfo, "info", msg); }
inline void debug(std::string_view msg) { emit(Level::kDebug, "debug", msg); }

}  // namespace log
}  // namespace dmdk
