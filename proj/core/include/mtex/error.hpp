// Copyright 2026 The mtex Authors
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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mtex {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes or architecture dimensions that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A NaN or Inf appeared where a finite value was required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Bad user configuration: unknown keys, malformed values, out-of-range ids.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures (missing files, unwritable paths).
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed binary input. Carries the byte offset at which parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset);

  std::size_t offset() const noexcept { return offset_; }
  /// The message without the offset suffix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t offset_;
  std::string detail_;
};

}  // namespace mtex
