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

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mtex/params.hpp"

// Binary weight and model files. All integers are little-endian.
//
// Weight block:
//   char[4]  magic "MTXW"
//   u32      version (1)
//   u32      tensor count
//   per tensor:
//     u32    name length, then that many name bytes (UTF-8)
//     u32    rank, then rank x u32 dimensions
//     f32    product(dims) values, row-major (IEEE-754 binary32)
//
// Model file (weights plus the architecture needed to rebuild them):
//   char[4]  magic "MTXM"
//   u32      version (1)
//   u32      kind length, kind bytes ("generator", "transfer")
//   u32      config entry count
//   per entry: u32 key length, key bytes, i64 value
//   weight block as above

namespace mtex {

inline constexpr std::uint32_t kWeightFormatVersion = 1;

struct ModelFile {
  std::string kind;
  std::vector<std::pair<std::string, std::int64_t>> config;
  ParamSet<float> weights;

  /// Value of a config key; throws FormatError(offset 0) naming the key if absent.
  std::int64_t config_value(const std::string& key) const;

  friend bool operator==(const ModelFile&, const ModelFile&) = default;
};

std::string encode_weights(const ParamSet<float>& weights);
/// Parses a weight block starting at `offset`; advances `offset` past it.
ParamSet<float> decode_weights(const std::string& bytes, std::size_t& offset);

std::string encode_model(const ModelFile& model);
ModelFile decode_model(const std::string& bytes);

void save_weights(const ParamSet<float>& weights, const std::filesystem::path& path);
ParamSet<float> load_weights(const std::filesystem::path& path);

void save_model(const ModelFile& model, const std::filesystem::path& path);
ModelFile load_model_file(const std::filesystem::path& path);

/// Reads an entire file. Throws IoError if it cannot be opened.
std::string read_file_bytes(const std::filesystem::path& path);
/// Writes via a temporary sibling file and rename, so a failed write never
/// leaves a partial file at `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

/// Throws ShapeError unless `loaded` holds exactly the names and shapes of
/// `expected`, naming every expected shape on mismatch.
void require_matching_layout(const ParamSet<float>& expected, const ParamSet<float>& loaded,
                             const std::string& what);

}  // namespace mtex
