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
#include <string>
#include <vector>

#include "mtex/tensor.hpp"

namespace mtex {

/// Names accepted by procedural_texture().
const std::vector<std::string>& procedural_texture_names();

/// Deterministic synthetic exemplar [3,size,size] with values in [-1,1].
/// Used for demos and tests where no photographic exemplars are available.
/// Throws ConfigError for unknown names.
Tensor<float> procedural_texture(const std::string& name, std::size_t size, std::uint64_t seed = 1);

/// Resolves an image reference to a [3,H,W] tensor in [-1,1]. `spec` is a
/// PNG path or `builtin:<name>[:<size>]`. With `size` > 0 the image must be
/// size x size, or is box-resized to it when `resize` is set; with `size` 0
/// files keep their own size and builtins need an explicit `:<size>`.
Tensor<float> load_exemplar(const std::string& spec, std::size_t size, bool resize);

}  // namespace mtex
