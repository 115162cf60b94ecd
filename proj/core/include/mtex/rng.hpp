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
#include <random>
#include <string_view>

#include "mtex/tensor.hpp"

namespace mtex {

/// splitmix64 finalizer: a bijective 64-bit mix used for seed derivation.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Stable 64-bit FNV-1a hash of a stream label.
std::uint64_t stream_label_hash(std::string_view label) noexcept;

/// Deterministic random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Distributions are implemented here rather than through <random>
/// because the standard distributions are not reproducible across library
/// implementations:
///   - uniform():  top 53 bits of one engine draw, scaled to [0, 1)
///   - normal():   Box-Muller on two uniform() draws, second value cached
///   - index(n):   rejection sampling on 64-bit draws, unbiased
///
/// Child streams are derived as splitmix64(seed ^ splitmix64(label_hash)),
/// so one master seed fixes every stream of a run.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  /// Independent stream named by `label`, derived from this stream's seed.
  Rng child(std::string_view label) const;
  /// Independent stream keyed by an integer (e.g. an iteration counter).
  Rng child(std::uint64_t key) const;

  std::uint64_t next_u64();
  double uniform();
  double uniform(double lo, double hi);
  double normal();
  /// Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);

  template <typename T>
  Tensor<T> uniform_tensor(const Shape& shape, double lo, double hi) {
    Tensor<T> out(shape);
    for (auto& v : out.data()) v = static_cast<T>(uniform(lo, hi));
    return out;
  }

  template <typename T>
  Tensor<T> normal_tensor(const Shape& shape, double stddev) {
    Tensor<T> out(shape);
    for (auto& v : out.data()) v = static_cast<T>(stddev * normal());
    return out;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace mtex
