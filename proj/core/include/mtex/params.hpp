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
#include <string>
#include <string_view>
#include <vector>

#include "mtex/autodiff.hpp"
#include "mtex/tensor.hpp"

namespace mtex {

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> value;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Ordered collection of uniquely named tensors: the learnable (or frozen)
/// weights of a network. Order is insertion order and is the on-disk order.
template <typename T>
class ParamSet {
 public:
  void add(std::string name, Tensor<T> value);

  bool contains(std::string_view name) const;
  const Tensor<T>& get(std::string_view name) const;
  Tensor<T>& get(std::string_view name);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  /// Total number of scalars across all tensors.
  std::size_t scalar_count() const;

  std::vector<NamedTensor<T>>& entries() noexcept { return entries_; }
  const std::vector<NamedTensor<T>>& entries() const noexcept { return entries_; }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& e : entries_) out.add(e.name, e.value.template cast<U>());
    return out;
  }

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<NamedTensor<T>> entries_;
};

/// A ParamSet recorded on a tape, as leaves (trainable) or constants.
template <typename T>
class BoundParams {
 public:
  BoundParams(Tape<T>& tape, const ParamSet<T>& params, bool trainable);
  /// Names already-recorded variables after the entries of `layout`, which
  /// must outlive this object.
  BoundParams(const ParamSet<T>& layout, std::vector<Var<T>> vars);

  const Var<T>& operator[](std::string_view name) const;
  const std::vector<Var<T>>& vars() const noexcept { return vars_; }

  /// Gradients gathered after backward(), in parameter order.
  ParamSet<T> gradients() const;

 private:
  const ParamSet<T>* params_;
  std::vector<Var<T>> vars_;
  bool trainable_;
};

extern template class ParamSet<float>;
extern template class ParamSet<double>;
extern template class BoundParams<float>;
extern template class BoundParams<double>;

}  // namespace mtex
