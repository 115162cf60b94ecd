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

#include "mtex/params.hpp"

#include <utility>

#include "mtex/error.hpp"

namespace mtex {

template <typename T>
void ParamSet<T>::add(std::string name, Tensor<T> value) {
  if (contains(name)) throw Error("duplicate parameter name '" + name + "'");
  entries_.push_back({std::move(name), std::move(value)});
}

template <typename T>
bool ParamSet<T>::contains(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

template <typename T>
const Tensor<T>& ParamSet<T>::get(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.value;
  throw Error("unknown parameter '" + std::string(name) + "'");
}

template <typename T>
Tensor<T>& ParamSet<T>::get(std::string_view name) {
  for (auto& e : entries_)
    if (e.name == name) return e.value;
  throw Error("unknown parameter '" + std::string(name) + "'");
}

template <typename T>
std::size_t ParamSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

template <typename T>
BoundParams<T>::BoundParams(Tape<T>& tape, const ParamSet<T>& params, bool trainable)
    : params_(&params), trainable_(trainable) {
  vars_.reserve(params.size());
  for (const auto& e : params.entries()) {
    vars_.push_back(trainable ? tape.leaf(e.value) : tape.constant(e.value));
  }
}

template <typename T>
BoundParams<T>::BoundParams(const ParamSet<T>& layout, std::vector<Var<T>> vars)
    : params_(&layout), vars_(std::move(vars)), trainable_(true) {
  if (vars_.size() != layout.size()) {
    throw ShapeError("binding " + std::to_string(vars_.size()) + " variables to " +
                     std::to_string(layout.size()) + " parameters");
  }
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    if (vars_[i].shape() != layout.entries()[i].value.shape()) {
      throw ShapeError("parameter '" + layout.entries()[i].name + "' expects " +
                       shape_to_string(layout.entries()[i].value.shape()) + ", got " +
                       shape_to_string(vars_[i].shape()));
    }
  }
}

template <typename T>
const Var<T>& BoundParams<T>::operator[](std::string_view name) const {
  const auto& entries = params_->entries();
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].name == name) return vars_[i];
  throw Error("unknown parameter '" + std::string(name) + "'");
}

template <typename T>
ParamSet<T> BoundParams<T>::gradients() const {
  if (!trainable_) throw Error("gradients requested from frozen parameters");
  ParamSet<T> out;
  const auto& entries = params_->entries();
  for (std::size_t i = 0; i < entries.size(); ++i) out.add(entries[i].name, vars_[i].grad());
  return out;
}

template class ParamSet<float>;
template class ParamSet<double>;
template class BoundParams<float>;
template class BoundParams<double>;

}  // namespace mtex
