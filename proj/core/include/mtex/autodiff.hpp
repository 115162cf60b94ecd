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
#include <functional>
#include <string>
#include <vector>

#include "mtex/tensor.hpp"

namespace mtex {

template <typename T>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid as long as the
/// tape it belongs to is alive.
template <typename T>
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }

  const Tensor<T>& value() const;
  const Tensor<T>& grad() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run reverse-mode differentiation tape.
///
/// Every forward operation appends one node. backward() walks nodes in
/// reverse creation order, which is a valid topological order. A tape is
/// single-threaded; build one tape per worker.
template <typename T>
class Tape {
 public:
  /// Propagates the gradient of node `self` into its parents.
  using BackwardFn = std::function<void(Tape& tape, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// A differentiable input. Its gradient starts at zero and accumulates
  /// across backward() calls until zero_grad().
  Var<T> leaf(Tensor<T> value);
  /// An input that never receives gradient (frozen weights, targets).
  Var<T> constant(Tensor<T> value);

  /// Appends the result of an operation. Throws NumericError if `value`
  /// contains NaN or Inf, naming `op`.
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> parents,
                BackwardFn backward, const char* op);
  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& parents,
                BackwardFn backward, const char* op);

  /// Populates gradients of everything `loss` depends on. `loss` must hold a
  /// single element. Intermediate gradients are recomputed on every call;
  /// leaf gradients accumulate.
  void backward(const Var<T>& loss);
  void zero_grad();

  std::size_t size() const noexcept { return nodes_.size(); }
  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  const Tensor<T>& grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  const char* op_name(std::size_t id) const { return nodes_.at(id).op; }

  /// Adds `delta` into the gradient of `id`, if that node takes gradient.
  /// Intended for BackwardFn implementations.
  void accumulate(std::size_t id, const Tensor<T>& delta);
  /// Mutable gradient buffer for in-place accumulation inside a BackwardFn.
  /// Returns nullptr if the node takes no gradient.
  Tensor<T>* grad_buffer(std::size_t id);

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    bool is_leaf = false;
    bool has_grad = false;
    BackwardFn backward;
    const char* op = "";
  };

  Var<T> push(Node node);

  std::vector<Node> nodes_;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape_->value(id_);
}

template <typename T>
const Tensor<T>& Var<T>::grad() const {
  return tape_->grad(id_);
}

template <typename T>
bool Var<T>::requires_grad() const {
  return tape_->requires_grad(id_);
}

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace mtex
