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

#include "mtex/autodiff.hpp"

#include "mtex/error.hpp"

namespace mtex {

template <typename T>
Var<T> Tape<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T> value) {
  if (!value.all_finite()) throw NumericError("leaf value contains NaN or Inf");
  Node node;
  node.grad = Tensor<T>(value.shape());
  node.value = std::move(value);
  node.requires_grad = true;
  node.is_leaf = true;
  node.has_grad = true;
  node.op = "leaf";
  return push(std::move(node));
}

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  if (!value.all_finite()) throw NumericError("constant value contains NaN or Inf");
  Node node;
  node.value = std::move(value);
  node.op = "constant";
  return push(std::move(node));
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, const std::vector<Var<T>>& parents,
                       BackwardFn backward, const char* op) {
  bool needs = false;
  for (const auto& p : parents) {
    if (p.tape_ != this) {
      throw Error(std::string(op) + ": operand belongs to a different tape");
    }
    needs = needs || nodes_[p.id_].requires_grad;
  }
  if (!value.all_finite()) {
    throw NumericError(std::string(op) + " produced a non-finite value (tape node " +
                       std::to_string(nodes_.size()) + ", shape " +
                       shape_to_string(value.shape()) + ")");
  }
  Node node;
  node.value = std::move(value);
  node.requires_grad = needs;
  if (needs) node.backward = std::move(backward);
  node.op = op;
  return push(std::move(node));
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, std::initializer_list<Var<T>> parents,
                       BackwardFn backward, const char* op) {
  return record(std::move(value), std::vector<Var<T>>(parents), std::move(backward), op);
}

template <typename T>
const Tensor<T>& Tape<T>::grad(std::size_t id) const {
  const Node& node = nodes_.at(id);
  if (!node.has_grad) {
    throw Error(std::string("no gradient available for tape node ") +
                std::to_string(id) + " (" + node.op + ")");
  }
  return node.grad;
}

template <typename T>
Tensor<T>* Tape<T>::grad_buffer(std::size_t id) {
  Node& node = nodes_[id];
  if (!node.requires_grad) return nullptr;
  if (!node.has_grad) {
    node.grad = Tensor<T>(node.value.shape());
    node.has_grad = true;
  }
  return &node.grad;
}

template <typename T>
void Tape<T>::accumulate(std::size_t id, const Tensor<T>& delta) {
  Tensor<T>* g = grad_buffer(id);
  if (g == nullptr) return;
  if (g->shape() != delta.shape()) {
    throw ShapeError(std::string("gradient shape ") + shape_to_string(delta.shape()) +
                     " does not match node shape " + shape_to_string(g->shape()) +
                     " (" + nodes_[id].op + ")");
  }
  auto dst = g->data();
  auto src = delta.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
void Tape<T>::backward(const Var<T>& loss) {
  if (loss.tape_ != this) throw Error("backward: loss belongs to a different tape");
  const std::size_t root = loss.id_;
  if (nodes_[root].value.numel() != 1) {
    throw ShapeError("backward requires a scalar loss, got shape " +
                     shape_to_string(nodes_[root].value.shape()));
  }
  for (std::size_t i = 0; i <= root; ++i) {
    Node& node = nodes_[i];
    if (!node.is_leaf && node.has_grad) node.grad.fill(T{0});
  }
  if (!nodes_[root].requires_grad) return;
  Tensor<T>* seed = grad_buffer(root);
  if (nodes_[root].is_leaf) {
    (*seed)[0] += T{1};
    return;
  }
  (*seed)[0] = T{1};
  for (std::size_t i = root + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || node.is_leaf || !node.has_grad || !node.backward) continue;
    node.backward(*this, i);
  }
}

template <typename T>
void Tape<T>::zero_grad() {
  for (Node& node : nodes_) {
    if (node.has_grad) node.grad.fill(T{0});
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace mtex
