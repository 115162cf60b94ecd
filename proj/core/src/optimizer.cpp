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

#include "mtex/optimizer.hpp"

#include <cmath>

#include "mtex/error.hpp"

namespace mtex {

template <typename T>
Adam<T>::Adam(AdamConfig config, const ParamSet<T>& params) : config_(config) {
  for (const auto& e : params.entries()) {
    first_.emplace_back(e.value.numel(), 0.0);
    second_.emplace_back(e.value.numel(), 0.0);
  }
}

template <typename T>
void Adam<T>::step(ParamSet<T>& params, const ParamSet<T>& grads) {
  auto& pe = params.entries();
  const auto& ge = grads.entries();
  if (pe.size() != first_.size() || ge.size() != pe.size()) {
    throw ShapeError("Adam: parameter/gradient count does not match optimizer state");
  }
  for (std::size_t t = 0; t < ge.size(); ++t) {
    if (ge[t].name != pe[t].name || ge[t].value.shape() != pe[t].value.shape()) {
      throw ShapeError("Adam: gradient '" + ge[t].name + "' does not mirror parameter '" +
                       pe[t].name + "'");
    }
    if (!ge[t].value.all_finite()) {
      throw NumericError("non-finite gradient in '" + ge[t].name + "'");
    }
  }
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t t = 0; t < pe.size(); ++t) {
    auto p = pe[t].value.data();
    const auto g = ge[t].value.data();
    auto& m = first_[t];
    auto& v = second_[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      const double delta =
          config_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
      if (delta != 0.0) p[i] = static_cast<T>(static_cast<double>(p[i]) - delta);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace mtex
