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
#include <vector>

#include "mtex/autodiff.hpp"

// Differentiable operations. Every function records one node on the tape of
// its operands; all operands must share a tape. Shape mismatches throw
// ShapeError naming the offending dimensions.

namespace mtex {

// Elementwise arithmetic (identical shapes).
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, double factor);
/// a + s, with single-element `s` broadcast over `a`.
template <typename T> Var<T> shift(const Var<T>& a, const Var<T>& s);

// Reductions to a rank-0 scalar.
template <typename T> Var<T> sum(const Var<T>& a);
template <typename T> Var<T> mean(const Var<T>& a);
/// sum |a_i|. The derivative of |x| at 0 is taken as 0.
template <typename T> Var<T> l1_norm(const Var<T>& a);

// Activations.
template <typename T> Var<T> abs(const Var<T>& a);
template <typename T> Var<T> relu(const Var<T>& a);
template <typename T> Var<T> leaky_relu(const Var<T>& a, double slope);
template <typename T> Var<T> tanh(const Var<T>& a);

// Layout.
template <typename T> Var<T> reshape(const Var<T>& a, Shape shape);
/// Rank-2 transpose.
template <typename T> Var<T> transpose(const Var<T>& a);
/// [m,k] x [k,n] -> [m,n].
template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
/// out[i,j] = a[i] * b[j] for rank-1 operands.
template <typename T> Var<T> outer_product(const Var<T>& a, const Var<T>& b);

// NCHW spatial operations.
/// 2x2 average pooling with stride 2; H and W must be even.
template <typename T> Var<T> avg_pool2(const Var<T>& a);
/// Each pixel replicated into a factor x factor block.
template <typename T> Var<T> upsample_nearest(const Var<T>& a, std::size_t factor);
/// Channel stacking, `a` first. N, H and W must match.
template <typename T> Var<T> concat_channels(const Var<T>& a, const Var<T>& b);
/// Channels [begin, end) of a rank-4 tensor.
template <typename T> Var<T> slice_channels(const Var<T>& a, std::size_t begin, std::size_t end);
/// Stacking along axis 0; all parts share trailing dimensions.
template <typename T> Var<T> concat_batch(const std::vector<Var<T>>& parts);
/// Sample `index` of axis 0, keeping the axis (result has leading dim 1).
template <typename T> Var<T> slice_batch(const Var<T>& a, std::size_t index);
/// Repeats a leading-dim-1 tensor `count` times along axis 0.
template <typename T> Var<T> repeat_batch(const Var<T>& a, std::size_t count);

/// Cross-correlation with zero padding. input [N,C,H,W], kernel [O,C,kh,kw],
/// bias [O].
template <typename T>
Var<T> conv2d(const Var<T>& input, const Var<T>& kernel, const Var<T>& bias,
              std::size_t stride, std::size_t pad);
template <typename T>
Var<T> conv2d(const Var<T>& input, const Var<T>& kernel, std::size_t stride, std::size_t pad);

/// Transposed convolution (the adjoint of conv2d with the same kernel, no
/// padding). input [N,I,H,W], kernel [I,C,kh,kw] -> [N,C,(H-1)*s+kh,(W-1)*s+kw].
template <typename T>
Var<T> full_conv2d(const Var<T>& input, const Var<T>& kernel, std::size_t stride);

}  // namespace mtex
