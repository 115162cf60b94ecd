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

#include "mtex/tensor.hpp"

// Raw (non-differentiable) 2-D convolution kernels on NCHW tensors.
//
// Semantics are cross-correlation:
//   y[n,o,i,j] = sum_{c,p,q} w[o,c,p,q] * x[n,c, i*stride+p-pad, j*stride+q-pad]
// with zero padding. Internally each sample is unrolled to a column matrix and
// multiplied by the kernel matrix.

namespace mtex {

/// Output extent of a convolution along one axis. Throws ShapeError naming
/// `axis_name` if the kernel does not fit.
std::size_t conv_output_extent(std::size_t input, std::size_t kernel, std::size_t stride,
                               std::size_t pad, const char* axis_name);

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& kernel,
                         std::size_t stride, std::size_t pad);

/// Gradient w.r.t. the input given the output gradient. This is also the
/// transposed convolution of `grad_output` with `kernel`.
template <typename T>
Tensor<T> conv2d_backward_input(const Tensor<T>& grad_output, const Tensor<T>& kernel,
                                const Shape& input_shape, std::size_t stride,
                                std::size_t pad);

template <typename T>
Tensor<T> conv2d_backward_kernel(const Tensor<T>& input, const Tensor<T>& grad_output,
                                 const Shape& kernel_shape, std::size_t stride,
                                 std::size_t pad);

}  // namespace mtex
