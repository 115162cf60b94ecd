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

#include "mtex/conv.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <string>
#include <vector>

#include "mtex/error.hpp"

namespace mtex {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

struct Geometry {
  std::size_t batch, channels, height, width;
  std::size_t out_channels, kh, kw;
  std::size_t out_h, out_w;
  std::size_t stride, pad;

  std::size_t patch() const { return channels * kh * kw; }
  std::size_t positions() const { return out_h * out_w; }
};

Geometry make_geometry(const Shape& input, const Shape& kernel, std::size_t stride,
                       std::size_t pad) {
  if (input.size() != 4) {
    throw ShapeError("conv2d: input must be rank 4 (N,C,H,W), got " + shape_to_string(input));
  }
  if (kernel.size() != 4) {
    throw ShapeError("conv2d: kernel must be rank 4 (O,C,kh,kw), got " +
                     shape_to_string(kernel));
  }
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  if (input[1] != kernel[1]) {
    throw ShapeError("conv2d: input has " + std::to_string(input[1]) +
                     " channels but kernel expects " + std::to_string(kernel[1]) +
                     " (input " + shape_to_string(input) + ", kernel " +
                     shape_to_string(kernel) + ")");
  }
  Geometry g{};
  g.batch = input[0];
  g.channels = input[1];
  g.height = input[2];
  g.width = input[3];
  g.out_channels = kernel[0];
  g.kh = kernel[2];
  g.kw = kernel[3];
  g.stride = stride;
  g.pad = pad;
  g.out_h = conv_output_extent(g.height, g.kh, stride, pad, "height");
  g.out_w = conv_output_extent(g.width, g.kw, stride, pad, "width");
  return g;
}

// cols[(c*kh + p)*kw + q, i*out_w + j] = x[c, i*s+p-pad, j*s+q-pad]
template <typename T>
void im2col(const T* x, const Geometry& g, T* cols) {
  const std::size_t positions = g.positions();
  for (std::size_t c = 0; c < g.channels; ++c) {
    const T* plane = x + c * g.height * g.width;
    for (std::size_t p = 0; p < g.kh; ++p) {
      for (std::size_t q = 0; q < g.kw; ++q) {
        T* row = cols + ((c * g.kh + p) * g.kw + q) * positions;
        for (std::size_t i = 0; i < g.out_h; ++i) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(i * g.stride + p) -
                                   static_cast<std::ptrdiff_t>(g.pad);
          T* out = row + i * g.out_w;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill(out, out + g.out_w, T{0});
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(y) * g.width;
          for (std::size_t j = 0; j < g.out_w; ++j) {
            const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(j * g.stride + q) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            out[j] = (xx < 0 || xx >= static_cast<std::ptrdiff_t>(g.width))
                         ? T{0}
                         : src[static_cast<std::size_t>(xx)];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back into the image.
template <typename T>
void col2im(const T* cols, const Geometry& g, T* x) {
  const std::size_t positions = g.positions();
  for (std::size_t c = 0; c < g.channels; ++c) {
    T* plane = x + c * g.height * g.width;
    for (std::size_t p = 0; p < g.kh; ++p) {
      for (std::size_t q = 0; q < g.kw; ++q) {
        const T* row = cols + ((c * g.kh + p) * g.kw + q) * positions;
        for (std::size_t i = 0; i < g.out_h; ++i) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(i * g.stride + p) -
                                   static_cast<std::ptrdiff_t>(g.pad);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.height)) continue;
          T* dst = plane + static_cast<std::size_t>(y) * g.width;
          const T* in = row + i * g.out_w;
          for (std::size_t j = 0; j < g.out_w; ++j) {
            const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(j * g.stride + q) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(g.width)) continue;
            dst[static_cast<std::size_t>(xx)] += in[j];
          }
        }
      }
    }
  }
}

// 1x1 stride-1 unpadded kernels need no unrolling: the image is its own
// column matrix.
bool is_pointwise(const Geometry& g) {
  return g.kh == 1 && g.kw == 1 && g.stride == 1 && g.pad == 0;
}

}  // namespace

std::size_t conv_output_extent(std::size_t input, std::size_t kernel, std::size_t stride,
                               std::size_t pad, const char* axis_name) {
  if (kernel == 0 || kernel > input + 2 * pad) {
    throw ShapeError(std::string("conv2d: kernel ") + axis_name + " " +
                     std::to_string(kernel) + " exceeds padded input " + axis_name + " " +
                     std::to_string(input + 2 * pad));
  }
  return (input + 2 * pad - kernel) / stride + 1;
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& kernel, std::size_t stride,
                         std::size_t pad) {
  const Geometry g = make_geometry(input.shape(), kernel.shape(), stride, pad);
  Tensor<T> out({g.batch, g.out_channels, g.out_h, g.out_w});
  const std::size_t in_sample = g.channels * g.height * g.width;
  const std::size_t out_sample = g.out_channels * g.positions();
  const bool pointwise = is_pointwise(g);
  std::vector<T> cols(pointwise ? 0 : g.patch() * g.positions());
  ConstMatrixMap<T> weights(kernel.data().data(), g.out_channels, g.patch());
  for (std::size_t n = 0; n < g.batch; ++n) {
    const T* x = input.data().data() + n * in_sample;
    if (!pointwise) im2col(x, g, cols.data());
    ConstMatrixMap<T> colmat(pointwise ? x : cols.data(), g.patch(), g.positions());
    MatrixMap<T> y(out.data().data() + n * out_sample, g.out_channels, g.positions());
    y.noalias() = weights * colmat;
  }
  return out;
}

template <typename T>
Tensor<T> conv2d_backward_input(const Tensor<T>& grad_output, const Tensor<T>& kernel,
                                const Shape& input_shape, std::size_t stride,
                                std::size_t pad) {
  const Geometry g = make_geometry(input_shape, kernel.shape(), stride, pad);
  const Shape expected{g.batch, g.out_channels, g.out_h, g.out_w};
  if (grad_output.shape() != expected) {
    throw ShapeError("conv2d backward: output gradient " +
                     shape_to_string(grad_output.shape()) + " does not match expected " +
                     shape_to_string(expected));
  }
  Tensor<T> grad_in(input_shape);
  const std::size_t in_sample = g.channels * g.height * g.width;
  const std::size_t out_sample = g.out_channels * g.positions();
  const bool pointwise = is_pointwise(g);
  std::vector<T> cols(pointwise ? 0 : g.patch() * g.positions());
  ConstMatrixMap<T> weights(kernel.data().data(), g.out_channels, g.patch());
  for (std::size_t n = 0; n < g.batch; ++n) {
    ConstMatrixMap<T> gy(grad_output.data().data() + n * out_sample, g.out_channels,
                         g.positions());
    T* gx = grad_in.data().data() + n * in_sample;
    if (pointwise) {
      MatrixMap<T> dst(gx, g.patch(), g.positions());
      dst.noalias() = weights.transpose() * gy;
    } else {
      MatrixMap<T> colmat(cols.data(), g.patch(), g.positions());
      colmat.noalias() = weights.transpose() * gy;
      col2im(cols.data(), g, gx);
    }
  }
  return grad_in;
}

template <typename T>
Tensor<T> conv2d_backward_kernel(const Tensor<T>& input, const Tensor<T>& grad_output,
                                 const Shape& kernel_shape, std::size_t stride,
                                 std::size_t pad) {
  const Geometry g = make_geometry(input.shape(), kernel_shape, stride, pad);
  const Shape expected{g.batch, g.out_channels, g.out_h, g.out_w};
  if (grad_output.shape() != expected) {
    throw ShapeError("conv2d backward: output gradient " +
                     shape_to_string(grad_output.shape()) + " does not match expected " +
                     shape_to_string(expected));
  }
  Tensor<T> grad_kernel(kernel_shape);
  MatrixMap<T> gw(grad_kernel.data().data(), g.out_channels, g.patch());
  const std::size_t in_sample = g.channels * g.height * g.width;
  const std::size_t out_sample = g.out_channels * g.positions();
  const bool pointwise = is_pointwise(g);
  std::vector<T> cols(pointwise ? 0 : g.patch() * g.positions());
  for (std::size_t n = 0; n < g.batch; ++n) {
    const T* x = input.data().data() + n * in_sample;
    if (!pointwise) im2col(x, g, cols.data());
    ConstMatrixMap<T> colmat(pointwise ? x : cols.data(), g.patch(), g.positions());
    ConstMatrixMap<T> gy(grad_output.data().data() + n * out_sample, g.out_channels,
                         g.positions());
    gw.noalias() += gy * colmat.transpose();
  }
  return grad_kernel;
}

template Tensor<float> conv2d_forward(const Tensor<float>&, const Tensor<float>&,
                                      std::size_t, std::size_t);
template Tensor<double> conv2d_forward(const Tensor<double>&, const Tensor<double>&,
                                       std::size_t, std::size_t);
template Tensor<float> conv2d_backward_input(const Tensor<float>&, const Tensor<float>&,
                                             const Shape&, std::size_t, std::size_t);
template Tensor<double> conv2d_backward_input(const Tensor<double>&, const Tensor<double>&,
                                              const Shape&, std::size_t, std::size_t);
template Tensor<float> conv2d_backward_kernel(const Tensor<float>&, const Tensor<float>&,
                                              const Shape&, std::size_t, std::size_t);
template Tensor<double> conv2d_backward_kernel(const Tensor<double>&, const Tensor<double>&,
                                               const Shape&, std::size_t, std::size_t);

}  // namespace mtex
