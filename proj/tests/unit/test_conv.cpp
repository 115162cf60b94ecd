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

#include <gtest/gtest.h>

#include <tuple>

#include "mtex/autodiff.hpp"
#include "mtex/conv.hpp"
#include "mtex/error.hpp"
#include "mtex/ops.hpp"
#include "mtex/rng.hpp"

namespace mtex {
namespace {

using TensorD = Tensor<double>;

// Straight nested-loop cross-correlation with zero padding.
TensorD reference_conv(const TensorD& x, const TensorD& k, const TensorD* bias, std::size_t stride,
                       std::size_t pad) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t o = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const std::size_t ho = (h + 2 * pad - kh) / stride + 1, wo = (w + 2 * pad - kw) / stride + 1;
  TensorD y({n, o, ho, wo});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t oc = 0; oc < o; ++oc)
      for (std::size_t i = 0; i < ho; ++i)
        for (std::size_t j = 0; j < wo; ++j) {
          double acc = bias ? (*bias)[oc] : 0.0;
          for (std::size_t ic = 0; ic < c; ++ic)
            for (std::size_t u = 0; u < kh; ++u)
              for (std::size_t v = 0; v < kw; ++v) {
                const long yy = long(i * stride + u) - long(pad);
                const long xx = long(j * stride + v) - long(pad);
                if (yy < 0 || xx < 0 || yy >= long(h) || xx >= long(w)) continue;
                acc += x.at({b, ic, std::size_t(yy), std::size_t(xx)}) * k.at({oc, ic, u, v});
              }
          y.at({b, oc, i, j}) = acc;
        }
  return y;
}

double dot(const TensorD& a, const TensorD& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
  return s;
}

TEST(Conv, IdentityKernel) {
  Tape<double> tape;
  const TensorD v = Rng(1).uniform_tensor<double>({1, 1, 3, 3}, -1, 1);
  auto y = conv2d(tape.leaf(v), tape.leaf(TensorD({1, 1, 1, 1}, 1.0)), tape.leaf(TensorD({1})), 1, 0);
  EXPECT_EQ(y.value().storage(), v.storage());
}

TEST(Conv, SumKernel) {
  Tape<double> tape;
  auto y = conv2d(tape.leaf(TensorD({1, 1, 2, 2}, {1, 2, 3, 4})),
                  tape.leaf(TensorD({1, 1, 2, 2}, 1.0)), tape.leaf(TensorD({1})), 1, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(y.value()[0], 10.0);
}

TEST(Conv, SpecShapeMatchesLoopOracle) {
  Rng rng(2);
  const TensorD x = rng.uniform_tensor<double>({1, 2, 5, 5}, -1, 1);
  const TensorD k = rng.uniform_tensor<double>({3, 2, 3, 3}, -1, 1);
  const TensorD b = rng.uniform_tensor<double>({3}, -1, 1);
  Tape<double> tape;
  const auto y = conv2d(tape.leaf(x), tape.leaf(k), tape.leaf(b), 1, 0);
  EXPECT_LT(max_abs_diff(y.value(), reference_conv(x, k, &b, 1, 0)), 1e-6);
}

TEST(Conv, SweepMatchesLoopOracle) {
  Rng rng(3);
  for (std::size_t n : {1, 2})
    for (std::size_t c : {1, 3, 4})
      for (std::size_t hw : {3, 5, 8})
        for (std::size_t ksz : {1, 2, 3})
          for (std::size_t stride : {1, 2})
            for (std::size_t pad : {0, 1}) {
              if (ksz > hw + 2 * pad) continue;
              const TensorD x = rng.uniform_tensor<double>({n, c, hw, hw + 1 > 8 ? 8 : hw + 1}, -1, 1);
              const TensorD k = rng.uniform_tensor<double>({4, c, ksz, ksz}, -1, 1);
              const TensorD got = conv2d_forward(x, k, stride, pad);
              const TensorD want = reference_conv(x, k, nullptr, stride, pad);
              ASSERT_EQ(got.shape(), want.shape());
              ASSERT_LT(max_abs_diff(got, want), 1e-6)
                  << "n=" << n << " c=" << c << " hw=" << hw << " k=" << ksz << " s=" << stride
                  << " p=" << pad;
            }
}

TEST(Conv, FloatAgreesWithDoubleOracle) {
  Rng rng(4);
  const TensorD x = rng.uniform_tensor<double>({2, 4, 8, 8}, -1, 1);
  const TensorD k = rng.uniform_tensor<double>({4, 4, 3, 3}, -1, 1);
  const auto got = conv2d_forward(x.cast<float>(), k.cast<float>(), 1, 1).cast<double>();
  EXPECT_LT(max_abs_diff(got, reference_conv(x, k, nullptr, 1, 1)), 1e-5);
}

TEST(Conv, OutputExtentAndErrors) {
  EXPECT_EQ(conv_output_extent(5, 3, 1, 0, "H"), 3u);
  EXPECT_EQ(conv_output_extent(8, 3, 2, 1, "W"), 4u);
  EXPECT_THROW(conv_output_extent(2, 5, 1, 0, "H"), ShapeError);
  Tape<double> tape;
  auto x = tape.leaf(TensorD({1, 2, 4, 4}));
  auto k = tape.leaf(TensorD({1, 3, 3, 3}));
  try {
    conv2d(x, k, 1, 0);
    FAIL() << "expected a shape error";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("channel"), std::string::npos) << e.what();
  }
  EXPECT_THROW(conv2d(x, tape.leaf(TensorD({1, 2, 3, 3})), 0, 0), ShapeError);
}

TEST(Conv, FullConvOfScalarIsScaledKernel) {
  Tape<double> tape;
  const TensorD kv = Rng(5).uniform_tensor<double>({1, 1, 4, 4}, -1, 1);
  const auto y = full_conv2d(tape.leaf(TensorD({1, 1, 1, 1}, 2.5)), tape.leaf(kv), 1);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
  for (std::size_t i = 0; i < 16; ++i) EXPECT_DOUBLE_EQ(y.value()[i], 2.5 * kv[i]);
}

TEST(Conv, FullConvIsAdjointOfConv) {
  Rng rng(6);
  for (const auto& [h, kh, stride] : {std::tuple<std::size_t, std::size_t, std::size_t>{1, 4, 1},
                                      {3, 3, 1}, {4, 3, 2}, {2, 4, 2}}) {
    const TensorD k = rng.uniform_tensor<double>({3, 2, kh, kh}, -1, 1);
    const std::size_t big = (h - 1) * stride + kh;
    const TensorD a = rng.uniform_tensor<double>({2, 2, big, big}, -1, 1);
    const TensorD b = rng.uniform_tensor<double>({2, 3, h, h}, -1, 1);
    Tape<double> tape;
    const auto up = full_conv2d(tape.leaf(b), tape.leaf(k), stride);
    const TensorD down = conv2d_forward(a, k, stride, 0);
    ASSERT_EQ(down.shape(), b.shape());
    EXPECT_LT(std::abs(dot(down, b) - dot(a, up.value())), 1e-6);
  }
}

TEST(Conv, BackwardMatchesAdjointRelations) {
  // With L = <conv(x,k), g>, dL/dx must be full_conv(g) and dL/dk the correlation of x with g.
  Rng rng(7);
  const TensorD x = rng.uniform_tensor<double>({2, 3, 6, 6}, -1, 1);
  const TensorD k = rng.uniform_tensor<double>({4, 3, 3, 3}, -1, 1);
  Tape<double> tape;
  auto vx = tape.leaf(x);
  auto vk = tape.leaf(k);
  const auto y = conv2d(vx, vk, 1, 1);
  const TensorD g = rng.uniform_tensor<double>(y.shape(), -1, 1);
  tape.backward(sum(mul(y, tape.constant(g))));
  EXPECT_LT(max_abs_diff(vx.grad(), conv2d_backward_input(g, k, x.shape(), 1, 1)), 1e-12);
  // Directional check of the kernel gradient against the loop oracle.
  const TensorD dk = rng.uniform_tensor<double>(k.shape(), -1, 1);
  const double directional = dot(reference_conv(x, dk, nullptr, 1, 1), g);
  EXPECT_NEAR(dot(vk.grad(), dk), directional, 1e-9);
}

}  // namespace
}  // namespace mtex
