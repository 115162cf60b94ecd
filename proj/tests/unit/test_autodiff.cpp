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

#include <cmath>
#include <limits>

#include "mtex/autodiff.hpp"
#include "mtex/error.hpp"
#include "mtex/ops.hpp"
#include "mtex/rng.hpp"

namespace mtex {
namespace {

using TensorD = Tensor<double>;

TensorD make(Shape shape, std::vector<double> data) { return TensorD(std::move(shape), std::move(data)); }

TEST(Autodiff, SumGivesOnes) {
  Tape<double> tape;
  auto x = tape.leaf(Rng(1).uniform_tensor<double>({2, 3}, -1, 1));
  tape.backward(sum(x));
  for (double g : x.grad().data()) EXPECT_EQ(g, 1.0);
}

TEST(Autodiff, InnerProductWithSelfGivesTwoX) {
  Tape<double> tape;
  const TensorD v = Rng(2).uniform_tensor<double>({5}, -2, 2);
  auto x = tape.leaf(v);
  tape.backward(sum(mul(x, x)));
  for (std::size_t i = 0; i < v.numel(); ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 2.0 * v[i]);
}

TEST(Autodiff, NonScalarLossIsRejected) {
  Tape<double> tape;
  auto x = tape.leaf(TensorD({3}, 1.0));
  EXPECT_THROW(tape.backward(x), ShapeError);
}

TEST(Autodiff, ShapeOneLossIsAccepted) {
  Tape<double> tape;
  auto x = tape.leaf(TensorD({1}, 3.0));
  tape.backward(scale(x, 2.0));
  EXPECT_EQ(x.grad()[0], 2.0);
}

TEST(Autodiff, RepeatedBackwardAccumulatesOnLeaves) {
  Tape<double> tape;
  auto x = tape.leaf(TensorD({4}, 1.0));
  const auto loss = scale(sum(x), 3.0);
  tape.backward(loss);
  tape.backward(loss);
  for (double g : x.grad().data()) EXPECT_EQ(g, 6.0);
  tape.zero_grad();
  for (double g : x.grad().data()) EXPECT_EQ(g, 0.0);
}

TEST(Autodiff, GradShapeMatchesValue) {
  Tape<double> tape;
  auto x = tape.leaf(Rng(3).uniform_tensor<double>({1, 2, 4, 4}, -1, 1));
  tape.backward(mean(avg_pool2(relu(x))));
  EXPECT_EQ(x.grad().shape(), x.value().shape());
}

TEST(Autodiff, ConstantsDoNotReceiveGradients) {
  Tape<double> tape;
  auto c = tape.constant(TensorD({2}, 1.0));
  auto x = tape.leaf(TensorD({2}, 2.0));
  tape.backward(sum(mul(c, x)));
  EXPECT_FALSE(c.requires_grad());
  EXPECT_EQ(x.grad()[0], 1.0);
}

TEST(Autodiff, NonFiniteValuesRaise) {
  Tape<double> tape;
  EXPECT_THROW(tape.leaf(TensorD({1}, std::numeric_limits<double>::infinity())), NumericError);
  auto x = tape.leaf(TensorD({1}, 1e200));
  EXPECT_THROW(mul(x, x), NumericError);
}

TEST(Ops, ReluDefinition) {
  Tape<double> tape;
  auto x = tape.leaf(make({2}, {-1.0, 2.0}));
  const auto y = relu(x);
  EXPECT_EQ(y.value()[0], 0.0);
  EXPECT_EQ(y.value()[1], 2.0);
}

TEST(Ops, LeakyReluAndTanh) {
  Tape<double> tape;
  auto x = tape.leaf(make({2}, {-2.0, 3.0}));
  EXPECT_DOUBLE_EQ(leaky_relu(x, 0.1).value()[0], -0.2);
  EXPECT_DOUBLE_EQ(leaky_relu(x, 0.1).value()[1], 3.0);
  EXPECT_DOUBLE_EQ(tanh(x).value()[1], std::tanh(3.0));
}

TEST(Ops, L1NormOfZerosIsZero) {
  Tape<double> tape;
  auto x = tape.leaf(TensorD({3, 3}));
  EXPECT_EQ(l1_norm(x).value().item(), 0.0);
  auto y = tape.leaf(make({3}, {1, -2, 3}));
  EXPECT_EQ(l1_norm(y).value().item(), 6.0);
}

TEST(Ops, ElementwiseShapeMismatchRaises) {
  Tape<double> tape;
  auto a = tape.leaf(TensorD({2, 3}));
  auto b = tape.leaf(TensorD({3, 2}));
  EXPECT_THROW(add(a, b), ShapeError);
  EXPECT_THROW(mul(a, b), ShapeError);
  EXPECT_THROW(reshape(a, {4}), ShapeError);
}

TEST(Ops, AvgPoolAveragesBlocks) {
  Tape<double> tape;
  auto x = tape.leaf(make({1, 1, 2, 2}, {1, 2, 3, 4}));
  const auto y = avg_pool2(x);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(y.value()[0], 2.5);
}

TEST(Ops, UpsampleFactorOneIsIdentity) {
  Tape<double> tape;
  const TensorD v = Rng(4).uniform_tensor<double>({1, 2, 3, 3}, -1, 1);
  auto x = tape.leaf(v);
  EXPECT_EQ(upsample_nearest(x, 1).value().storage(), v.storage());
}

TEST(Ops, UpsampleReplicatesBlocks) {
  Tape<double> tape;
  auto x = tape.leaf(make({1, 1, 2, 2}, {1, 2, 3, 4}));
  const auto y = upsample_nearest(x, 2);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
  const std::vector<double> expected{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  EXPECT_EQ(y.value().storage(), expected);
  EXPECT_THROW(upsample_nearest(x, 0), Error);
}

TEST(Ops, UpsampleBackwardSumsBlock) {
  Tape<double> tape;
  auto x = tape.leaf(Rng(5).uniform_tensor<double>({1, 2, 3, 3}, -1, 1));
  tape.backward(sum(upsample_nearest(x, 2)));
  for (double g : x.grad().data()) EXPECT_EQ(g, 4.0);
}

TEST(Ops, OuterProductExamples) {
  Tape<double> tape;
  auto a = tape.leaf(make({2}, {1, 0}));
  auto b = tape.leaf(make({2}, {2, 3}));
  const auto y = outer_product(a, b);
  ASSERT_EQ(y.shape(), (Shape{2, 2}));
  EXPECT_EQ(y.value().storage(), (std::vector<double>{2, 3, 0, 0}));

  auto z = tape.leaf(TensorD({3}));
  auto d = tape.leaf(Rng(6).uniform_tensor<double>({4}, -1, 1));
  for (double v : outer_product(z, d).value().data()) EXPECT_EQ(v, 0.0);

  auto m = tape.leaf(TensorD({2, 2}));
  EXPECT_THROW(outer_product(m, b), ShapeError);
}

TEST(Ops, ConcatWithEmptyChannelIsNeutral) {
  Tape<double> tape;
  const TensorD v = Rng(7).uniform_tensor<double>({2, 3, 4, 4}, -1, 1);
  auto x = tape.leaf(v);
  auto empty = tape.leaf(TensorD({2, 0, 4, 4}));
  EXPECT_EQ(concat_channels(x, empty).value().storage(), v.storage());
  EXPECT_EQ(concat_channels(empty, x).value().storage(), v.storage());
}

TEST(Ops, ConcatArityAndSliceRecovery) {
  Tape<double> tape;
  const TensorD va = Rng(8).uniform_tensor<double>({1, 2, 4, 4}, -1, 1);
  const TensorD vb = Rng(9).uniform_tensor<double>({1, 3, 4, 4}, -1, 1);
  auto a = tape.leaf(va);
  auto b = tape.leaf(vb);
  const auto c = concat_channels(a, b);
  EXPECT_EQ(c.shape(), (Shape{1, 5, 4, 4}));
  EXPECT_EQ(slice_channels(c, 0, 2).value().storage(), va.storage());
  EXPECT_EQ(slice_channels(c, 2, 5).value().storage(), vb.storage());
  auto bad = tape.leaf(TensorD({1, 3, 4, 5}));
  EXPECT_THROW(concat_channels(a, bad), ShapeError);
}

TEST(Ops, ConcatGradientSplits) {
  Tape<double> tape;
  auto a = tape.leaf(TensorD({1, 1, 2, 2}, 1.0));
  auto b = tape.leaf(TensorD({1, 2, 2, 2}, 1.0));
  auto w = tape.constant(Rng(10).uniform_tensor<double>({1, 3, 2, 2}, -1, 1));
  tape.backward(sum(mul(concat_channels(a, b), w)));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.grad()[i], w.value()[i]);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(b.grad()[i], w.value()[4 + i]);
}

TEST(Ops, BatchHelpers) {
  Tape<double> tape;
  const TensorD v = Rng(11).uniform_tensor<double>({1, 2, 3, 3}, -1, 1);
  auto x = tape.leaf(v);
  const auto r = repeat_batch(x, 3);
  EXPECT_EQ(r.shape(), (Shape{3, 2, 3, 3}));
  EXPECT_EQ(slice_batch(r, 2).value().storage(), v.storage());
  tape.backward(sum(r));
  for (double g : x.grad().data()) EXPECT_EQ(g, 3.0);
}

TEST(Ops, MatmulAndTranspose) {
  Tape<double> tape;
  auto a = tape.leaf(make({2, 3}, {1, 2, 3, 4, 5, 6}));
  const auto g = matmul(a, transpose(a));
  EXPECT_EQ(g.value().storage(), (std::vector<double>{14, 32, 32, 77}));
}

}  // namespace
}  // namespace mtex
