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

#include <algorithm>
#include <cmath>
#include <map>

#include "mtex/error.hpp"
#include "mtex/loss_network.hpp"
#include "mtex/ops.hpp"
#include "mtex/rng.hpp"
#include "mtex/texture_stats.hpp"

namespace mtex {
namespace {

using TensorD = Tensor<double>;

// Direct double loop over channel pairs and positions.
TensorD reference_gram(const TensorD& f, bool centered) {
  const std::size_t c = f.dim(0), hw = f.dim(1) * f.dim(2);
  double mu = 0.0;
  if (centered) {
    for (double v : f.data()) mu += v;
    mu /= static_cast<double>(f.numel());
  }
  TensorD g({c, c});
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < hw; ++k) acc += (f[i * hw + k] - mu) * (f[j * hw + k] - mu);
      g.at({i, j}) = acc / static_cast<double>(hw);
    }
  return g;
}

// Smallest value of x^T G x over many random unit vectors plus the basis.
double min_quadratic_form(const TensorD& g, Rng& rng) {
  const std::size_t c = g.dim(0);
  double lowest = 1e300;
  for (int trial = 0; trial < 2000 + static_cast<int>(c); ++trial) {
    std::vector<double> x(c, 0.0);
    if (trial < static_cast<int>(c)) {
      x[trial] = 1.0;
    } else {
      double norm = 0.0;
      for (auto& v : x) {
        v = rng.normal();
        norm += v * v;
      }
      for (auto& v : x) v /= std::sqrt(norm);
    }
    double q = 0.0;
    for (std::size_t i = 0; i < c; ++i)
      for (std::size_t j = 0; j < c; ++j) q += x[i] * g.at({i, j}) * x[j];
    lowest = std::min(lowest, q);
  }
  return lowest;
}

double l1(const TensorD& t) { return sum_abs(t); }

TEST(Gram, ZeroFeaturesGiveZero) {
  EXPECT_EQ(l1(gram_matrix(TensorD({3, 4, 4})).values), 0.0);
}

TEST(Gram, SinglePositionClosedForm) {
  const double a = 1.5, b = -2.0;
  const auto g = gram_matrix(TensorD({2, 1, 1}, {a, b}), "conv1_1");
  EXPECT_EQ(g.values.storage(), (std::vector<double>{a * a, a * b, a * b, b * b}));
  EXPECT_EQ(g.divisor, 1.0);
  EXPECT_EQ(g.layer, "conv1_1");
}

TEST(Gram, MatchesLoopOracle) {
  Rng rng(1);
  for (int t = 0; t < 5; ++t) {
    const TensorD f = rng.uniform_tensor<double>({3, 4, 4}, -2, 2);
    EXPECT_LT(max_abs_diff(gram_matrix(f).values, reference_gram(f, false)), 1e-6);
    EXPECT_LT(max_abs_diff(centered_gram_matrix(f).values, reference_gram(f, true)), 1e-6);
  }
  EXPECT_EQ(gram_matrix(TensorD({3, 4, 5})).divisor, 20.0);
}

TEST(Gram, RejectsWrongRank) {
  EXPECT_THROW(gram_matrix(TensorD({3, 4})), ShapeError);
  EXPECT_THROW(centered_gram_matrix(TensorD({2, 3, 4, 4})), ShapeError);
}

TEST(Gram, SymmetricAndPositiveSemidefinite) {
  Rng rng(2);
  for (int t = 0; t < 10; ++t) {
    const TensorD f = rng.uniform_tensor<double>({4, 3, 5}, -1, 3);
    for (const auto& g : {gram_matrix(f).values, centered_gram_matrix(f).values}) {
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) EXPECT_LT(std::abs(g.at({i, j}) - g.at({j, i})), 1e-6);
      EXPECT_GE(min_quadratic_form(g, rng), -1e-5);
    }
  }
  // The single-precision path must be symmetric too.
  const auto gf = gram_matrix(rng.uniform_tensor<float>({5, 4, 4}, -1, 1)).values;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) EXPECT_LT(std::abs(gf.at({i, j}) - gf.at({j, i})), 1e-6f);
}

TEST(CenteredGram, ConstantFeaturesGiveZero) {
  EXPECT_LT(l1(centered_gram_matrix(TensorD({3, 4, 4}, 7.25)).values), 1e-12);
}

TEST(CenteredGram, EqualsGramOfShiftedFeatures) {
  Rng rng(3);
  const TensorD f = rng.uniform_tensor<double>({3, 6, 6}, -1, 2);
  double mu = 0.0;
  for (double v : f.data()) mu += v;
  mu /= static_cast<double>(f.numel());
  TensorD shifted = f;
  for (auto& v : shifted.data()) v -= mu;
  EXPECT_LT(max_abs_diff(centered_gram_matrix(f).values, gram_matrix(shifted).values), 1e-6);
}

TEST(CenteredGram, ShiftInvarianceAtGrowingOffsets) {
  Rng rng(4);
  const TensorD f = rng.uniform_tensor<double>({3, 5, 5}, -1, 1);
  const TensorD base = centered_gram_matrix(f).values;
  double previous_raw = l1(gram_matrix(f).values);
  for (double c : {1.0, 10.0, 100.0, 1000.0}) {
    TensorD moved = f;
    for (auto& v : moved.data()) v += c;
    EXPECT_LT(max_abs_diff(centered_gram_matrix(moved).values, base), 1e-5) << c;
    EXPECT_LT(std::abs(l1(centered_gram_matrix(moved).values) - l1(base)), 1e-4) << c;
    const double raw = l1(gram_matrix(moved).values);
    EXPECT_GT(raw, previous_raw) << c;
    previous_raw = raw;
  }
  EXPECT_GT(previous_raw, 1e6);
}

TextureTarget<double> scalar_target(double value) {
  TextureTarget<double> t;
  t.grams.push_back({"conv1_1", TensorD({1, 1}, value)});
  return t;
}

TEST(TextureLoss, ScalarGramExample) {
  // A 1x1x1 feature f has centered Gram 0; use a 1x1x2 map so the centered Gram is 5.
  // Values {m + d, m - d} have centered Gram d^2.
  Tape<double> tape;
  const double d = std::sqrt(5.0);
  FeatureVars<double> feats{{"conv1_1", tape.leaf(TensorD({1, 1, 2}, {1.0 + d, 1.0 - d}))}};
  EXPECT_NEAR(texture_loss(scalar_target(3.0), feats).value().item(), 2.0, 1e-12);
  const std::vector<double> weights{0.5};
  EXPECT_NEAR(texture_loss(scalar_target(3.0), feats, weights).value().item(), 1.0, 1e-12);
}

TEST(TextureLoss, ExemplarAgainstItselfIsZero) {
  const Extractor<float> ex{ExtractorConfig{}};
  const auto image = Rng(5).uniform_tensor<float>({3, 32, 32}, -1, 1);
  const auto target = make_texture_target(ex, image, kDefaultTextureTaps);
  EXPECT_EQ(target.taps(), kDefaultTextureTaps);
  Tape<float> tape;
  const auto feats = ex.extract(tape, tape.leaf(image), kDefaultTextureTaps);
  EXPECT_LT(texture_loss(target, feats).value().item(), 1e-5f);
  const auto other = Rng(6).uniform_tensor<float>({3, 32, 32}, -1, 1);
  const auto feats2 = ex.extract(tape, tape.leaf(other), kDefaultTextureTaps);
  EXPECT_GT(texture_loss(target, feats2).value().item(), 1e-3f);
}

TEST(TextureLoss, MissingTapAndBadWeights) {
  Tape<double> tape;
  FeatureVars<double> feats{{"conv2_1", tape.leaf(TensorD({1, 1, 2}))}};
  EXPECT_THROW(texture_loss(scalar_target(1.0), feats), ConfigError);
  FeatureVars<double> ok{{"conv1_1", tape.leaf(TensorD({1, 1, 2}))}};
  const std::vector<double> two{1.0, 1.0};
  EXPECT_THROW(texture_loss(scalar_target(1.0), ok, two), ConfigError);
}

TEST(Derangement, SmallCases) {
  Rng rng(7);
  EXPECT_THROW(derangement(1, rng), ConfigError);
  EXPECT_THROW(derangement(0, rng), ConfigError);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(derangement(2, rng), (std::vector<std::size_t>{1, 0}));
  std::map<std::vector<std::size_t>, int> seen;
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++seen[derangement(3, rng)];
  ASSERT_EQ(seen.size(), 2u);
  EXPECT_TRUE(seen.count({1, 2, 0}));
  EXPECT_TRUE(seen.count({2, 0, 1}));
  for (const auto& [perm, count] : seen) EXPECT_NEAR(count / double(n), 0.5, 0.02);
}

TEST(Derangement, UniformOverNineForFour) {
  Rng rng(8);
  std::map<std::vector<std::size_t>, int> seen;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto p = derangement(4, rng);
    for (std::size_t k = 0; k < 4; ++k) ASSERT_NE(p[k], k);
    ++seen[p];
  }
  ASSERT_EQ(seen.size(), 9u);
  for (const auto& [perm, count] : seen) EXPECT_NEAR(count / double(n), 1.0 / 9.0, 0.02);
}

TEST(Derangement, NoFixedPointsForLargerN) {
  Rng rng(9);
  for (std::size_t n = 2; n < 12; ++n) {
    auto p = derangement(n, rng);
    for (std::size_t k = 0; k < n; ++k) EXPECT_NE(p[k], k);
    std::sort(p.begin(), p.end());
    for (std::size_t k = 0; k < n; ++k) EXPECT_EQ(p[k], k);
  }
}

std::vector<Var<double>> leaves(Tape<double>& tape, const std::vector<TensorD>& values) {
  std::vector<Var<double>> out;
  for (const auto& v : values) out.push_back(tape.leaf(v));
  return out;
}

TEST(Diversity, IdenticalBatchGivesZero) {
  Tape<double> tape;
  const TensorD f = Rng(10).uniform_tensor<double>({4, 3, 3}, -1, 1);
  Rng rng(11);
  for (auto scale : {DiversityScale::kPerElement, DiversityScale::kPerPosition, DiversityScale::kRaw})
    EXPECT_EQ(diversity_loss(leaves(tape, {f, f, f}), rng, scale).value().item(), 0.0);
}

TEST(Diversity, PairIsPlainL1) {
  Tape<double> tape;
  Rng data(12);
  const TensorD f = data.uniform_tensor<double>({2, 3, 3}, -1, 1);
  const TensorD g = data.uniform_tensor<double>({2, 3, 3}, -1, 1);
  Rng rng(13);
  const double d = l1_distance(f, g);
  EXPECT_NEAR(diversity_loss(leaves(tape, {f, g}), rng, DiversityScale::kRaw).value().item(), d, 1e-12);
  EXPECT_NEAR(diversity_loss(leaves(tape, {f, g}), rng, DiversityScale::kPerElement).value().item(),
              d / 18.0, 1e-12);
  EXPECT_NEAR(diversity_loss(leaves(tape, {f, g}), rng, DiversityScale::kPerPosition).value().item(),
              d / 9.0, 1e-12);
}

TEST(Diversity, ThreeMembersMatchHandComputedValue) {
  Rng data(14);
  const std::vector<TensorD> f{data.uniform_tensor<double>({2, 2, 2}, -1, 1),
                               data.uniform_tensor<double>({2, 2, 2}, -1, 1),
                               data.uniform_tensor<double>({2, 2, 2}, -1, 1)};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng replay(seed);
    const auto sigma = derangement(3, replay);
    double expected = 0.0;
    for (std::size_t i = 0; i < 3; ++i) expected += l1_distance(f[i], f[sigma[i]]);
    expected /= 3.0;
    Tape<double> tape;
    Rng rng(seed);
    EXPECT_NEAR(diversity_loss(leaves(tape, f), rng, DiversityScale::kRaw).value().item(), expected,
                1e-12);
  }
}

TEST(Diversity, NonNegativeAndErrors) {
  Rng rng(15);
  for (int t = 0; t < 20; ++t) {
    Tape<double> tape;
    std::vector<TensorD> f;
    for (int i = 0; i < 4; ++i) f.push_back(rng.uniform_tensor<double>({3, 2, 2}, -1, 1));
    EXPECT_GT(diversity_loss(leaves(tape, f), rng).value().item(), 0.0);
  }
  Tape<double> tape;
  EXPECT_THROW(diversity_loss(leaves(tape, {TensorD({1, 2, 2})}), rng), ConfigError);
  EXPECT_THROW(diversity_loss(leaves(tape, {TensorD({1, 2, 2}), TensorD({1, 2, 3})}), rng),
               ShapeError);
}

TEST(Diversity, GradientsFlowThroughBothMembers) {
  Tape<double> tape;
  Rng data(16);
  auto v = leaves(tape, {data.uniform_tensor<double>({1, 2, 2}, -1, 1),
                         data.uniform_tensor<double>({1, 2, 2}, -1, 1)});
  Rng rng(17);
  tape.backward(diversity_loss(v, rng, DiversityScale::kRaw));
  EXPECT_GT(sum_abs(v[0].grad()), 0.0);
  EXPECT_GT(sum_abs(v[1].grad()), 0.0);
}

TEST(TotalLoss, DefaultCoefficients) {
  Tape<double> tape;
  const auto lt = tape.leaf(TensorD::scalar(5.0));
  const auto ld = tape.leaf(TensorD::scalar(2.0));
  EXPECT_DOUBLE_EQ(total_loss(lt, ld, 1.0, -1.0).value().item(), 3.0);
  EXPECT_DOUBLE_EQ(total_loss(lt, ld, 1.0, 0.0).value().item(), 5.0);
  EXPECT_THROW(total_loss(lt, tape.leaf(TensorD({2})), 1.0, -1.0), ShapeError);
}

TEST(TotalLoss, GradientIsLinearCombination) {
  const TensorD x0 = Rng(18).uniform_tensor<double>({2, 3, 3}, -1, 1);
  const TensorD partner = Rng(19).uniform_tensor<double>({2, 3, 3}, -1, 1);
  const TextureTarget<double> target{0, {{"t", centered_gram_matrix(partner).values}}};
  const std::vector<std::size_t> swap{1, 0};
  auto grads = [&](double alpha, double beta) {
    Tape<double> tape;
    auto x = tape.leaf(x0);
    const auto lt = texture_loss(target, FeatureVars<double>{{"t", x}});
    const auto ld = diversity_loss<double>({x, tape.constant(partner)}, swap, DiversityScale::kRaw);
    tape.backward(total_loss(lt, ld, alpha, beta));
    return x.grad();
  };
  const TensorD gt = grads(1.0, 0.0), gd = grads(0.0, 1.0), both = grads(0.7, -1.3);
  for (std::size_t i = 0; i < x0.numel(); ++i)
    EXPECT_NEAR(both[i], 0.7 * gt[i] - 1.3 * gd[i], 1e-6);
}

}  // namespace
}  // namespace mtex
