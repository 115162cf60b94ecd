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

#include <filesystem>
#include <numeric>

#include "mtex/curriculum.hpp"
#include "mtex/error.hpp"
#include "mtex/exemplars.hpp"
#include "mtex/generator.hpp"
#include "mtex/loss_network.hpp"
#include "mtex/optimizer.hpp"
#include "test_util.hpp"

namespace mtex {
namespace {

Schedule schedule(ScheduleMode mode, std::size_t k, std::size_t m, std::uint64_t seed = 1) {
  return Schedule{mode, k, m, seed};
}

TEST(Schedule, IncrementalSequenceThroughRandomSwitch) {
  const auto s = schedule(ScheduleMode::kIncremental, 3, 3);
  const std::vector<std::size_t> expected{0, 0, 0, 0, 1, 0, 0, 1, 2};
  for (std::size_t it = 0; it < expected.size(); ++it) EXPECT_EQ(s.texture_at(it), expected[it]) << it;
  EXPECT_EQ(s.random_phase_start(), 9u);
  // Iterations 9..12 are random draws: in range, pure in (seed, iteration).
  const auto again = schedule(ScheduleMode::kIncremental, 3, 3);
  for (std::size_t it = 9; it <= 12; ++it) {
    EXPECT_LT(s.texture_at(it), 3u);
    EXPECT_EQ(s.texture_at(it), s.texture_at(it));
    EXPECT_EQ(s.texture_at(it), again.texture_at(it));
  }
}

TEST(Schedule, RandomPhaseDependsOnSeed) {
  const auto a = schedule(ScheduleMode::kIncremental, 3, 3, 1);
  const auto b = schedule(ScheduleMode::kIncremental, 3, 3, 2);
  std::size_t differ = 0;
  for (std::size_t it = 9; it < 109; ++it) differ += a.texture_at(it) != b.texture_at(it);
  EXPECT_GT(differ, 30u);
}

TEST(Schedule, NoTextureBeforeItsIntroduction) {
  for (std::size_t m : {1, 2, 5})
    for (std::size_t k : {1, 3, 7}) {
      const auto s = schedule(ScheduleMode::kIncremental, k, m);
      std::vector<std::size_t> first(m, SIZE_MAX);
      for (std::size_t it = 0; it < m * k; ++it) {
        const std::size_t t = s.texture_at(it);
        ASSERT_LT(t, m);
        ASSERT_GE(it, s.introduction(t)) << "texture " << t << " before its phase";
        first[t] = std::min(first[t], it);
      }
      for (std::size_t t = 0; t < m; ++t) {
        EXPECT_EQ(s.introduction(t), t * k);
        // The round-robin restarts each phase, so texture t shows up at slot t
        // of its own phase when the phase is long enough to reach it.
        if (k > t) {
          EXPECT_EQ(first[t], t * k + t) << "m=" << m << " k=" << k << " t=" << t;
        } else {
          EXPECT_GE(first[t], t * k) << "m=" << m << " k=" << k << " t=" << t;
        }
      }
    }
}

TEST(Schedule, RandomPhaseIsUniform) {
  for (auto mode : {ScheduleMode::kIncremental, ScheduleMode::kRandom}) {
    const std::size_t m = 3;
    const auto s = schedule(mode, 3, m, 77);
    std::vector<double> counts(m, 0.0);
    const std::size_t draws = 100000;
    for (std::size_t it = 9; it < 9 + draws; ++it) counts[s.texture_at(it)] += 1.0;
    for (double c : counts) EXPECT_NEAR(c / draws, 1.0 / m, 0.01);
  }
}

TEST(Schedule, SingleTextureModesAgree) {
  const auto inc = schedule(ScheduleMode::kIncremental, 5, 1);
  const auto rnd = schedule(ScheduleMode::kRandom, 5, 1);
  for (std::size_t it = 0; it < 50; ++it) {
    EXPECT_EQ(inc.texture_at(it), 0u);
    EXPECT_EQ(rnd.texture_at(it), 0u);
  }
}

TEST(Schedule, ModeNames) {
  EXPECT_EQ(parse_schedule_mode("incremental"), ScheduleMode::kIncremental);
  EXPECT_EQ(parse_schedule_mode(to_string(ScheduleMode::kRandom)), ScheduleMode::kRandom);
  EXPECT_THROW(parse_schedule_mode("curriculum"), ConfigError);
}

TEST(TrainConfig, DefaultsAndValidation) {
  TrainConfig c;
  EXPECT_EQ(c.alpha, 1.0);
  EXPECT_EQ(c.beta, -1.0);
  EXPECT_EQ(c.batch, 4u);
  EXPECT_EQ(c.phase_iters, 100u);
  EXPECT_EQ(c.learning_rate, 1e-3);
  EXPECT_EQ(c.resolved_iterations(3), 900u);
  c.batch = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c.beta = 0.0;
  EXPECT_NO_THROW(c.validate());
  c.checkpoint_every = 10;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(LossLog, CsvRoundTrip) {
  LossLog log;
  log.append({0, 0, 1.25, 0.5, 0.75, std::nullopt});
  log.append({1, 2, 1.0 / 3.0, 2e-9, -7.125e5, std::nullopt});
  const std::string csv = log.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iter,texture,l_texture,l_diversity,total");
  EXPECT_NE(csv.find("\n0,1,"), std::string::npos) << "texture ids are 1-based on disk";
  EXPECT_EQ(LossLog::from_csv(csv), log);

  LossLog with_content(true);
  with_content.append({0, 1, 2.0, 3.0, 4.0, 0.125});
  EXPECT_EQ(LossLog::from_csv(with_content.to_csv()), with_content);
}

TEST(LossLog, MalformedInputRaises) {
  EXPECT_THROW(LossLog::from_csv(""), FormatError);
  EXPECT_THROW(LossLog::from_csv("a,b,c\n"), FormatError);
  EXPECT_THROW(LossLog::from_csv("iter,texture,l_texture,l_diversity,total\n0,1,2\n"), FormatError);
  EXPECT_THROW(LossLog::from_csv("iter,texture,l_texture,l_diversity,total\n0,0,1,1,1\n"),
               FormatError);
}

TEST(LossLog, IterationsMustIncrease) {
  LossLog log;
  log.append({3, 0, 1, 1, 1, std::nullopt});
  EXPECT_THROW(log.append({3, 0, 1, 1, 1, std::nullopt}), Error);
}

TEST(Adam, ZeroLearningRateAndZeroGradientLeaveParams) {
  ParamSet<float> p;
  p.add("w", Rng(1).uniform_tensor<float>({4, 4}, -1, 1));
  const ParamSet<float> before = p;
  ParamSet<float> g;
  g.add("w", Rng(2).uniform_tensor<float>({4, 4}, -1, 1));
  Adam<float> frozen({0.0}, p);
  frozen.step(p, g);
  EXPECT_EQ(p, before);
  ParamSet<float> zero;
  zero.add("w", Tensor<float>({4, 4}));
  Adam<float> adam({}, p);
  for (int i = 0; i < 3; ++i) adam.step(p, zero);
  EXPECT_EQ(p, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamSet<double> p;
  p.add("w", Tensor<double>({3}, {0.0, 1.0, -1.0}));
  ParamSet<double> g;
  g.add("w", Tensor<double>({3}, {2.0, -0.5, 1e-3}));
  Adam<double> adam({0.01}, p);
  adam.step(p, g);
  // Bias-corrected first step: m/sqrt(v) = sign(g) up to epsilon.
  EXPECT_NEAR(p.get("w")[0], -0.01, 1e-8);
  EXPECT_NEAR(p.get("w")[1], 1.01, 1e-8);
  EXPECT_NEAR(p.get("w")[2], -1.01, 1e-7);
  EXPECT_EQ(adam.steps(), 1u);
}

TEST(Adam, RejectsNonFiniteGradients) {
  ParamSet<float> p;
  p.add("w", Tensor<float>({2}));
  ParamSet<float> g;
  g.add("w", Tensor<float>({2}, std::numeric_limits<float>::quiet_NaN()));
  Adam<float> adam({}, p);
  try {
    adam.step(p, g);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("'w'"), std::string::npos);
  }
}

class TrainerTest : public ::testing::Test {
 protected:
  static const Extractor<float>& extractor() {
    static const Extractor<float> ex{ExtractorConfig{}};
    return ex;
  }
  static std::vector<Tensor<float>> exemplars(std::size_t m) {
    const std::vector<std::string> names{"stripes", "dots", "bricks"};
    std::vector<Tensor<float>> out;
    for (std::size_t k = 0; k < m; ++k) out.push_back(procedural_texture(names[k], 32, k + 1));
    return out;
  }
  static SynthesisConfig synthesis(std::size_t m) {
    SynthesisConfig c;
    c.textures = m;
    return c;
  }
};

TEST_F(TrainerTest, TargetsAreSelfConsistent) {
  const auto ex = exemplars(3);
  const auto targets = precompute_targets(extractor(), ex, kDefaultTextureTaps, 32);
  ASSERT_EQ(targets.size(), 3u);
  const auto again = precompute_targets(extractor(), ex, kDefaultTextureTaps, 32);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(targets[k].texture_id, k);
    EXPECT_EQ(targets[k].taps(), kDefaultTextureTaps);
    EXPECT_LT(evaluate_texture_loss(extractor(), targets[k], ex[k]), 1e-5);
    EXPECT_EQ(targets[k].grams, again[k].grams);
  }
  EXPECT_THROW(precompute_targets(extractor(), ex, kDefaultTextureTaps, 64), ShapeError);
}

TEST_F(TrainerTest, ZeroLearningRateLeavesParams) {
  Rng rng(1);
  const auto params = init_generator<float>(synthesis(2), rng);
  TrainConfig config;
  config.learning_rate = 0.0;
  Trainer trainer(params, extractor(),
                  precompute_targets(extractor(), exemplars(2), kDefaultTextureTaps, 32), config);
  const auto frozen = extractor().weights();
  const auto r = trainer.step(0, 1);
  EXPECT_EQ(trainer.params().tensors, params.tensors);
  EXPECT_EQ(extractor().weights(), frozen);
  EXPECT_EQ(r.texture, 1u);
  EXPECT_GT(r.l_texture, 0.0);
  EXPECT_GT(r.l_diversity, 0.0);
  EXPECT_NEAR(r.total, r.l_texture - r.l_diversity, 1e-5 * r.l_texture);
  EXPECT_THROW(trainer.step(1, 2), ConfigError);
}

TEST_F(TrainerTest, StepUpdatesOnlyGenerator) {
  Rng rng(2);
  const auto params = init_generator<float>(synthesis(1), rng);
  Trainer trainer(params, extractor(),
                  precompute_targets(extractor(), exemplars(1), kDefaultTextureTaps, 32), TrainConfig{});
  const auto frozen = extractor().weights();
  trainer.step(0, 0);
  EXPECT_EQ(extractor().weights(), frozen);
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    const auto& name = params.tensors.entries()[i].name;
    // With one texture the embedding row still moves; every tensor should.
    EXPECT_NE(trainer.params().tensors.entries()[i].value.storage(),
              params.tensors.entries()[i].value.storage())
        << name;
  }
}

TEST_F(TrainerTest, PureTextureTrainingWithBatchOfOne) {
  TrainConfig config;
  config.batch = 1;
  config.beta = 0.0;
  config.iterations = 3;
  const auto result = train(exemplars(1), synthesis(1), extractor(), config);
  ASSERT_EQ(result.log.size(), 3u);
  for (const auto& r : result.log.records()) {
    EXPECT_EQ(r.l_diversity, 0.0);
    EXPECT_EQ(r.total, r.l_texture);
  }
}

TEST_F(TrainerTest, RunsAreReproducibleAndLogLengthMatches) {
  TrainConfig config;
  config.iterations = 8;
  config.phase_iters = 2;
  config.seed = 5;
  const auto a = train(exemplars(3), synthesis(3), extractor(), config);
  const auto b = train(exemplars(3), synthesis(3), extractor(), config);
  EXPECT_EQ(a.log.size(), 8u);
  EXPECT_EQ(a.log, b.log);
  EXPECT_EQ(a.params.tensors, b.params.tensors);
  config.seed = 6;
  const auto c = train(exemplars(3), synthesis(3), extractor(), config);
  EXPECT_NE(a.log, c.log);
  EXPECT_THROW(train(exemplars(2), synthesis(3), extractor(), config), ConfigError);
}

TEST_F(TrainerTest, CheckpointsAreWritten) {
  testing::TempDir dir;
  TrainConfig config;
  config.iterations = 4;
  config.checkpoint_every = 2;
  config.checkpoint_dir = dir / "ckpt";
  const auto result = train(exemplars(1), synthesis(1), extractor(), config);
  EXPECT_TRUE(std::filesystem::exists(dir / "ckpt" / "checkpoint_2.mtxm"));
  ASSERT_TRUE(std::filesystem::exists(dir / "ckpt" / "checkpoint_4.mtxm"));
  EXPECT_EQ(load_generator(dir / "ckpt" / "checkpoint_4.mtxm").tensors, result.params.tensors);
}

TEST_F(TrainerTest, SmokeRunHalvesTextureLoss) {
  TrainConfig config;
  config.iterations = 200;
  config.seed = 1;
  const auto result = train(exemplars(1), synthesis(1), extractor(), config);
  const auto& recs = result.log.records();
  double tail = 0.0;
  for (std::size_t i = recs.size() - 10; i < recs.size(); ++i) tail += recs[i].l_texture;
  tail /= 10.0;
  EXPECT_LE(tail, 0.5 * recs.front().l_texture)
      << "initial " << recs.front().l_texture << ", last-10 mean " << tail;
}

TEST_F(TrainerTest, PixelOptimizeFixedPointAndBlendEndpoint) {
  const auto ex = exemplars(2);
  const auto targets = precompute_targets(extractor(), ex, kDefaultTextureTaps, 32);
  const auto fixed = pixel_optimize(extractor(), targets[0], ex[0], 20, 0.02);
  ASSERT_EQ(fixed.losses.size(), 21u);
  for (double l : fixed.losses) EXPECT_LE(l, 1e-5);

  const auto blended = blend_targets(targets[0], targets[1], 1.0);
  const auto probe = Rng(3).uniform_tensor<float>({3, 32, 32}, -1, 1);
  EXPECT_NEAR(evaluate_texture_loss(extractor(), blended, probe),
              evaluate_texture_loss(extractor(), targets[0], probe), 1e-6);
  const auto a = pixel_optimize(extractor(), blended, probe, 5, 0.02);
  const auto b = pixel_optimize(extractor(), targets[0], probe, 5, 0.02);
  for (std::size_t i = 0; i < a.losses.size(); ++i) EXPECT_NEAR(a.losses[i], b.losses[i], 1e-6);
}

TEST_F(TrainerTest, PixelOptimizeDescends) {
  const auto targets = precompute_targets(extractor(), exemplars(1), kDefaultTextureTaps, 32);
  const auto r = pixel_optimize(extractor(), targets[0], Rng(4).uniform_tensor<float>({3, 32, 32}, -1, 1),
                                60, 0.02);
  EXPECT_LT(r.losses.back(), 0.7 * r.losses.front());
  for (float v : r.image.data()) {
    ASSERT_GE(v, -1.0f);
    ASSERT_LE(v, 1.0f);
  }
}

}  // namespace
}  // namespace mtex
