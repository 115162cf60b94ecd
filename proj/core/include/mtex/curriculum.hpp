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
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mtex/generator.hpp"
#include "mtex/loss_network.hpp"
#include "mtex/optimizer.hpp"
#include "mtex/texture_stats.hpp"

namespace mtex {

enum class ScheduleMode { kIncremental, kRandom };

const char* to_string(ScheduleMode mode);
ScheduleMode parse_schedule_mode(const std::string& text);

/// Maps a training iteration to the texture trained at that iteration.
/// Texture indices are 0-based.
///
/// Incremental mode: during phase t (iterations [(t-1)K, tK), t = 1..M) the
/// first t textures are visited round-robin starting from texture 0. From
/// iteration M*K on, textures are drawn uniformly at random. Random mode draws
/// uniformly from the first iteration.
///
/// Random draws are a pure function of (seed, iteration), so texture_at is
/// const and can be queried in any order.
struct Schedule {
  ScheduleMode mode = ScheduleMode::kIncremental;
  std::size_t phase_iters = 100;  // K
  std::size_t textures = 1;       // M
  std::uint64_t seed = 0;

  std::size_t texture_at(std::size_t iteration) const;
  /// First iteration at which `texture` can be emitted.
  std::size_t introduction(std::size_t texture) const;
  /// Iteration at which incremental mode switches to random sampling.
  std::size_t random_phase_start() const;
};

struct TrainConfig {
  std::size_t iterations = 0;  // 0 selects 3*M*K (curriculum plus 2*M*K random)
  std::size_t phase_iters = 100;
  std::size_t batch = 4;
  double learning_rate = 1e-3;
  double alpha = 1.0;
  double beta = -1.0;
  std::vector<std::string> texture_taps = kDefaultTextureTaps;
  std::string diversity_tap = kDiversityTap;
  std::vector<double> layer_weights;  // empty: 1 for every texture tap
  ScheduleMode mode = ScheduleMode::kIncremental;
  bool use_selector = true;
  DiversityScale diversity_scale = DiversityScale::kPerPosition;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // 0 disables checkpoints
  std::filesystem::path checkpoint_dir;

  std::size_t resolved_iterations(std::size_t textures) const;
  /// Throws ConfigError; N >= 2 is required whenever beta != 0.
  void validate() const;
};

struct LossRecord {
  std::size_t iteration = 0;
  std::size_t texture = 0;  // 0-based
  double l_texture = 0.0;
  double l_diversity = 0.0;
  double total = 0.0;
  std::optional<double> l_content;

  friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

/// Append-only per-iteration loss history.
///
/// CSV form: header `iter,texture,l_texture,l_diversity,total` (plus
/// `,l_content` for style-transfer runs); texture ids are written 1-based;
/// reals use shortest round-trip formatting.
class LossLog {
 public:
  explicit LossLog(bool with_content = false) : with_content_(with_content) {}

  /// Throws Error if the iteration index does not increase.
  void append(const LossRecord& record);

  const std::vector<LossRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool with_content() const noexcept { return with_content_; }

  std::string to_csv() const;
  static LossLog from_csv(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static LossLog load(const std::filesystem::path& path);

  friend bool operator==(const LossLog&, const LossLog&) = default;

 private:
  bool with_content_;
  std::vector<LossRecord> records_;
};

/// Centered Gram targets of every exemplar ([3,S,S] each) at `taps`.
template <typename T>
std::vector<TextureTarget<T>> precompute_targets(const Extractor<T>& extractor,
                                                 const std::vector<Tensor<T>>& exemplars,
                                                 const std::vector<std::string>& taps,
                                                 std::size_t size);

/// Optimization state of one feed-forward training run.
class Trainer {
 public:
  Trainer(GeneratorParams<float> params, const Extractor<float>& extractor,
          std::vector<TextureTarget<float>> targets, TrainConfig config);

  /// One update on `texture` (0-based): sample N noise vectors, synthesize with
  /// the one-hot selection, evaluate alpha*L_texture + beta*L_diversity,
  /// backpropagate, apply Adam.
  LossRecord step(std::size_t iteration, std::size_t texture);

  const GeneratorParams<float>& params() const noexcept { return params_; }
  const TrainConfig& config() const noexcept { return config_; }

 private:
  GeneratorParams<float> params_;
  const Extractor<float>* extractor_;
  std::vector<TextureTarget<float>> targets_;
  TrainConfig config_;
  Adam<float> optimizer_;
  Rng noise_rng_;
  Rng derangement_rng_;
  std::vector<std::string> taps_;
};

struct TrainResult {
  GeneratorParams<float> params;
  LossLog log;
};

using ProgressFn = std::function<void(const LossRecord&)>;

/// Whole schedule-driven run. The generator is initialized from the
/// config.seed "generator-init" stream; M is exemplars.size() and must match
/// synthesis.textures.
TrainResult train(const std::vector<Tensor<float>>& exemplars, const SynthesisConfig& synthesis,
                  const Extractor<float>& extractor, const TrainConfig& config,
                  const ProgressFn& progress = {});

struct PixelOptimizeResult {
  Tensor<float> image;
  /// Texture loss before each step, followed by the final loss.
  std::vector<double> losses;
};

/// Gradient descent (Adam) directly on the pixels of `init` [3,H,W],
/// minimizing texture_loss against `target`. Pixels are kept in [-1,1].
PixelOptimizeResult pixel_optimize(const Extractor<float>& extractor,
                                   const TextureTarget<float>& target, Tensor<float> init,
                                   std::size_t steps, double learning_rate,
                                   std::span<const double> layer_weights = {});

/// Texture loss of one image against a target.
double evaluate_texture_loss(const Extractor<float>& extractor, const TextureTarget<float>& target,
                             const Tensor<float>& image,
                             std::span<const double> layer_weights = {});

}  // namespace mtex
