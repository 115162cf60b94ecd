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
#include <utility>
#include <vector>

#include "mtex/curriculum.hpp"
#include "mtex/generator.hpp"
#include "mtex/loss_network.hpp"
#include "mtex/params.hpp"
#include "mtex/rng.hpp"
#include "mtex/texture_stats.hpp"
#include "mtex/weight_file.hpp"

namespace mtex {

/// Multi-style encoder/decoder. The encoder halves the resolution once per
/// stage; per-style noise maps are concatenated to its output; the decoder
/// doubles the resolution once per stage and ends in a tanh RGB conv.
struct TransferConfig {
  std::size_t styles = 2;  // M_s
  std::vector<std::size_t> encoder_channels{16, 16};
  std::vector<std::size_t> decoder_channels{16, 16};
  std::size_t noise_channels = 1;  // per style

  /// Content sides must be multiples of this.
  std::size_t stride() const { return std::size_t{1} << encoder_channels.size(); }
  std::size_t noise_depth() const { return styles * noise_channels; }
  /// Throws ConfigError; encoder and decoder must have equal stage counts.
  void validate() const;
};

template <typename T>
struct TransferParams {
  TransferConfig config;
  ParamSet<T> tensors;

  template <typename U>
  TransferParams<U> cast() const {
    return {config, tensors.template cast<U>()};
  }
};

ParamSet<float> transfer_layout(const TransferConfig& config);

template <typename T>
TransferParams<T> init_transfer(const TransferConfig& config, Rng& rng);

/// Noise input of the decoder: one block of `channels` maps per style. Styles
/// with a nonzero selection weight w receive w * U[-1,1] noise, sampled in
/// style order; every other block is exactly zero.
class NoiseMapSet {
 public:
  static NoiseMapSet sample(const SelectionUnit& selection, std::size_t channels,
                            std::size_t height, std::size_t width, Rng& rng);

  std::size_t styles() const noexcept { return styles_; }
  std::size_t channels() const noexcept { return channels_; }
  /// All maps, [styles*channels, h, w].
  const Tensor<float>& maps() const noexcept { return maps_; }
  /// The block of one style, [channels, h, w].
  Tensor<float> style_block(std::size_t style) const;

 private:
  NoiseMapSet(std::size_t styles, std::size_t channels, Tensor<float> maps)
      : styles_(styles), channels_(channels), maps_(std::move(maps)) {}

  std::size_t styles_;
  std::size_t channels_;
  Tensor<float> maps_;
};

/// Decoder input noise for a content image of the given size.
NoiseMapSet sample_noise_maps(const TransferConfig& config, const SelectionUnit& selection,
                              std::size_t height, std::size_t width, Rng& rng);

template <typename T>
Var<T> encode(const TransferConfig& config, const BoundParams<T>& params, const Var<T>& content);

/// content [N,3,H,W], noise [N, styles*channels, H/stride, W/stride].
template <typename T>
Var<T> transfer(const TransferConfig& config, const BoundParams<T>& params, const Var<T>& content,
                const Var<T>& noise);

/// Stylizes one [3,H,W] content image.
template <typename T>
Tensor<T> transfer(const TransferParams<T>& params, const Tensor<T>& content,
                   const SelectionUnit& selection, Rng& rng);

/// Style mixing through weighted noise maps; a single (k, 1.0) pair is the
/// one-hot transfer of style k.
template <typename T>
Tensor<T> interpolate_styles(const TransferParams<T>& params, const Tensor<T>& content,
                             const std::vector<std::pair<std::size_t, double>>& pairs, Rng& rng);

/// Mean absolute difference of two equally shaped feature maps.
template <typename T>
Var<T> feature_distance(const Var<T>& a, const Var<T>& b);

/// L1 distance of conv4_2 features, divided by their element count.
template <typename T>
Var<T> content_loss(const Extractor<T>& extractor, const Var<T>& output, const Var<T>& content);

struct TransferTrainConfig {
  std::size_t iterations = 0;  // 0 selects 3*M_s*K
  std::size_t phase_iters = 100;
  std::size_t batch = 2;
  double learning_rate = 1e-3;
  double content_weight = 1.0;
  double style_weight = 1.0;  // multiplies alpha
  double alpha = 1.0;
  double beta = -1.0;
  std::vector<std::string> style_taps = kDefaultTextureTaps;
  std::string content_tap = kDiversityTap;  // also the diversity tap
  std::vector<double> layer_weights;
  ScheduleMode mode = ScheduleMode::kIncremental;
  DiversityScale diversity_scale = DiversityScale::kPerPosition;
  std::uint64_t seed = 0;

  std::size_t resolved_iterations(std::size_t styles) const;
  void validate() const;
};

struct TransferResult {
  TransferParams<float> params;
  LossLog log;  // l_texture holds the style loss
};

/// Each iteration trains the scheduled style on one randomly drawn content
/// image, with N independent noise maps.
TransferResult train_transfer(const std::vector<Tensor<float>>& styles,
                              const std::vector<Tensor<float>>& contents,
                              const TransferConfig& network, const Extractor<float>& extractor,
                              const TransferTrainConfig& config, const ProgressFn& progress = {});

ModelFile to_model_file(const TransferParams<float>& params);
TransferParams<float> transfer_from_model(const ModelFile& model);
void save_transfer(const TransferParams<float>& params, const std::filesystem::path& path);
TransferParams<float> load_transfer(const std::filesystem::path& path);

}  // namespace mtex
