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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mtex/autodiff.hpp"
#include "mtex/params.hpp"

namespace mtex {

/// Default texture-statistics taps, shallow to deep.
inline const std::vector<std::string> kDefaultTextureTaps = {"conv1_1", "conv2_1", "conv3_1",
                                                             "conv4_1", "conv5_1"};
/// Tap used by the diversity and content losses.
inline constexpr const char* kDiversityTap = "conv4_2";

/// Topology and weight source of the fixed feature extractor.
///
/// The layout follows VGG-19: five stages of 3x3 conv + ReLU separated by
/// 2x2 average pooling. Layer `convS_I` is the I-th conv of stage S (both
/// 1-based); its tap is the post-ReLU activation.
struct ExtractorConfig {
  std::vector<std::size_t> stage_channels{8, 16, 32, 64, 64};
  std::vector<std::size_t> convs_per_stage{2, 2, 4, 4, 4};
  std::vector<std::string> taps{"conv1_1", "conv2_1", "conv3_1",
                                "conv4_1", "conv5_1", "conv4_2"};
  std::uint64_t seed = 0x7e57u;
  /// When set, weights are read from this file instead of drawn from `seed`.
  std::optional<std::filesystem::path> weight_file;

  /// Throws ConfigError on inconsistent stage lists or unresolvable taps.
  void validate() const;
  std::vector<std::string> layer_names() const;
};

/// tap name -> activation [N,C,H,W] on a tape.
template <typename T>
using FeatureVars = std::map<std::string, Var<T>>;
/// tap name -> activation [C,H,W].
template <typename T>
using FeatureMapSet = std::map<std::string, Tensor<T>>;

/// Weights for `config` drawn from its seed: He-scaled Gaussian kernels
/// (stddev sqrt(2 / fan_in)), zero biases.
ParamSet<float> seeded_extractor_weights(const ExtractorConfig& config);

/// Fixed convolutional feature extractor. Weights never change after
/// construction and are recorded as tape constants, so no gradient reaches
/// them.
template <typename T>
class Extractor {
 public:
  explicit Extractor(ExtractorConfig config);
  Extractor(ExtractorConfig config, const ParamSet<float>& weights);

  const ExtractorConfig& config() const noexcept { return config_; }
  const ParamSet<T>& weights() const noexcept { return weights_; }
  std::size_t channels(const std::string& tap) const;

  /// Activations at `taps` for images [N,3,H,W] (or a single [3,H,W], treated
  /// as N=1). Only the layers needed for the deepest tap are evaluated.
  FeatureVars<T> extract(Tape<T>& tape, const Var<T>& images,
                         const std::vector<std::string>& taps) const;

  /// Convenience: evaluates one [3,H,W] image on a private tape.
  FeatureMapSet<T> extract(const Tensor<T>& image, const std::vector<std::string>& taps) const;

  void save(const std::filesystem::path& path) const;

 private:
  struct Layer {
    std::string name;
    std::size_t stage;
    bool pool_before;
  };

  ExtractorConfig config_;
  ParamSet<T> weights_;
  std::vector<Layer> layers_;
};

extern template class Extractor<float>;
extern template class Extractor<double>;

}  // namespace mtex
