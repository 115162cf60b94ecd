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
#include <filesystem>
#include <utility>
#include <vector>

#include "mtex/autodiff.hpp"
#include "mtex/params.hpp"
#include "mtex/rng.hpp"
#include "mtex/weight_file.hpp"

namespace mtex {

/// Negative-side slope of every hidden activation.
inline constexpr double kLeakySlope = 0.2;

/// Architecture of the two-stream synthesis network.
///
/// The generator starts from noise (x) embedding seed maps, expands them to
/// base_size x base_size with a transposed convolution, then runs `scales`
/// rounds of {2x nearest upsample, concat selector guidance, 3x3 conv,
/// leaky ReLU} and finishes with a 3x3 conv to RGB squashed by tanh.
struct SynthesisConfig {
  std::size_t textures = 3;      // M, length of the selection unit
  std::size_t embed_dim = 8;     // d
  std::size_t noise_dim = 5;     // n
  std::size_t base_size = 4;
  std::size_t scales = 3;
  std::size_t seed_channels = 32;
  std::vector<std::size_t> scale_channels{32, 16, 16};
  std::size_t guidance_channels = 4;

  std::size_t output_size() const { return base_size << scales; }
  /// Throws ConfigError on inconsistent dimensions.
  void validate() const;
};

/// M nonnegative weights over textures. One-hot during training; any
/// nonnegative mix at inference.
class SelectionUnit {
 public:
  explicit SelectionUnit(std::size_t textures);
  static SelectionUnit one_hot(std::size_t textures, std::size_t index);

  std::size_t size() const noexcept { return weights_.size(); }
  double weight(std::size_t index) const { return weights_.at(index); }
  void set(std::size_t index, double weight);
  bool is_one_hot() const;

  template <typename T>
  Tensor<T> to_tensor() const {
    Tensor<T> out({weights_.size()});
    for (std::size_t i = 0; i < weights_.size(); ++i) out[i] = static_cast<T>(weights_[i]);
    return out;
  }

 private:
  std::vector<double> weights_;
};

/// Sparse selection from (index, weight) pairs, zero elsewhere. Indices must
/// be distinct and < textures; weights nonnegative.
SelectionUnit interpolate_selection(std::size_t textures,
                                    const std::vector<std::pair<std::size_t, double>>& bits);

template <typename T>
struct GeneratorParams {
  SynthesisConfig config;
  ParamSet<T> tensors;

  template <typename U>
  GeneratorParams<U> cast() const {
    return {config, tensors.template cast<U>()};
  }
};

/// Fan-in scaled Gaussian kernels, zero biases, embedding rows N(0, 0.1^2).
template <typename T>
GeneratorParams<T> init_generator(const SynthesisConfig& config, Rng& rng);

/// Parameter names and shapes implied by `config`, zero-filled.
ParamSet<float> generator_layout(const SynthesisConfig& config);

/// selection [M] -> embedding [d], computed as selection^T * embedding.
template <typename T>
Var<T> embed(const BoundParams<T>& params, const Var<T>& selection);

/// outer(noise [n], embedding [d]) as n*d maps of size 1x1; channel i*d+j
/// holds noise[i]*embedding[j].
template <typename T>
Var<T> seed_maps(const Var<T>& noise, const Var<T>& embedding);

/// Selector stream: one guidance map per upsampling scale, the s-th (0-based)
/// of spatial size base_size * 2^(s+1).
template <typename T>
std::vector<Var<T>> selector_guidance(const SynthesisConfig& config, const BoundParams<T>& params,
                                      const Var<T>& embedding);

/// Full forward pass for a batch sharing one selection. `noise` is [N,n].
/// With use_selector=false, zero maps stand in for the guidance, so the
/// generator runs without selector input. Returns [N,3,S,S] in [-1,1].
template <typename T>
Var<T> generate(const SynthesisConfig& config, const BoundParams<T>& params,
                const Var<T>& selection, const Var<T>& noise, bool use_selector = true);

/// Convenience inference on a private tape: one noise vector [n] -> [3,S,S].
template <typename T>
Tensor<T> generate(const GeneratorParams<T>& params, const SelectionUnit& selection,
                   const Tensor<T>& noise, bool use_selector = true);

/// Noise batch [count, n] uniform in [-1,1].
template <typename T>
Tensor<T> sample_noise(std::size_t count, std::size_t noise_dim, Rng& rng);

ModelFile to_model_file(const GeneratorParams<float>& params);
GeneratorParams<float> generator_from_model(const ModelFile& model);
void save_generator(const GeneratorParams<float>& params, const std::filesystem::path& path);
GeneratorParams<float> load_generator(const std::filesystem::path& path);

}  // namespace mtex
