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

#include "mtex/loss_network.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mtex/error.hpp"
#include "mtex/ops.hpp"
#include "mtex/rng.hpp"
#include "mtex/weight_file.hpp"

namespace mtex {

void ExtractorConfig::validate() const {
  if (stage_channels.empty()) throw ConfigError("extractor needs at least one stage");
  if (stage_channels.size() != convs_per_stage.size()) {
    throw ConfigError("extractor stage_channels has " + std::to_string(stage_channels.size()) +
                      " entries but convs_per_stage has " +
                      std::to_string(convs_per_stage.size()));
  }
  for (std::size_t s = 0; s < stage_channels.size(); ++s) {
    if (stage_channels[s] == 0 || convs_per_stage[s] == 0) {
      throw ConfigError("extractor stage " + std::to_string(s + 1) + " is empty");
    }
  }
  const auto names = layer_names();
  std::set<std::string> seen;
  for (const auto& tap : taps) {
    if (!seen.insert(tap).second) throw ConfigError("duplicate extractor tap '" + tap + "'");
    if (std::find(names.begin(), names.end(), tap) == names.end()) {
      throw ConfigError("extractor tap '" + tap + "' does not name a layer");
    }
  }
}

std::vector<std::string> ExtractorConfig::layer_names() const {
  std::vector<std::string> names;
  for (std::size_t s = 0; s < convs_per_stage.size(); ++s)
    for (std::size_t i = 0; i < convs_per_stage[s]; ++i)
      names.push_back("conv" + std::to_string(s + 1) + "_" + std::to_string(i + 1));
  return names;
}

ParamSet<float> seeded_extractor_weights(const ExtractorConfig& config) {
  config.validate();
  Rng rng = Rng(config.seed).child("extractor");
  ParamSet<float> weights;
  std::size_t in_channels = 3;
  for (std::size_t s = 0; s < config.stage_channels.size(); ++s) {
    for (std::size_t i = 0; i < config.convs_per_stage[s]; ++i) {
      const std::string name = "conv" + std::to_string(s + 1) + "_" + std::to_string(i + 1);
      const std::size_t out = config.stage_channels[s];
      const double stddev = std::sqrt(2.0 / static_cast<double>(in_channels * 9));
      weights.add(name + ".weight", rng.normal_tensor<float>({out, in_channels, 3, 3}, stddev));
      weights.add(name + ".bias", Tensor<float>({out}));
      in_channels = out;
    }
  }
  return weights;
}

namespace {

ParamSet<float> initial_weights(const ExtractorConfig& config) {
  config.validate();
  ParamSet<float> expected = seeded_extractor_weights(config);
  if (!config.weight_file) return expected;
  ParamSet<float> loaded = load_weights(*config.weight_file);
  require_matching_layout(expected, loaded, "extractor '" + config.weight_file->string() + "'");
  return loaded;
}

}  // namespace

template <typename T>
Extractor<T>::Extractor(ExtractorConfig config)
    : Extractor(config, initial_weights(config)) {}

template <typename T>
Extractor<T>::Extractor(ExtractorConfig config, const ParamSet<float>& weights)
    : config_(std::move(config)) {
  config_.validate();
  require_matching_layout(seeded_extractor_weights(config_), weights, "extractor");
  for (const auto& e : weights.entries()) {
    if (!e.value.all_finite()) throw NumericError("extractor weight '" + e.name + "' is not finite");
  }
  weights_ = weights.template cast<T>();
  for (std::size_t s = 0; s < config_.convs_per_stage.size(); ++s)
    for (std::size_t i = 0; i < config_.convs_per_stage[s]; ++i)
      layers_.push_back({"conv" + std::to_string(s + 1) + "_" + std::to_string(i + 1), s,
                         s > 0 && i == 0});
}

template <typename T>
std::size_t Extractor<T>::channels(const std::string& tap) const {
  for (const auto& layer : layers_)
    if (layer.name == tap) return config_.stage_channels[layer.stage];
  throw ConfigError("unknown extractor tap '" + tap + "'");
}

template <typename T>
FeatureVars<T> Extractor<T>::extract(Tape<T>& tape, const Var<T>& images,
                                     const std::vector<std::string>& taps) const {
  std::size_t deepest = 0;
  for (const auto& tap : taps) {
    auto it = std::find_if(layers_.begin(), layers_.end(),
                           [&](const Layer& l) { return l.name == tap; });
    if (it == layers_.end()) throw ConfigError("unknown extractor tap '" + tap + "'");
    deepest = std::max(deepest, static_cast<std::size_t>(it - layers_.begin()));
  }
  Var<T> x = images;
  if (x.shape().size() == 3) {
    const Shape& s = x.shape();
    x = reshape(x, {1, s[0], s[1], s[2]});
  }
  const Shape& s = x.shape();
  if (s.size() != 4 || s[1] != 3) {
    throw ShapeError("extract: expected images (N,3,H,W) or (3,H,W), got " + shape_to_string(s));
  }
  const std::size_t factor = std::size_t{1} << layers_[deepest].stage;
  if (s[2] % factor != 0 || s[3] % factor != 0) {
    throw ShapeError("extract: image size " + std::to_string(s[2]) + "x" + std::to_string(s[3]) +
                     " is not divisible by " + std::to_string(factor) + " (needed to reach " +
                     layers_[deepest].name + ")");
  }
  FeatureVars<T> out;
  if (taps.empty()) return out;
  for (std::size_t li = 0; li <= deepest; ++li) {
    const Layer& layer = layers_[li];
    if (layer.pool_before) x = avg_pool2(x);
    const Var<T> w = tape.constant(weights_.get(layer.name + ".weight"));
    const Var<T> b = tape.constant(weights_.get(layer.name + ".bias"));
    x = relu(conv2d(x, w, b, 1, 1));
    if (std::find(taps.begin(), taps.end(), layer.name) != taps.end()) out.emplace(layer.name, x);
  }
  return out;
}

template <typename T>
FeatureMapSet<T> Extractor<T>::extract(const Tensor<T>& image,
                                       const std::vector<std::string>& taps) const {
  Tape<T> tape;
  const auto vars = extract(tape, tape.constant(image), taps);
  FeatureMapSet<T> out;
  for (const auto& [name, v] : vars) {
    const Shape& s = v.shape();
    out.emplace(name, v.value().reshaped({s[1], s[2], s[3]}));
  }
  return out;
}

template <typename T>
void Extractor<T>::save(const std::filesystem::path& path) const {
  save_weights(weights_.template cast<float>(), path);
}

template class Extractor<float>;
template class Extractor<double>;

}  // namespace mtex
