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

#include "mtex/style_transfer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mtex/error.hpp"
#include "mtex/ops.hpp"

namespace mtex {

namespace {

std::string stage_name(const char* part, std::size_t i) {
  return std::string(part) + ".conv" + std::to_string(i + 1);
}

void check_content_shape(const TransferConfig& c, const Shape& s) {
  if (s.size() != 4 || s[1] != 3) {
    throw ShapeError("transfer: content must be (N,3,H,W), got " + shape_to_string(s));
  }
  if (s[2] == 0 || s[3] == 0 || s[2] % c.stride() != 0 || s[3] % c.stride() != 0) {
    throw ShapeError("transfer: content size " + std::to_string(s[2]) + "x" +
                     std::to_string(s[3]) + " is not a positive multiple of the encoder stride " +
                     std::to_string(c.stride()));
  }
}

}  // namespace

void TransferConfig::validate() const {
  if (styles == 0) throw ConfigError("transfer.styles must be positive");
  if (noise_channels == 0) throw ConfigError("transfer.noise_channels must be positive");
  if (encoder_channels.empty()) throw ConfigError("transfer.encoder_channels must not be empty");
  if (encoder_channels.size() > 6) throw ConfigError("transfer.encoder_channels is too deep");
  if (decoder_channels.size() != encoder_channels.size()) {
    throw ConfigError("transfer.decoder_channels lists " + std::to_string(decoder_channels.size()) +
                      " stages for " + std::to_string(encoder_channels.size()) +
                      " encoder stages");
  }
  for (std::size_t c : encoder_channels)
    if (c == 0) throw ConfigError("transfer.encoder_channels entries must be positive");
  for (std::size_t c : decoder_channels)
    if (c == 0) throw ConfigError("transfer.decoder_channels entries must be positive");
}

ParamSet<float> transfer_layout(const TransferConfig& c) {
  c.validate();
  ParamSet<float> p;
  std::size_t in = 3;
  for (std::size_t i = 0; i < c.encoder_channels.size(); ++i) {
    p.add(stage_name("encoder", i) + ".weight", Tensor<float>({c.encoder_channels[i], in, 3, 3}));
    p.add(stage_name("encoder", i) + ".bias", Tensor<float>({c.encoder_channels[i]}));
    in = c.encoder_channels[i];
  }
  in += c.noise_depth();
  for (std::size_t i = 0; i < c.decoder_channels.size(); ++i) {
    p.add(stage_name("decoder", i) + ".weight", Tensor<float>({c.decoder_channels[i], in, 3, 3}));
    p.add(stage_name("decoder", i) + ".bias", Tensor<float>({c.decoder_channels[i]}));
    in = c.decoder_channels[i];
  }
  p.add("decoder.to_rgb.weight", Tensor<float>({3, in, 3, 3}));
  p.add("decoder.to_rgb.bias", Tensor<float>({3}));
  return p;
}

template <typename T>
TransferParams<T> init_transfer(const TransferConfig& config, Rng& rng) {
  const ParamSet<float> layout = transfer_layout(config);
  ParamSet<float> params;
  for (const auto& e : layout.entries()) {
    const Shape& s = e.value.shape();
    if (e.name.ends_with(".bias")) {
      params.add(e.name, Tensor<float>(s));
    } else {
      const double fan_in = static_cast<double>(s[1] * s[2] * s[3]);
      params.add(e.name, rng.normal_tensor<float>(s, std::sqrt(2.0 / fan_in)));
    }
  }
  return {config, params.template cast<T>()};
}

NoiseMapSet NoiseMapSet::sample(const SelectionUnit& selection, std::size_t channels,
                                std::size_t height, std::size_t width, Rng& rng) {
  if (channels == 0 || height == 0 || width == 0) {
    throw ShapeError("noise maps need positive channels and spatial size");
  }
  const std::size_t styles = selection.size();
  const std::size_t block = channels * height * width;
  Tensor<float> maps({styles * channels, height, width});
  for (std::size_t k = 0; k < styles; ++k) {
    const double w = selection.weight(k);
    if (w == 0.0) continue;
    const Tensor<float> draw = rng.uniform_tensor<float>({block}, -1.0, 1.0);
    for (std::size_t i = 0; i < block; ++i) {
      maps[k * block + i] = static_cast<float>(w * static_cast<double>(draw[i]));
    }
  }
  return NoiseMapSet(styles, channels, std::move(maps));
}

Tensor<float> NoiseMapSet::style_block(std::size_t style) const {
  if (style >= styles_) {
    throw ConfigError("style " + std::to_string(style) + " out of range for " +
                      std::to_string(styles_) + " styles");
  }
  const std::size_t h = maps_.dim(1), w = maps_.dim(2);
  const std::size_t block = channels_ * h * w;
  const auto src = maps_.data().subspan(style * block, block);
  return Tensor<float>({channels_, h, w}, std::vector<float>(src.begin(), src.end()));
}

NoiseMapSet sample_noise_maps(const TransferConfig& config, const SelectionUnit& selection,
                              std::size_t height, std::size_t width, Rng& rng) {
  if (selection.size() != config.styles) {
    throw ConfigError("selection has " + std::to_string(selection.size()) +
                      " entries for a network of " + std::to_string(config.styles) + " styles");
  }
  check_content_shape(config, {1, 3, height, width});
  return NoiseMapSet::sample(selection, config.noise_channels, height / config.stride(),
                             width / config.stride(), rng);
}

template <typename T>
Var<T> encode(const TransferConfig& config, const BoundParams<T>& params, const Var<T>& content) {
  check_content_shape(config, content.shape());
  Var<T> h = content;
  for (std::size_t i = 0; i < config.encoder_channels.size(); ++i) {
    const std::string name = stage_name("encoder", i);
    h = leaky_relu(conv2d(h, params[name + ".weight"], params[name + ".bias"], 2, 1), kLeakySlope);
  }
  return h;
}

template <typename T>
Var<T> transfer(const TransferConfig& config, const BoundParams<T>& params, const Var<T>& content,
                const Var<T>& noise) {
  Var<T> h = encode(config, params, content);
  const Shape& hs = h.shape();
  const Shape expected{hs[0], config.noise_depth(), hs[2], hs[3]};
  if (noise.shape() != expected) {
    throw ShapeError("transfer: noise maps must be " + shape_to_string(expected) + ", got " +
                     shape_to_string(noise.shape()));
  }
  h = concat_channels(h, noise);
  for (std::size_t i = 0; i < config.decoder_channels.size(); ++i) {
    const std::string name = stage_name("decoder", i);
    h = upsample_nearest(h, 2);
    h = leaky_relu(conv2d(h, params[name + ".weight"], params[name + ".bias"], 1, 1), kLeakySlope);
  }
  return tanh(conv2d(h, params["decoder.to_rgb.weight"], params["decoder.to_rgb.bias"], 1, 1));
}

template <typename T>
Tensor<T> transfer(const TransferParams<T>& params, const Tensor<T>& content,
                   const SelectionUnit& selection, Rng& rng) {
  const TransferConfig& c = params.config;
  if (content.rank() != 3 || content.dim(0) != 3) {
    throw ShapeError("transfer: content must be (3,H,W), got " + shape_to_string(content.shape()));
  }
  const std::size_t h = content.dim(1), w = content.dim(2);
  const NoiseMapSet noise = sample_noise_maps(c, selection, h, w, rng);
  Tape<T> tape;
  const BoundParams<T> bound(tape, params.tensors, false);
  const Shape ns{1, c.noise_depth(), h / c.stride(), w / c.stride()};
  const Var<T> out = transfer(c, bound, tape.constant(content.reshaped({1, 3, h, w})),
                              tape.constant(noise.maps().template cast<T>().reshaped(ns)));
  return out.value().reshaped({3, h, w});
}

template <typename T>
Tensor<T> interpolate_styles(const TransferParams<T>& params, const Tensor<T>& content,
                             const std::vector<std::pair<std::size_t, double>>& pairs, Rng& rng) {
  SelectionUnit selection(params.config.styles);
  for (const auto& [style, weight] : pairs) {
    if (style >= params.config.styles) {
      throw ConfigError("style " + std::to_string(style + 1) + " out of range for " +
                        std::to_string(params.config.styles) + " styles");
    }
    if (!(weight >= 0.0)) throw ConfigError("style weights must be non-negative");
    selection.set(style, selection.weight(style) + weight);
  }
  return transfer(params, content, selection, rng);
}

template <typename T>
Var<T> feature_distance(const Var<T>& a, const Var<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("content loss: feature shapes " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()) + " differ");
  }
  return scale(l1_norm(sub(a, b)), 1.0 / static_cast<double>(shape_numel(a.shape())));
}

template <typename T>
Var<T> content_loss(const Extractor<T>& extractor, const Var<T>& output, const Var<T>& content) {
  if (output.shape() != content.shape()) {
    throw ShapeError("content loss: image shapes " + shape_to_string(output.shape()) + " and " +
                     shape_to_string(content.shape()) + " differ");
  }
  const std::vector<std::string> taps{kDiversityTap};
  const Var<T> a = extractor.extract(output.tape(), output, taps).at(kDiversityTap);
  const Var<T> b = extractor.extract(content.tape(), content, taps).at(kDiversityTap);
  return feature_distance(a, b);
}

std::size_t TransferTrainConfig::resolved_iterations(std::size_t styles) const {
  return iterations != 0 ? iterations : 3 * styles * phase_iters;
}

void TransferTrainConfig::validate() const {
  if (phase_iters == 0) throw ConfigError("transfer.phase_iters must be positive");
  if (batch == 0) throw ConfigError("transfer.batch must be positive");
  if (beta != 0.0 && batch < 2) {
    throw ConfigError("transfer.batch must be >= 2 when transfer.beta != 0");
  }
  if (!(learning_rate >= 0.0)) throw ConfigError("transfer.learning_rate must be >= 0");
  if (style_taps.empty()) throw ConfigError("transfer.style_taps must name at least one tap");
  if (!layer_weights.empty() && layer_weights.size() != style_taps.size()) {
    throw ConfigError("transfer.layer_weights has " + std::to_string(layer_weights.size()) +
                      " entries for " + std::to_string(style_taps.size()) + " style taps");
  }
}

TransferResult train_transfer(const std::vector<Tensor<float>>& styles,
                              const std::vector<Tensor<float>>& contents,
                              const TransferConfig& network, const Extractor<float>& extractor,
                              const TransferTrainConfig& config, const ProgressFn& progress) {
  config.validate();
  network.validate();
  if (styles.empty()) throw ConfigError("style transfer training needs at least one style image");
  if (contents.empty()) throw ConfigError("style transfer training needs at least one content image");
  if (styles.size() != network.styles) {
    throw ConfigError(std::to_string(styles.size()) + " style images for a network of " +
                      std::to_string(network.styles) + " styles");
  }
  std::vector<TextureTarget<float>> targets;
  for (std::size_t k = 0; k < styles.size(); ++k) {
    targets.push_back(make_texture_target(extractor, styles[k], config.style_taps, k));
  }
  // Content features are fixed; compute them once.
  std::vector<Tensor<float>> content_feats;
  for (const auto& c : contents) {
    if (c.rank() != 3 || c.dim(0) != 3) {
      throw ShapeError("content images must be (3,H,W), got " + shape_to_string(c.shape()));
    }
    check_content_shape(network, {1, 3, c.dim(1), c.dim(2)});
    content_feats.push_back(extractor.extract(c, {config.content_tap}).at(config.content_tap));
  }
  std::vector<std::string> taps = config.style_taps;
  if (std::find(taps.begin(), taps.end(), config.content_tap) == taps.end()) {
    taps.push_back(config.content_tap);
  }

  Rng init_rng = Rng(config.seed).child("transfer-init");
  TransferParams<float> params = init_transfer<float>(network, init_rng);
  Adam<float> optimizer(AdamConfig{config.learning_rate}, params.tensors);
  Rng noise_rng = Rng(config.seed).child("noise");
  Rng derangement_rng = Rng(config.seed).child("derangement");
  Rng content_rng = Rng(config.seed).child("content");
  const Schedule schedule{config.mode, config.phase_iters, network.styles, config.seed};
  const std::size_t n = config.batch;

  LossLog log(true);
  const std::size_t iterations = config.resolved_iterations(network.styles);
  for (std::size_t it = 0; it < iterations; ++it) {
    const std::size_t style = schedule.texture_at(it);
    const std::size_t pick = content_rng.index(contents.size());
    const Tensor<float>& content = contents[pick];
    const std::size_t h = content.dim(1), w = content.dim(2);
    const SelectionUnit selection = SelectionUnit::one_hot(network.styles, style);

    Tape<float> tape;
    const BoundParams<float> bound(tape, params.tensors, true);
    std::vector<Var<float>> noise_parts;
    for (std::size_t i = 0; i < n; ++i) {
      const NoiseMapSet maps = sample_noise_maps(network, selection, h, w, noise_rng);
      noise_parts.push_back(tape.constant(maps.maps().reshaped(
          {1, network.noise_depth(), h / network.stride(), w / network.stride()})));
    }
    const Var<float> noise = n == 1 ? noise_parts.front() : concat_batch(noise_parts);
    const Var<float> single = tape.constant(content.reshaped({1, 3, h, w}));
    const Var<float> input = n == 1 ? single : repeat_batch(single, n);
    const Var<float> out = transfer(network, bound, input, noise);
    const FeatureVars<float> feats = extractor.extract(tape, out, taps);
    const Var<float> content_target = tape.constant(content_feats[pick]);

    Var<float> style_sum, content_sum;
    std::vector<Var<float>> diversity_feats;
    for (std::size_t i = 0; i < n; ++i) {
      FeatureVars<float> sample;
      for (const auto& tap : config.style_taps) sample.emplace(tap, slice_batch(feats.at(tap), i));
      const Var<float> s = texture_loss(targets[style], sample, config.layer_weights);
      const Var<float> f = slice_batch(feats.at(config.content_tap), i);
      const Var<float> c = feature_distance(reshape(f, content_target.shape()), content_target);
      style_sum = style_sum.valid() ? add(style_sum, s) : s;
      content_sum = content_sum.valid() ? add(content_sum, c) : c;
      diversity_feats.push_back(f);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    const Var<float> l_style = scale(style_sum, inv_n);
    const Var<float> l_content = scale(content_sum, inv_n);
    const Var<float> l_diversity =
        n >= 2 ? diversity_loss(diversity_feats, derangement_rng, config.diversity_scale)
               : tape.constant(Tensor<float>::scalar(0.0f));
    const Var<float> total =
        add(scale(l_content, config.content_weight),
            total_loss(l_style, l_diversity, config.style_weight * config.alpha, config.beta));
    tape.backward(total);
    optimizer.step(params.tensors, bound.gradients());

    LossRecord r;
    r.iteration = it;
    r.texture = style;
    r.l_texture = l_style.value().item();
    r.l_diversity = l_diversity.value().item();
    r.total = total.value().item();
    r.l_content = l_content.value().item();
    log.append(r);
    if (progress) progress(r);
  }
  return {std::move(params), std::move(log)};
}

ModelFile to_model_file(const TransferParams<float>& params) {
  const TransferConfig& c = params.config;
  ModelFile model;
  model.kind = "transfer";
  auto put = [&](const std::string& key, std::size_t v) {
    model.config.emplace_back(key, static_cast<std::int64_t>(v));
  };
  put("styles", c.styles);
  put("noise_channels", c.noise_channels);
  put("stages", c.encoder_channels.size());
  for (std::size_t i = 0; i < c.encoder_channels.size(); ++i)
    put("encoder_channels." + std::to_string(i), c.encoder_channels[i]);
  for (std::size_t i = 0; i < c.decoder_channels.size(); ++i)
    put("decoder_channels." + std::to_string(i), c.decoder_channels[i]);
  model.weights = params.tensors;
  return model;
}

TransferParams<float> transfer_from_model(const ModelFile& model) {
  if (model.kind != "transfer") {
    throw FormatError("model file holds a '" + model.kind + "' network, not a style transfer net",
                      0);
  }
  auto get = [&](const std::string& key) {
    const std::int64_t v = model.config_value(key);
    if (v < 0) throw FormatError("negative config value for " + key, 0);
    return static_cast<std::size_t>(v);
  };
  TransferConfig c;
  c.styles = get("styles");
  c.noise_channels = get("noise_channels");
  const std::size_t stages = get("stages");
  if (stages > 6) throw FormatError("implausible stage count in transfer model", 0);
  c.encoder_channels.clear();
  c.decoder_channels.clear();
  for (std::size_t i = 0; i < stages; ++i) {
    c.encoder_channels.push_back(get("encoder_channels." + std::to_string(i)));
    c.decoder_channels.push_back(get("decoder_channels." + std::to_string(i)));
  }
  c.validate();
  require_matching_layout(transfer_layout(c), model.weights, "transfer model");
  for (const auto& e : model.weights.entries()) {
    if (!e.value.all_finite()) throw NumericError("transfer weight '" + e.name + "' is not finite");
  }
  return {c, model.weights};
}

void save_transfer(const TransferParams<float>& params, const std::filesystem::path& path) {
  save_model(to_model_file(params), path);
}

TransferParams<float> load_transfer(const std::filesystem::path& path) {
  return transfer_from_model(load_model_file(path));
}

#define MTEX_INSTANTIATE_TRANSFER(T)                                                          \
  template TransferParams<T> init_transfer(const TransferConfig&, Rng&);                     \
  template Var<T> encode(const TransferConfig&, const BoundParams<T>&, const Var<T>&);       \
  template Var<T> transfer(const TransferConfig&, const BoundParams<T>&, const Var<T>&,      \
                           const Var<T>&);                                                   \
  template Tensor<T> transfer(const TransferParams<T>&, const Tensor<T>&,                    \
                              const SelectionUnit&, Rng&);                                   \
  template Tensor<T> interpolate_styles(const TransferParams<T>&, const Tensor<T>&,          \
                                        const std::vector<std::pair<std::size_t, double>>&,  \
                                        Rng&);                                               \
  template Var<T> feature_distance(const Var<T>&, const Var<T>&);                            \
  template Var<T> content_loss(const Extractor<T>&, const Var<T>&, const Var<T>&);

MTEX_INSTANTIATE_TRANSFER(float)
MTEX_INSTANTIATE_TRANSFER(double)

}  // namespace mtex
