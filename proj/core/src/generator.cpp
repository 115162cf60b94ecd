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

#include "mtex/generator.hpp"

#include <cmath>
#include <set>
#include <string>

#include "mtex/error.hpp"
#include "mtex/ops.hpp"

namespace mtex {

namespace {

std::string scale_name(const char* stream, std::size_t s) {
  return std::string(stream) + ".scale" + std::to_string(s + 1);
}

// Channel count feeding the conv of scale s (previous width + guidance).
std::size_t scale_input_channels(const SynthesisConfig& c, std::size_t s) {
  const std::size_t prev = s == 0 ? c.seed_channels : c.scale_channels[s - 1];
  return prev + c.guidance_channels;
}

}  // namespace

void SynthesisConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("synthesis.") + name + " must be positive");
  };
  positive(textures, "textures");
  positive(embed_dim, "embed_dim");
  positive(noise_dim, "noise_dim");
  positive(base_size, "base_size");
  positive(scales, "scales");
  positive(seed_channels, "seed_channels");
  positive(guidance_channels, "guidance_channels");
  if (scale_channels.size() != scales) {
    throw ConfigError("synthesis.scale_channels lists " + std::to_string(scale_channels.size()) +
                      " widths for " + std::to_string(scales) + " scales");
  }
  for (std::size_t c : scale_channels) positive(c, "scale_channels");
  if (scales > 10) throw ConfigError("synthesis.scales is implausibly large");
}

SelectionUnit::SelectionUnit(std::size_t textures) : weights_(textures, 0.0) {}

SelectionUnit SelectionUnit::one_hot(std::size_t textures, std::size_t index) {
  SelectionUnit s(textures);
  s.set(index, 1.0);
  return s;
}

void SelectionUnit::set(std::size_t index, double weight) {
  if (index >= weights_.size()) {
    throw ConfigError("selection index " + std::to_string(index) + " out of range for " +
                      std::to_string(weights_.size()) + " textures");
  }
  if (!(weight >= 0.0) || !std::isfinite(weight)) {
    throw ConfigError("selection weights must be finite and nonnegative");
  }
  weights_[index] = weight;
}

bool SelectionUnit::is_one_hot() const {
  std::size_t ones = 0;
  for (double w : weights_) {
    if (w == 1.0) ++ones;
    else if (w != 0.0) return false;
  }
  return ones == 1;
}

SelectionUnit interpolate_selection(std::size_t textures,
                                    const std::vector<std::pair<std::size_t, double>>& bits) {
  SelectionUnit s(textures);
  std::set<std::size_t> seen;
  for (const auto& [index, weight] : bits) {
    if (!seen.insert(index).second) {
      throw ConfigError("selection index " + std::to_string(index) + " given twice");
    }
    s.set(index, weight);
  }
  return s;
}

ParamSet<float> generator_layout(const SynthesisConfig& c) {
  c.validate();
  ParamSet<float> p;
  p.add("embedding", Tensor<float>({c.textures, c.embed_dim}));
  p.add("generator.seed.weight",
        Tensor<float>({c.noise_dim * c.embed_dim, c.seed_channels, c.base_size, c.base_size}));
  p.add("selector.proj.weight",
        Tensor<float>({c.embed_dim, c.guidance_channels, c.base_size, c.base_size}));
  for (std::size_t s = 0; s < c.scales; ++s) {
    p.add(scale_name("selector", s) + ".weight",
          Tensor<float>({c.guidance_channels, c.guidance_channels, 3, 3}));
    p.add(scale_name("selector", s) + ".bias", Tensor<float>({c.guidance_channels}));
  }
  for (std::size_t s = 0; s < c.scales; ++s) {
    p.add(scale_name("generator", s) + ".weight",
          Tensor<float>({c.scale_channels[s], scale_input_channels(c, s), 3, 3}));
    p.add(scale_name("generator", s) + ".bias", Tensor<float>({c.scale_channels[s]}));
  }
  p.add("to_rgb.weight", Tensor<float>({3, c.scale_channels.back(), 3, 3}));
  p.add("to_rgb.bias", Tensor<float>({3}));
  return p;
}

template <typename T>
GeneratorParams<T> init_generator(const SynthesisConfig& config, Rng& rng) {
  ParamSet<float> layout = generator_layout(config);
  ParamSet<float> params;
  for (auto& e : layout.entries()) {
    const Shape& s = e.value.shape();
    if (e.name == "embedding") {
      params.add(e.name, rng.normal_tensor<float>(s, 0.1));
    } else if (e.name.ends_with(".bias")) {
      params.add(e.name, Tensor<float>(s));
    } else {
      // Transposed kernels are [in, out, kh, kw]; regular ones [out, in, kh, kw].
      const bool transposed = e.name == "generator.seed.weight" || e.name == "selector.proj.weight";
      const std::size_t fan_in = transposed ? s[0] : s[1] * s[2] * s[3];
      params.add(e.name, rng.normal_tensor<float>(s, std::sqrt(2.0 / static_cast<double>(fan_in))));
    }
  }
  return {config, params.template cast<T>()};
}

template <typename T>
Var<T> embed(const BoundParams<T>& params, const Var<T>& selection) {
  const Var<T>& table = params["embedding"];
  const std::size_t m = table.shape()[0];
  if (selection.shape() != Shape{m}) {
    throw ShapeError("embed: selection has shape " + shape_to_string(selection.shape()) +
                     " but the network expects " + std::to_string(m) + " textures");
  }
  const Var<T> row = matmul(reshape(selection, {1, m}), table);
  return reshape(row, {table.shape()[1]});
}

template <typename T>
Var<T> seed_maps(const Var<T>& noise, const Var<T>& embedding) {
  const Var<T> outer = outer_product(noise, embedding);
  return reshape(outer, {1, noise.shape()[0] * embedding.shape()[0], 1, 1});
}

template <typename T>
std::vector<Var<T>> selector_guidance(const SynthesisConfig& config, const BoundParams<T>& params,
                                      const Var<T>& embedding) {
  const Var<T> column = reshape(embedding, {1, config.embed_dim, 1, 1});
  Var<T> x = leaky_relu(full_conv2d(column, params["selector.proj.weight"], 1), kLeakySlope);
  std::vector<Var<T>> maps;
  for (std::size_t s = 0; s < config.scales; ++s) {
    x = upsample_nearest(x, 2);
    const std::string name = scale_name("selector", s);
    x = leaky_relu(conv2d(x, params[name + ".weight"], params[name + ".bias"], 1, 1), kLeakySlope);
    maps.push_back(x);
  }
  return maps;
}

template <typename T>
Var<T> generate(const SynthesisConfig& config, const BoundParams<T>& params,
                const Var<T>& selection, const Var<T>& noise, bool use_selector) {
  const Shape& ns = noise.shape();
  if (ns.size() != 2 || ns[1] != config.noise_dim || ns[0] == 0) {
    throw ShapeError("generate: noise must be (N," + std::to_string(config.noise_dim) +
                     "), got " + shape_to_string(ns));
  }
  const std::size_t batch = ns[0];
  Tape<T>& tape = noise.tape();
  const Var<T> embedding = embed(params, selection);

  std::vector<Var<T>> seeds;
  seeds.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    const Var<T> z = reshape(slice_batch(noise, i), {config.noise_dim});
    seeds.push_back(seed_maps(z, embedding));
  }
  const Var<T> seed = batch == 1 ? seeds.front() : concat_batch(seeds);
  Var<T> h = leaky_relu(full_conv2d(seed, params["generator.seed.weight"], 1), kLeakySlope);

  std::vector<Var<T>> guidance;
  if (use_selector) guidance = selector_guidance(config, params, embedding);

  for (std::size_t s = 0; s < config.scales; ++s) {
    h = upsample_nearest(h, 2);
    const std::size_t size = h.shape()[2];
    const Var<T> guide =
        use_selector
            ? (batch == 1 ? guidance[s] : repeat_batch(guidance[s], batch))
            : tape.constant(Tensor<T>({batch, config.guidance_channels, size, size}));
    h = concat_channels(h, guide);
    const std::string name = scale_name("generator", s);
    h = leaky_relu(conv2d(h, params[name + ".weight"], params[name + ".bias"], 1, 1), kLeakySlope);
  }
  return tanh(conv2d(h, params["to_rgb.weight"], params["to_rgb.bias"], 1, 1));
}

template <typename T>
Tensor<T> generate(const GeneratorParams<T>& params, const SelectionUnit& selection,
                   const Tensor<T>& noise, bool use_selector) {
  const SynthesisConfig& c = params.config;
  if (noise.shape() != Shape{c.noise_dim}) {
    throw ShapeError("generate: noise must be (" + std::to_string(c.noise_dim) + "), got " +
                     shape_to_string(noise.shape()));
  }
  Tape<T> tape;
  const BoundParams<T> bound(tape, params.tensors, false);
  const Var<T> out = generate(c, bound, tape.constant(selection.template to_tensor<T>()),
                              tape.constant(noise.reshaped({1, c.noise_dim})), use_selector);
  const std::size_t size = c.output_size();
  return out.value().reshaped({3, size, size});
}

template <typename T>
Tensor<T> sample_noise(std::size_t count, std::size_t noise_dim, Rng& rng) {
  return rng.uniform_tensor<T>({count, noise_dim}, -1.0, 1.0);
}

ModelFile to_model_file(const GeneratorParams<float>& params) {
  const SynthesisConfig& c = params.config;
  ModelFile model;
  model.kind = "generator";
  auto put = [&](const char* key, std::size_t v) {
    model.config.emplace_back(key, static_cast<std::int64_t>(v));
  };
  put("textures", c.textures);
  put("embed_dim", c.embed_dim);
  put("noise_dim", c.noise_dim);
  put("output_size", c.output_size());
  put("scales", c.scales);
  put("base_size", c.base_size);
  put("seed_channels", c.seed_channels);
  put("guidance_channels", c.guidance_channels);
  for (std::size_t s = 0; s < c.scale_channels.size(); ++s) {
    model.config.emplace_back("scale_channels." + std::to_string(s),
                              static_cast<std::int64_t>(c.scale_channels[s]));
  }
  model.weights = params.tensors;
  return model;
}

GeneratorParams<float> generator_from_model(const ModelFile& model) {
  if (model.kind != "generator") {
    throw FormatError("model file holds a '" + model.kind + "' network, not a generator", 0);
  }
  auto get = [&](const char* key) {
    const std::int64_t v = model.config_value(key);
    if (v < 0) throw FormatError(std::string("negative config value for ") + key, 0);
    return static_cast<std::size_t>(v);
  };
  SynthesisConfig c;
  c.textures = get("textures");
  c.embed_dim = get("embed_dim");
  c.noise_dim = get("noise_dim");
  c.scales = get("scales");
  c.base_size = get("base_size");
  c.seed_channels = get("seed_channels");
  c.guidance_channels = get("guidance_channels");
  c.scale_channels.clear();
  for (std::size_t s = 0; s < c.scales; ++s)
    c.scale_channels.push_back(get(("scale_channels." + std::to_string(s)).c_str()));
  c.validate();
  if (get("output_size") != c.output_size()) {
    throw FormatError("model output_size disagrees with its base size and scale count", 0);
  }
  require_matching_layout(generator_layout(c), model.weights, "generator model");
  for (const auto& e : model.weights.entries()) {
    if (!e.value.all_finite()) throw NumericError("generator weight '" + e.name + "' is not finite");
  }
  return {c, model.weights};
}

void save_generator(const GeneratorParams<float>& params, const std::filesystem::path& path) {
  save_model(to_model_file(params), path);
}

GeneratorParams<float> load_generator(const std::filesystem::path& path) {
  return generator_from_model(load_model_file(path));
}

#define MTEX_INSTANTIATE_GENERATOR(T)                                                        \
  template GeneratorParams<T> init_generator(const SynthesisConfig&, Rng&);                 \
  template Var<T> embed(const BoundParams<T>&, const Var<T>&);                              \
  template Var<T> seed_maps(const Var<T>&, const Var<T>&);                                  \
  template std::vector<Var<T>> selector_guidance(const SynthesisConfig&,                    \
                                                 const BoundParams<T>&, const Var<T>&);     \
  template Var<T> generate(const SynthesisConfig&, const BoundParams<T>&, const Var<T>&,    \
                           const Var<T>&, bool);                                            \
  template Tensor<T> generate(const GeneratorParams<T>&, const SelectionUnit&,              \
                              const Tensor<T>&, bool);                                      \
  template Tensor<T> sample_noise(std::size_t, std::size_t, Rng&);

MTEX_INSTANTIATE_GENERATOR(float)
MTEX_INSTANTIATE_GENERATOR(double)

}  // namespace mtex
