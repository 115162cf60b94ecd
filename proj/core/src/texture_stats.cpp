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

#include "mtex/texture_stats.hpp"

#include <numeric>

#include "mtex/error.hpp"
#include "mtex/ops.hpp"

namespace mtex {

namespace {

// Flattens [C,H,W] or [1,C,H,W] to [C, H*W].
template <typename T>
Var<T> as_channel_rows(const Var<T>& features, const char* op) {
  const Shape& s = features.shape();
  if (s.size() == 3) return reshape(features, {s[0], s[1] * s[2]});
  if (s.size() == 4 && s[0] == 1) return reshape(features, {s[1], s[2] * s[3]});
  throw ShapeError(std::string(op) + ": expected rank-3 features (C,H,W), got " +
                   shape_to_string(s));
}

template <typename T>
Var<T> gram_of_rows(const Var<T>& rows) {
  const double positions = static_cast<double>(rows.shape()[1]);
  if (positions == 0) throw ShapeError("gram: feature map has no spatial positions");
  return scale(matmul(rows, transpose(rows)), 1.0 / positions);
}

template <typename T>
std::string rank_error_shape(const Tensor<T>& t) {
  return shape_to_string(t.shape());
}

}  // namespace

template <typename T>
Var<T> gram(const Var<T>& features) {
  return gram_of_rows(as_channel_rows(features, "gram"));
}

template <typename T>
Var<T> centered_gram(const Var<T>& features) {
  const Var<T> rows = as_channel_rows(features, "centered_gram");
  return gram_of_rows(shift(rows, scale(mean(rows), -1.0)));
}

template <typename T>
GramMatrix<T> gram_matrix(const Tensor<T>& features, std::string layer) {
  if (features.rank() != 3) {
    throw ShapeError("gram: expected rank-3 features (C,H,W), got " + rank_error_shape(features));
  }
  Tape<T> tape;
  const Var<T> g = gram(tape.constant(features));
  return {g.value(), std::move(layer), static_cast<double>(features.dim(1) * features.dim(2))};
}

template <typename T>
GramMatrix<T> centered_gram_matrix(const Tensor<T>& features, std::string layer) {
  if (features.rank() != 3) {
    throw ShapeError("centered_gram: expected rank-3 features (C,H,W), got " +
                     rank_error_shape(features));
  }
  Tape<T> tape;
  const Var<T> g = centered_gram(tape.constant(features));
  return {g.value(), std::move(layer), static_cast<double>(features.dim(1) * features.dim(2))};
}

template <typename T>
std::vector<std::string> TextureTarget<T>::taps() const {
  std::vector<std::string> out;
  for (const auto& g : grams) out.push_back(g.name);
  return out;
}

template <typename T>
TextureTarget<T> make_texture_target(const Extractor<T>& extractor, const Tensor<T>& image,
                                     const std::vector<std::string>& taps,
                                     std::size_t texture_id) {
  const FeatureMapSet<T> feats = extractor.extract(image, taps);
  TextureTarget<T> target;
  target.texture_id = texture_id;
  for (const auto& tap : taps) {
    target.grams.push_back({tap, centered_gram_matrix(feats.at(tap), tap).values});
  }
  return target;
}

template <typename T>
TextureTarget<T> blend_targets(const TextureTarget<T>& a, const TextureTarget<T>& b,
                               double weight_a) {
  if (a.taps() != b.taps()) throw ShapeError("blend_targets: targets cover different taps");
  TextureTarget<T> out;
  out.texture_id = a.texture_id;
  const T wa = static_cast<T>(weight_a);
  const T wb = static_cast<T>(1.0 - weight_a);
  for (std::size_t l = 0; l < a.grams.size(); ++l) {
    const Tensor<T>& ga = a.grams[l].value;
    const Tensor<T>& gb = b.grams[l].value;
    if (ga.shape() != gb.shape()) throw ShapeError("blend_targets: Gram shapes differ");
    Tensor<T> mix(ga.shape());
    for (std::size_t i = 0; i < mix.numel(); ++i) mix[i] = wa * ga[i] + wb * gb[i];
    out.grams.push_back({a.grams[l].name, std::move(mix)});
  }
  return out;
}

template <typename T>
Var<T> texture_loss(const TextureTarget<T>& target, const FeatureVars<T>& features,
                    std::span<const double> layer_weights) {
  if (target.grams.empty()) throw ConfigError("texture_loss: target has no taps");
  if (!layer_weights.empty() && layer_weights.size() != target.grams.size()) {
    throw ConfigError("texture_loss: " + std::to_string(layer_weights.size()) +
                      " layer weights for " + std::to_string(target.grams.size()) + " taps");
  }
  Var<T> total;
  for (std::size_t l = 0; l < target.grams.size(); ++l) {
    const auto& entry = target.grams[l];
    auto it = features.find(entry.name);
    if (it == features.end()) {
      throw ConfigError("texture_loss: features lack tap '" + entry.name + "'");
    }
    Tape<T>& tape = it->second.tape();
    const Var<T> diff = sub(centered_gram(it->second), tape.constant(entry.value));
    Var<T> term = l1_norm(diff);
    if (!layer_weights.empty()) term = scale(term, layer_weights[l]);
    total = total.valid() ? add(total, term) : term;
  }
  return total;
}

std::vector<std::size_t> derangement(std::size_t n, Rng& rng) {
  if (n < 2) {
    throw ConfigError("derangement needs n >= 2 (diversity loss is undefined for a batch of " +
                      std::to_string(n) + ")");
  }
  std::vector<std::size_t> perm(n);
  for (;;) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
    bool fixed = false;
    for (std::size_t i = 0; i < n && !fixed; ++i) fixed = perm[i] == i;
    if (!fixed) return perm;
  }
}

template <typename T>
Var<T> diversity_loss(const std::vector<Var<T>>& features,
                      std::span<const std::size_t> permutation, DiversityScale scale_mode) {
  const std::size_t n = features.size();
  if (n < 2) throw ConfigError("diversity_loss needs a batch of at least 2");
  if (permutation.size() != n) {
    throw ConfigError("diversity_loss: permutation length " + std::to_string(permutation.size()) +
                      " does not match batch size " + std::to_string(n));
  }
  for (const auto& f : features) {
    if (f.shape() != features.front().shape()) {
      throw ShapeError("diversity_loss: feature shapes differ, " +
                       shape_to_string(features.front().shape()) + " vs " +
                       shape_to_string(f.shape()));
    }
  }
  const Shape& fs = features.front().shape();
  const double elements = static_cast<double>(shape_numel(fs));
  const double positions =
      fs.size() >= 2 ? static_cast<double>(fs[fs.size() - 1] * fs[fs.size() - 2]) : elements;
  Var<T> total;
  for (std::size_t i = 0; i < n; ++i) {
    if (permutation[i] >= n) throw ConfigError("diversity_loss: permutation index out of range");
    Var<T> term = l1_norm(sub(features[i], features[permutation[i]]));
    total = total.valid() ? add(total, term) : term;
  }
  double norm = 1.0;
  if (scale_mode == DiversityScale::kPerElement) norm = elements;
  if (scale_mode == DiversityScale::kPerPosition) norm = positions;
  return scale(total, 1.0 / (static_cast<double>(n) * norm));
}

template <typename T>
Var<T> diversity_loss(const std::vector<Var<T>>& features, Rng& rng, DiversityScale scale_mode) {
  if (features.size() < 2) throw ConfigError("diversity_loss needs a batch of at least 2");
  const auto perm = derangement(features.size(), rng);
  return diversity_loss(features, std::span<const std::size_t>(perm), scale_mode);
}

template <typename T>
Var<T> total_loss(const Var<T>& texture, const Var<T>& diversity, double alpha, double beta) {
  if (texture.value().numel() != 1 || diversity.value().numel() != 1) {
    throw ShapeError("total_loss: both terms must be scalars");
  }
  return add(scale(texture, alpha), scale(diversity, beta));
}

#define MTEX_INSTANTIATE_STATS(T)                                                            \
  template Var<T> gram(const Var<T>&);                                                      \
  template Var<T> centered_gram(const Var<T>&);                                             \
  template GramMatrix<T> gram_matrix(const Tensor<T>&, std::string);                        \
  template GramMatrix<T> centered_gram_matrix(const Tensor<T>&, std::string);               \
  template struct TextureTarget<T>;                                                         \
  template TextureTarget<T> make_texture_target(const Extractor<T>&, const Tensor<T>&,      \
                                                const std::vector<std::string>&,            \
                                                std::size_t);                               \
  template TextureTarget<T> blend_targets(const TextureTarget<T>&, const TextureTarget<T>&, \
                                          double);                                          \
  template Var<T> texture_loss(const TextureTarget<T>&, const FeatureVars<T>&,              \
                               std::span<const double>);                                    \
  template Var<T> diversity_loss(const std::vector<Var<T>>&, std::span<const std::size_t>, \
                                 DiversityScale);                                           \
  template Var<T> diversity_loss(const std::vector<Var<T>>&, Rng&, DiversityScale);         \
  template Var<T> total_loss(const Var<T>&, const Var<T>&, double, double);

MTEX_INSTANTIATE_STATS(float)
MTEX_INSTANTIATE_STATS(double)

}  // namespace mtex
