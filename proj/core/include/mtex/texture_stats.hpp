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
#include <span>
#include <string>
#include <vector>

#include "mtex/autodiff.hpp"
#include "mtex/loss_network.hpp"
#include "mtex/params.hpp"
#include "mtex/rng.hpp"

namespace mtex {

/// Channel-correlation statistic of one feature layer:
///   G[i,j] = (1 / (H*W)) * sum_k F[i,k] * F[j,k]
/// over flattened spatial positions k. The centered variant subtracts the
/// single mean over all activations of the layer before the product.
template <typename T>
struct GramMatrix {
  Tensor<T> values;  // [C,C]
  std::string layer;
  double divisor = 1.0;  // H*W of the source map
};

/// Differentiable Gram of features [C,H,W] or [1,C,H,W] -> [C,C].
template <typename T>
Var<T> gram(const Var<T>& features);
/// Differentiable mean-centered Gram.
template <typename T>
Var<T> centered_gram(const Var<T>& features);

template <typename T>
GramMatrix<T> gram_matrix(const Tensor<T>& features, std::string layer = {});
template <typename T>
GramMatrix<T> centered_gram_matrix(const Tensor<T>& features, std::string layer = {});

/// Precomputed centered Grams of one exemplar, one per texture-loss tap.
template <typename T>
struct TextureTarget {
  std::size_t texture_id = 0;
  std::vector<NamedTensor<T>> grams;

  std::vector<std::string> taps() const;
};

template <typename T>
TextureTarget<T> make_texture_target(const Extractor<T>& extractor, const Tensor<T>& image,
                                     const std::vector<std::string>& taps,
                                     std::size_t texture_id = 0);

/// Target whose Grams are weight_a * G_a + (1 - weight_a) * G_b.
template <typename T>
TextureTarget<T> blend_targets(const TextureTarget<T>& a, const TextureTarget<T>& b,
                               double weight_a);

/// sum_l w_l * || Gbar_target,l - Gbar(features_l) ||_1 for one image.
/// `features` maps each target tap to an activation [C,H,W] or [1,C,H,W].
/// `layer_weights` aligns with target.grams; empty means all 1.
template <typename T>
Var<T> texture_loss(const TextureTarget<T>& target, const FeatureVars<T>& features,
                    std::span<const double> layer_weights = {});

/// Uniformly random permutation of 0..n-1 without fixed points, drawn by
/// rejection from Fisher-Yates shuffles. Throws ConfigError for n < 2.
std::vector<std::size_t> derangement(std::size_t n, Rng& rng);

/// How the per-pair L1 distance of the diversity loss is scaled.
enum class DiversityScale {
  kPerElement,   // divided by the element count of the tap tensor
  kPerPosition,  // divided by the spatial positions H*W of the tap
  kRaw,          // plain L1 sum
};

/// (1/N) * sum_i || features[i] - features[perm[i]] ||_1, with every batch
/// member receiving gradient.
template <typename T>
Var<T> diversity_loss(const std::vector<Var<T>>& features,
                      std::span<const std::size_t> permutation,
                      DiversityScale scale = DiversityScale::kPerPosition);
/// As above with a freshly sampled derangement.
template <typename T>
Var<T> diversity_loss(const std::vector<Var<T>>& features, Rng& rng,
                      DiversityScale scale = DiversityScale::kPerPosition);

/// alpha * texture + beta * diversity.
template <typename T>
Var<T> total_loss(const Var<T>& texture, const Var<T>& diversity, double alpha, double beta);

}  // namespace mtex
