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

#include "mtex/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "mtex/error.hpp"
#include "mtex/generator.hpp"
#include "mtex/loss_network.hpp"
#include "mtex/ops.hpp"
#include "mtex/style_transfer.hpp"
#include "mtex/texture_stats.hpp"

namespace mtex {

namespace {

double evaluate(const ScalarProgram& program, const std::vector<Tensor<double>>& inputs) {
  Tape<double> tape;
  std::vector<Var<double>> vars;
  for (const auto& t : inputs) vars.push_back(tape.constant(t));
  return program(vars).value().item();
}

// Values bounded away from zero, so |x|, relu and friends are smooth within
// the finite-difference step.
Tensor<double> off_kink(const Shape& shape, Rng& rng) {
  Tensor<double> t(shape);
  for (auto& v : t.data()) {
    const double mag = rng.uniform(0.1, 1.0);
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

Tensor<double> normal(const Shape& shape, Rng& rng) { return rng.normal_tensor<double>(shape, 1.0); }

// A chain of tensors whose pairwise differences keep one sign per element
// and stay at least 0.1 apart, for L1 distances between members.
std::vector<Tensor<double>> spaced(const Shape& shape, std::size_t count, Rng& rng) {
  std::vector<Tensor<double>> out{normal(shape, rng)};
  Tensor<double> sign(shape);
  for (auto& v : sign.data()) v = rng.uniform() < 0.5 ? -1.0 : 1.0;
  while (out.size() < count) {
    Tensor<double> next = out.back();
    for (std::size_t i = 0; i < next.numel(); ++i) {
      next.data()[i] += sign.data()[i] * rng.uniform(0.1, 1.0);
    }
    out.push_back(std::move(next));
  }
  return out;
}

// sum(v * r) for a fixed random r, turning any output into a generic scalar.
Var<double> project(const Var<double>& v, std::uint64_t salt) {
  Rng rng(salt);
  return sum(mul(v, v.tape().constant(rng.normal_tensor<double>(v.shape(), 1.0))));
}

struct Check {
  const char* name;
  std::function<std::vector<Tensor<double>>(Rng&)> inputs;
  std::function<Var<double>(const std::vector<Var<double>>&, std::uint64_t salt)> program;
  // Kinks that input sampling cannot steer clear of; probed adaptively.
  bool kinks = false;
};

using Vars = std::vector<Var<double>>;

std::vector<Check> primitive_checks() {
  std::vector<Check> c;
  auto unary = [&](const char* name, Shape shape, bool kink, auto op) {
    c.push_back({name,
                 [shape, kink](Rng& r) {
                   return std::vector{kink ? off_kink(shape, r) : normal(shape, r)};
                 },
                 [op](const Vars& v, std::uint64_t s) { return project(op(v[0]), s); }});
  };
  auto binary = [&](const char* name, Shape sa, Shape sb, auto op) {
    c.push_back({name, [sa, sb](Rng& r) { return std::vector{normal(sa, r), normal(sb, r)}; },
                 [op](const Vars& v, std::uint64_t s) { return project(op(v[0], v[1]), s); }});
  };
  using V = Var<double>;
  binary("add", {2, 3, 4}, {2, 3, 4}, [](const V& a, const V& b) { return add(a, b); });
  binary("sub", {2, 3, 4}, {2, 3, 4}, [](const V& a, const V& b) { return sub(a, b); });
  binary("mul", {2, 3, 4}, {2, 3, 4}, [](const V& a, const V& b) { return mul(a, b); });
  unary("scale", {3, 5}, false, [](const V& a) { return scale(a, -0.7); });
  binary("shift", {2, 3, 4}, {}, [](const V& a, const V& b) { return shift(a, b); });
  unary("sum", {2, 3, 4}, false, [](const V& a) { return sum(a); });
  unary("mean", {2, 3, 4}, false, [](const V& a) { return mean(a); });
  unary("l1_norm", {2, 3, 4}, true, [](const V& a) { return l1_norm(a); });
  unary("abs", {2, 3, 4}, true, [](const V& a) { return abs(a); });
  unary("relu", {2, 3, 4}, true, [](const V& a) { return relu(a); });
  unary("leaky_relu", {2, 3, 4}, true, [](const V& a) { return leaky_relu(a, kLeakySlope); });
  unary("tanh", {2, 3, 4}, false, [](const V& a) { return tanh(a); });
  unary("reshape", {2, 3, 4}, false, [](const V& a) { return reshape(a, {6, 4}); });
  unary("transpose", {3, 5}, false, [](const V& a) { return transpose(a); });
  binary("matmul", {3, 4}, {4, 5}, [](const V& a, const V& b) { return matmul(a, b); });
  binary("outer_product", {4}, {3}, [](const V& a, const V& b) { return outer_product(a, b); });
  unary("avg_pool2", {2, 3, 4, 6}, false, [](const V& a) { return avg_pool2(a); });
  unary("upsample_nearest", {2, 3, 3, 2}, false, [](const V& a) { return upsample_nearest(a, 2); });
  binary("concat_channels", {2, 3, 4, 4}, {2, 2, 4, 4},
         [](const V& a, const V& b) { return concat_channels(a, b); });
  unary("slice_channels", {2, 5, 3, 3}, false, [](const V& a) { return slice_channels(a, 1, 4); });
  binary("concat_batch", {1, 3, 4, 4}, {2, 3, 4, 4},
         [](const V& a, const V& b) { return concat_batch(std::vector{a, b}); });
  unary("slice_batch", {3, 2, 4, 4}, false, [](const V& a) { return slice_batch(a, 1); });
  unary("repeat_batch", {1, 2, 3, 3}, false, [](const V& a) { return repeat_batch(a, 3); });
  c.push_back({"conv2d", [](Rng& r) {
                 return std::vector{normal({2, 3, 6, 6}, r), normal({4, 3, 3, 3}, r), normal({4}, r)};
               },
               [](const Vars& v, std::uint64_t s) { return project(conv2d(v[0], v[1], v[2], 1, 1), s); }});
  binary("conv2d_stride2", {2, 3, 7, 7}, {4, 3, 3, 3},
         [](const V& a, const V& b) { return conv2d(a, b, 2, 1); });
  binary("conv2d_pointwise", {2, 5, 4, 4}, {3, 5, 1, 1},
         [](const V& a, const V& b) { return conv2d(a, b, 1, 0); });
  binary("full_conv2d", {2, 3, 3, 3}, {3, 4, 4, 4},
         [](const V& a, const V& b) { return full_conv2d(a, b, 1); });
  binary("full_conv2d_stride2", {1, 3, 3, 4}, {3, 2, 3, 3},
         [](const V& a, const V& b) { return full_conv2d(a, b, 2); });
  unary("gram", {1, 4, 5, 5}, false, [](const V& a) { return gram(a); });
  unary("centered_gram", {4, 5, 5}, false, [](const V& a) { return centered_gram(a); });

  // Scalar already. The L1 kink sits wherever a Gram entry meets its target,
  // which depends on both inputs, so this one needs the adaptive step.
  c.push_back({"texture_loss",
               [](Rng& r) { return std::vector{normal({1, 3, 4, 4}, r), normal({1, 5, 2, 2}, r)}; },
               [](const Vars& v, std::uint64_t s) {
                 Rng rng(s);
                 TextureTarget<double> target;
                 target.grams.push_back({"a", rng.normal_tensor<double>({3, 3}, 1.0)});
                 target.grams.push_back({"b", rng.normal_tensor<double>({5, 5}, 1.0)});
                 const FeatureVars<double> feats{{"a", v[0]}, {"b", v[1]}};
                 const std::vector<double> weights{0.5, 2.0};
                 return texture_loss(target, feats, weights);
               },
               true});
  for (auto [name, mode] : {std::pair{"diversity_loss", DiversityScale::kPerPosition},
                            std::pair{"diversity_loss_per_element", DiversityScale::kPerElement},
                            std::pair{"diversity_loss_raw", DiversityScale::kRaw}}) {
    c.push_back({name,
                 [](Rng& r) { return spaced({1, 3, 2, 2}, 3, r); },
                 [mode](const Vars& v, std::uint64_t) {
                   const std::vector<std::size_t> perm{2, 0, 1};
                   return diversity_loss(v, perm, mode);
                 }});
  }
  binary("total_loss", {}, {}, [](const V& a, const V& b) { return total_loss(a, b, 1.3, -0.6); });
  c.push_back({"feature_distance", [](Rng& r) { return spaced({1, 4, 3, 3}, 2, r); },
               [](const Vars& v, std::uint64_t) { return feature_distance(v[0], v[1]); }});
  return c;
}

SynthesisConfig small_synthesis() {
  SynthesisConfig c;
  c.textures = 2;
  c.embed_dim = 3;
  c.noise_dim = 2;
  c.base_size = 2;
  c.scales = 3;  // 16x16 output
  c.seed_channels = 6;
  c.scale_channels = {6, 5, 4};
  c.guidance_channels = 2;
  return c;
}

ExtractorConfig small_extractor() {
  ExtractorConfig c;
  c.stage_channels = {4, 6, 8, 8, 8};
  c.convs_per_stage = {1, 1, 2, 2, 1};
  c.taps = {"conv1_1", "conv2_1", "conv3_1", "conv4_1", "conv5_1", "conv4_2"};
  return c;
}

std::vector<Tensor<double>> tensors_of(const ParamSet<double>& params) {
  std::vector<Tensor<double>> out;
  for (const auto& e : params.entries()) out.push_back(e.value);
  return out;
}

// Trainer-equivalent loss (batch of 2, alpha 1, beta -1) as a function of the
// generator parameters.
std::function<GradientError(Rng&)> generator_check(const Extractor<double>& extractor, bool use_selector,
                                            FiniteDifference fd, std::size_t coords) {
  return [&extractor, use_selector, fd, coords](Rng& rng) {
    const SynthesisConfig config = small_synthesis();
    const auto layout = std::make_shared<ParamSet<double>>(init_generator<double>(config, rng).tensors);
    const Tensor<double> noise = sample_noise<double>(2, config.noise_dim, rng);
    const std::size_t texture = rng.index(config.textures);
    const auto target = make_texture_target(extractor, rng.uniform_tensor<double>({3, 16, 16}, -1, 1),
                                            kDefaultTextureTaps);
    ScalarProgram program = [=, &extractor](const Vars& v) {
      Tape<double>& tape = v.front().tape();
      const BoundParams<double> bound(*layout, v);
      const auto selection =
          tape.constant(SelectionUnit::one_hot(config.textures, texture).to_tensor<double>());
      const Var<double> images = generate(config, bound, selection, tape.constant(noise), use_selector);
      std::vector<std::string> taps = kDefaultTextureTaps;
      taps.push_back(kDiversityTap);
      const auto feats = extractor.extract(tape, images, taps);
      Var<double> tex;
      Vars div;
      for (std::size_t i = 0; i < 2; ++i) {
        FeatureVars<double> one;
        for (const auto& t : kDefaultTextureTaps) one.emplace(t, slice_batch(feats.at(t), i));
        const Var<double> term = texture_loss(target, one);
        tex = tex.valid() ? add(tex, term) : term;
        div.push_back(slice_batch(feats.at(kDiversityTap), i));
      }
      const std::vector<std::size_t> perm{1, 0};
      return total_loss(scale(tex, 0.5), diversity_loss(div, perm), 1.0, -1.0);
    };
    return gradient_error(program, tensors_of(*layout), fd, coords, rng);
  };
}

std::function<GradientError(Rng&)> extractor_check(const Extractor<double>& extractor,
                                            FiniteDifference fd, std::size_t coords) {
  return [&extractor, fd, coords](Rng& rng) {
    const auto target = make_texture_target(extractor, rng.uniform_tensor<double>({3, 16, 16}, -1, 1),
                                            kDefaultTextureTaps);
    ScalarProgram program = [=, &extractor](const Vars& v) {
      return texture_loss(target, extractor.extract(v[0].tape(), v[0], kDefaultTextureTaps));
    };
    return gradient_error(program, {rng.uniform_tensor<double>({3, 16, 16}, -1, 1)}, fd,
                              coords * 4, rng);
  };
}

std::function<GradientError(Rng&)> transfer_check(const Extractor<double>& extractor,
                                           FiniteDifference fd, std::size_t coords) {
  return [&extractor, fd, coords](Rng& rng) {
    TransferConfig config;
    config.encoder_channels = {4, 5};
    config.decoder_channels = {5, 4};
    const auto layout = std::make_shared<ParamSet<double>>(init_transfer<double>(config, rng).tensors);
    const Tensor<double> content = rng.uniform_tensor<double>({1, 3, 16, 16}, -1, 1);
    const Tensor<double> noise =
        rng.uniform_tensor<double>({2, config.noise_depth(), 4, 4}, -1, 1);
    const auto target = make_texture_target(extractor, rng.uniform_tensor<double>({3, 16, 16}, -1, 1),
                                            kDefaultTextureTaps);
    ScalarProgram program = [=, &extractor](const Vars& v) {
      Tape<double>& tape = v.front().tape();
      const BoundParams<double> bound(*layout, v);
      const Var<double> input = repeat_batch(tape.constant(content), 2);
      const Var<double> out = transfer(config, bound, input, tape.constant(noise));
      std::vector<std::string> taps = kDefaultTextureTaps;
      taps.push_back(kDiversityTap);
      const auto feats = extractor.extract(tape, out, taps);
      const auto content_feats = extractor.extract(tape, tape.constant(content), {kDiversityTap});
      Var<double> total;
      Vars div;
      for (std::size_t i = 0; i < 2; ++i) {
        FeatureVars<double> one;
        for (const auto& t : kDefaultTextureTaps) one.emplace(t, slice_batch(feats.at(t), i));
        const Var<double> f = slice_batch(feats.at(kDiversityTap), i);
        const Var<double> term =
            add(texture_loss(target, one), feature_distance(f, content_feats.at(kDiversityTap)));
        total = total.valid() ? add(total, term) : term;
        div.push_back(f);
      }
      const std::vector<std::size_t> perm{1, 0};
      return total_loss(total, diversity_loss(div, perm), 0.5, -1.0);
    };
    return gradient_error(program, tensors_of(*layout), fd, coords, rng);
  };
}

}  // namespace

void GradientError::merge(const GradientError& other) {
  max_error = std::max(max_error, other.max_error);
  probed += other.probed;
  skipped += other.skipped;
}

GradientError gradient_error(const ScalarProgram& program, const std::vector<Tensor<double>>& inputs,
                             const FiniteDifference& fd, std::size_t max_coords, Rng& rng) {
  if (!(fd.step > 0.0)) throw ConfigError("finite-difference step must be positive");
  Tape<double> tape;
  std::vector<Var<double>> leaves;
  for (const auto& t : inputs) leaves.push_back(tape.leaf(t));
  const Var<double> loss = program(leaves);
  tape.backward(loss);
  const double f0 = loss.value().item();

  GradientError result;
  std::vector<Tensor<double>> probe = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const std::size_t n = inputs[i].numel();
    std::vector<std::size_t> coords;
    if (max_coords == 0 || max_coords >= n) {
      for (std::size_t j = 0; j < n; ++j) coords.push_back(j);
    } else {
      for (std::size_t k = 0; k < max_coords; ++k) coords.push_back(rng.index(n));
    }
    const Tensor<double>& analytic = leaves[i].grad();
    for (std::size_t j : coords) {
      const double x = inputs[i][j];
      // Central difference and the forward/backward slope gap at step h.
      auto stencil = [&](double h) {
        probe[i][j] = x + h;
        const double up = evaluate(program, probe);
        probe[i][j] = x - h;
        const double down = evaluate(program, probe);
        probe[i][j] = x;
        return std::pair{(up - down) / (2.0 * h), std::abs(up - 2.0 * f0 + down) / h};
      };
      auto [numeric, gap] = stencil(fd.step);
      bool resolved = fd.kink_threshold <= 0.0;
      for (double h = fd.step; !resolved; h /= 10.0) {
        const auto [finer, finer_gap] = stencil(h / 10.0);
        const double limit = fd.kink_threshold * std::max(1.0, std::abs(finer));
        // Both stencils must look smooth; a kink lying inside both can keep
        // the two central differences close while the finer one bends.
        if (gap <= limit && finer_gap <= limit && std::abs(finer - numeric) <= limit) {
          resolved = true;
        } else if (h / 10.0 < fd.min_step) {
          break;
        } else {
          numeric = finer;
          gap = finer_gap;
        }
      }
      ++result.probed;
      if (!resolved) {
        ++result.skipped;
        continue;
      }
      const double err = std::abs(analytic[j] - numeric) / std::max(1.0, std::abs(numeric));
      result.max_error = std::max(result.max_error, err);
    }
  }
  return result;
}

std::vector<GradCheckResult> run_gradcheck(
    const GradCheckOptions& options, const std::function<void(const GradCheckResult&)>& progress) {
  if (options.trials == 0) throw ConfigError("gradcheck needs at least one trial");
  std::vector<GradCheckResult> results;
  const Rng root(options.seed);
  auto report = [&](GradCheckResult r) {
    if (progress) progress(r);
    results.push_back(std::move(r));
  };

  for (const Check& check : primitive_checks()) {
    GradCheckResult r{check.name, false, options.trials, {}, options.primitive_tolerance};
    Rng stream = root.child(check.name);
    for (std::size_t t = 0; t < options.trials; ++t) {
      Rng trial = stream.child(static_cast<std::uint64_t>(t));
      const auto inputs = check.inputs(trial);
      const std::uint64_t salt = trial.next_u64();
      const auto& fn = check.program;
      const ScalarProgram program = [&fn, salt](const Vars& v) { return fn(v, salt); };
      const FiniteDifference fd{options.step,
                                check.kinks ? options.primitive_tolerance / 10.0 : 0.0};
      r.error.merge(gradient_error(program, inputs, fd, 0, trial));
    }
    report(std::move(r));
  }

  const Extractor<double> extractor(small_extractor());
  const FiniteDifference fd{options.step, options.composite_tolerance / 10.0};
  const std::vector<std::pair<const char*, std::function<GradientError(Rng&)>>> composites{
      {"extractor_texture_loss", extractor_check(extractor, fd, options.composite_coords)},
      {"generator_train_loss",
       generator_check(extractor, true, fd, options.composite_coords)},
      {"generator_train_loss_no_selector",
       generator_check(extractor, false, fd, options.composite_coords)},
      {"transfer_train_loss", transfer_check(extractor, fd, options.composite_coords)},
  };
  for (const auto& [name, fn] : composites) {
    GradCheckResult r{name, true, options.trials, {}, options.composite_tolerance};
    Rng stream = root.child(name);
    for (std::size_t t = 0; t < options.trials; ++t) {
      Rng trial = stream.child(static_cast<std::uint64_t>(t));
      r.error.merge(fn(trial));
    }
    report(std::move(r));
  }
  return results;
}

}  // namespace mtex
