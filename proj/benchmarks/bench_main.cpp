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

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "mtex/conv.hpp"
#include "mtex/curriculum.hpp"
#include "mtex/exemplars.hpp"
#include "mtex/generator.hpp"
#include "mtex/loss_network.hpp"
#include "mtex/rng.hpp"
#include "mtex/texture_stats.hpp"

namespace mtex {
namespace {

// args: channels in, channels out, spatial extent
void BM_Conv2dForward(benchmark::State& state) {
  const auto cin = static_cast<std::size_t>(state.range(0));
  const auto cout = static_cast<std::size_t>(state.range(1));
  const auto hw = static_cast<std::size_t>(state.range(2));
  Rng rng(1);
  const auto input = rng.normal_tensor<float>({4, cin, hw, hw}, 1.0);
  const auto kernel = rng.normal_tensor<float>({cout, cin, 3, 3}, 0.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d_forward(input, kernel, 1, 1));
  }
  state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_Conv2dForward)->Args({3, 8, 32})->Args({8, 16, 32})->Args({16, 32, 16})->Args({32, 32, 8});

void BM_Conv2dBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto hw = static_cast<std::size_t>(state.range(1));
  Rng rng(2);
  const auto input = rng.normal_tensor<float>({4, c, hw, hw}, 1.0);
  const auto kernel = rng.normal_tensor<float>({c, c, 3, 3}, 0.1);
  const auto grad = rng.normal_tensor<float>({4, c, hw, hw}, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d_backward_input(grad, kernel, input.shape(), 1, 1));
    benchmark::DoNotOptimize(conv2d_backward_kernel(input, grad, kernel.shape(), 1, 1));
  }
}
BENCHMARK(BM_Conv2dBackward)->Args({8, 32})->Args({16, 16});

void BM_CenteredGram(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto hw = static_cast<std::size_t>(state.range(1));
  Rng rng(3);
  const auto features = rng.normal_tensor<float>({c, hw, hw}, 1.0);
  for (auto _ : state) {
    Tape<float> tape;
    benchmark::DoNotOptimize(centered_gram(tape.constant(features)).value());
  }
}
BENCHMARK(BM_CenteredGram)->Args({8, 32})->Args({32, 8});

// One full curriculum update: synthesis, loss network, backprop and Adam.
void BM_TrainStep(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const Extractor<float> extractor{ExtractorConfig{}};
  const std::vector<std::string> names{"stripes", "dots", "bricks"};
  std::vector<Tensor<float>> exemplars;
  for (std::size_t k = 0; k < m; ++k) exemplars.push_back(procedural_texture(names[k], 32, k + 1));
  SynthesisConfig synthesis;
  synthesis.textures = m;
  Rng rng(4);
  Trainer trainer(init_generator<float>(synthesis, rng), extractor,
                  precompute_targets(extractor, exemplars, kDefaultTextureTaps, 32), TrainConfig{});
  std::size_t iteration = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(trainer.step(iteration, iteration % m));
    ++iteration;
  }
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace mtex

BENCHMARK_MAIN();
