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
#include <string>
#include <vector>

#include "mtex/run_config.hpp"

// Subcommands of the mtex tool. Each returns the process exit code and
// throws mtex::Error subclasses for failures; the caller maps those to codes.
namespace mtex::cli {

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool resize = false;
};

/// --config file (if any), then every --set, then the seed.
RunConfig load_run_config(const CommonOptions& common);

struct TrainOptions {
  bool diversity_raw = false;
  bool quiet = false;
};
int run_train(const CommonOptions& common, const TrainOptions& options);

struct SynthOptions {
  std::string model;                 // empty: paths.model
  std::vector<std::size_t> textures;  // 1-based
  std::size_t samples = 1;
  std::string out;  // empty: paths.out_dir
};
int run_synth(const CommonOptions& common, const SynthOptions& options);

struct InterpolateOptions {
  std::string model;
  std::size_t from = 0;  // 1-based
  std::size_t to = 0;
  std::size_t steps = 8;
  std::size_t sample = 0;  // which synth noise draw to hold fixed
  std::string out;
};
int run_interpolate(const CommonOptions& common, const InterpolateOptions& options);

struct TransferOptions {
  bool train = false;
  bool quiet = false;
  bool diversity_raw = false;
  double style_weight = 0.0;  // 0 keeps transfer.style_weight
  std::string model;
  std::string content;
  std::size_t style = 0;  // 1-based; 0 when --mix is used
  std::string mix;        // "1:0.5,2:0.5"
  std::size_t samples = 1;
  std::string out;
};
int run_transfer(const CommonOptions& common, const TransferOptions& options);

struct OracleOptions {
  std::string exemplar;   // empty: paths.exemplars[texture - 1]
  std::size_t texture = 1;
  std::string init = "noise";  // or "exemplar"
  std::size_t steps = 500;
  double learning_rate = 0.02;
  std::string out;
};
int run_oracle(const CommonOptions& common, const OracleOptions& options);

struct CheckOptions {
  std::size_t trials = 10;
};
int run_gradcheck(const CommonOptions& common, const CheckOptions& options);

/// Names of the files each command writes, shared with the tests.
std::string synth_file_name(std::size_t texture, std::uint64_t seed, std::size_t sample);
std::string interpolate_file_name(std::size_t from, std::size_t to, std::uint64_t seed,
                                  std::size_t step);

}  // namespace mtex::cli
