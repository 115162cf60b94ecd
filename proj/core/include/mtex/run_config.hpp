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
#include <string>
#include <vector>

#include "mtex/curriculum.hpp"
#include "mtex/generator.hpp"
#include "mtex/loss_network.hpp"
#include "mtex/style_transfer.hpp"

namespace mtex {

struct RunPaths {
  std::vector<std::string> exemplars;  // PNG paths or builtin:<name>[:<size>]
  std::vector<std::string> styles;
  std::vector<std::string> contents;
  std::filesystem::path model = "model.mtxm";
  std::filesystem::path log = "loss.csv";
  std::filesystem::path out_dir = ".";
  std::filesystem::path checkpoint_dir;
};

/// Plain-text run description: one `section.key = value` per line, `#`
/// starts a comment, lists are comma separated. Unknown keys are errors.
struct RunConfig {
  SynthesisConfig synthesis;
  ExtractorConfig extractor;
  TrainConfig train;
  TransferConfig transfer;
  TransferTrainConfig transfer_train;
  RunPaths paths;
  std::uint64_t seed = 0;

  /// Assigns one key. Throws ConfigError naming the key on unknown keys or
  /// unparsable values.
  void set(const std::string& key, const std::string& value);
  /// `section.key=value`, as given to --set.
  void apply_override(const std::string& assignment);

  /// Every key with its current value, in documentation order. parse() of
  /// this text reproduces the configuration.
  std::string dump() const;
  static const std::vector<std::string>& keys();

  /// Throws ConfigError with the 1-based line number on malformed lines.
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);

  /// Propagates the master seed and the exemplar/style counts into the
  /// per-component configs, then validates them.
  void resolve();
};

}  // namespace mtex
