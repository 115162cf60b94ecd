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

// mtex: train, sample and check multi-texture synthesis networks.
//
// Exit codes: 0 success, 1 user error (bad arguments, config, files or
// shapes), 2 internal error (numeric failure, failed self-check, bug).

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>

#include "commands.hpp"
#include "mtex/error.hpp"

namespace {

using namespace mtex::cli;

void add_common(CLI::App* cmd, CommonOptions& common) {
  cmd->add_option("--config", common.config, "run configuration file (section.key = value)");
  cmd->add_option("--set", common.overrides, "override a config key: section.key=value")
      ->allow_extra_args(false);
  cmd->add_option("--seed", common.seed, "master seed for every random stream")->required();
  cmd->add_flag("--resize", common.resize, "box-resize input images to the network size");
}

int fail(int code, const char* what) {
  std::fprintf(stderr, "mtex: error: %s\n", what);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-texture synthesis: feed-forward generator, style transfer and checks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "mtex 0.1.0");

  CommonOptions common;
  std::function<int()> action;

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "train a generator on paths.exemplars");
  add_common(train_cmd, common);
  train_cmd->add_flag("--diversity-raw", train.diversity_raw, "use the raw L1 diversity term");
  train_cmd->add_flag("--quiet", train.quiet, "suppress progress lines");
  train_cmd->callback([&] { action = [&] { return run_train(common, train); }; });

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "sample textures from a trained generator");
  add_common(synth_cmd, common);
  synth_cmd->add_option("--model", synth.model, "generator model (default paths.model)");
  synth_cmd->add_option("--texture", synth.textures, "texture id, 1-based (repeatable)")->required();
  synth_cmd->add_option("--samples", synth.samples, "noise samples per texture")->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "output directory (default paths.out_dir)");
  synth_cmd->callback([&] { action = [&] { return run_synth(common, synth); }; });

  InterpolateOptions interp;
  auto* interp_cmd = app.add_subcommand("interpolate", "sweep the selection between two textures");
  add_common(interp_cmd, common);
  interp_cmd->add_option("--model", interp.model, "generator model (default paths.model)");
  interp_cmd->add_option("--from", interp.from, "start texture, 1-based")->required();
  interp_cmd->add_option("--to", interp.to, "end texture, 1-based")->required();
  interp_cmd->add_option("--steps", interp.steps, "images in the sweep, endpoints included")
      ->capture_default_str();
  interp_cmd->add_option("--sample", interp.sample, "noise draw to hold fixed (as in synth)")
      ->capture_default_str();
  interp_cmd->add_option("--out", interp.out, "output directory (default paths.out_dir)");
  interp_cmd->callback([&] { action = [&] { return run_interpolate(common, interp); }; });

  TransferOptions transfer;
  auto* transfer_cmd = app.add_subcommand("transfer", "train or apply a multi-style transfer net");
  add_common(transfer_cmd, common);
  transfer_cmd->add_flag("--train", transfer.train, "train on paths.styles and paths.contents");
  transfer_cmd->add_flag("--quiet", transfer.quiet, "suppress progress lines");
  transfer_cmd->add_flag("--diversity-raw", transfer.diversity_raw, "use the raw L1 diversity term");
  transfer_cmd->add_option("--style-weight", transfer.style_weight,
                           "style loss multiplier (default transfer.style_weight)");
  transfer_cmd->add_option("--model", transfer.model, "transfer model (default paths.model)");
  transfer_cmd->add_option("--content", transfer.content, "content image (PNG or builtin:<name>:<size>)");
  transfer_cmd->add_option("--style", transfer.style, "style id, 1-based");
  transfer_cmd->add_option("--mix", transfer.mix, "style mixture, e.g. 1:0.5,2:0.5");
  transfer_cmd->add_option("--samples", transfer.samples, "noise samples")->capture_default_str();
  transfer_cmd->add_option("--out", transfer.out, "output directory (default paths.out_dir)");
  transfer_cmd->callback([&] { action = [&] { return run_transfer(common, transfer); }; });

  OracleOptions oracle;
  auto* oracle_cmd = app.add_subcommand("oracle", "optimize pixels directly against one exemplar");
  add_common(oracle_cmd, common);
  oracle_cmd->add_option("--exemplar", oracle.exemplar, "exemplar image (default paths.exemplars)");
  oracle_cmd->add_option("--texture", oracle.texture, "which paths.exemplars entry, 1-based")
      ->capture_default_str();
  oracle_cmd->add_option("--init", oracle.init, "noise or exemplar")->capture_default_str();
  oracle_cmd->add_option("--steps", oracle.steps, "optimizer steps")->capture_default_str();
  oracle_cmd->add_option("--lr", oracle.learning_rate, "Adam learning rate")->capture_default_str();
  oracle_cmd->add_option("--out", oracle.out, "output directory (default paths.out_dir)");
  oracle_cmd->callback([&] { action = [&] { return run_oracle(common, oracle); }; });

  CheckOptions check;
  auto* check_cmd = app.add_subcommand("gradcheck", "finite-difference check of every gradient");
  add_common(check_cmd, common);
  check_cmd->add_option("--trials", check.trials, "random inputs per check")->capture_default_str();
  check_cmd->callback([&] { action = [&] { return run_gradcheck(common, check); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and --version arrive as parse "errors" with exit code 0.
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail(1, e.what());
  }

  try {
    return action();
  } catch (const mtex::NumericError& e) {
    return fail(2, e.what());
  } catch (const mtex::Error& e) {
    return fail(1, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(1, e.what());
  } catch (const std::exception& e) {
    return fail(2, e.what());
  }
}
