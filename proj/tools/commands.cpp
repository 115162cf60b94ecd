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

#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <system_error>
#include <utility>

#include "mtex/curriculum.hpp"
#include "mtex/error.hpp"
#include "mtex/exemplars.hpp"
#include "mtex/gradcheck.hpp"
#include "mtex/image.hpp"
#include "mtex/style_transfer.hpp"
#include "mtex/weight_file.hpp"

namespace mtex::cli {

namespace {

namespace fs = std::filesystem;

// Writes every file or none: on failure the files already written are
// removed before the error propagates.
void write_all(const std::vector<std::pair<fs::path, std::string>>& files) {
  std::vector<fs::path> done;
  try {
    for (const auto& [path, bytes] : files) {
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      write_file_atomic(path, bytes);
      done.push_back(path);
    }
  } catch (...) {
    std::error_code ignored;
    for (const auto& p : done) fs::remove(p, ignored);
    throw;
  }
}

fs::path out_dir(const RunConfig& config, const std::string& flag) {
  return flag.empty() ? config.paths.out_dir : fs::path(flag);
}

fs::path model_path(const RunConfig& config, const std::string& flag) {
  return flag.empty() ? config.paths.model : fs::path(flag);
}

std::size_t to_index(std::size_t one_based, std::size_t count, const char* what) {
  if (one_based == 0 || one_based > count) {
    throw ConfigError(std::string(what) + " " + std::to_string(one_based) + " is out of range 1.." +
                      std::to_string(count));
  }
  return one_based - 1;
}

void print_progress(const LossRecord& r, std::size_t total) {
  if ((r.iteration + 1) % 100 != 0 && r.iteration + 1 != total) return;
  std::fprintf(stderr, "iter %zu/%zu texture %zu l_texture %.6g l_diversity %.6g total %.6g",
               r.iteration + 1, total, r.texture + 1, r.l_texture, r.l_diversity, r.total);
  if (r.l_content) std::fprintf(stderr, " l_content %.6g", *r.l_content);
  std::fputc('\n', stderr);
}

std::vector<std::pair<std::size_t, double>> parse_mix(const std::string& text, std::size_t styles) {
  std::vector<std::pair<std::size_t, double>> pairs;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("--mix entries are style:weight, got '" + item + "'");
    std::size_t style = 0;
    double weight = 0.0;
    try {
      style = std::stoul(item.substr(0, colon));
      weight = std::stod(item.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("--mix entry '" + item + "' is not style:weight");
    }
    pairs.emplace_back(to_index(style, styles, "style"), weight);
  }
  if (pairs.empty()) throw ConfigError("--mix needs at least one style:weight entry");
  return pairs;
}

}  // namespace

std::string synth_file_name(std::size_t texture, std::uint64_t seed, std::size_t sample) {
  return "tex" + std::to_string(texture) + "_s" + std::to_string(seed) + "_" +
         std::to_string(sample) + ".png";
}

std::string interpolate_file_name(std::size_t from, std::size_t to, std::uint64_t seed,
                                  std::size_t step) {
  return "interp" + std::to_string(from) + "to" + std::to_string(to) + "_s" +
         std::to_string(seed) + "_" + std::to_string(step) + ".png";
}

RunConfig load_run_config(const CommonOptions& common) {
  RunConfig config = common.config.empty() ? RunConfig{} : RunConfig::load(common.config);
  for (const auto& o : common.overrides) config.apply_override(o);
  config.seed = common.seed;
  return config;
}

int run_train(const CommonOptions& common, const TrainOptions& options) {
  RunConfig config = load_run_config(common);
  if (options.diversity_raw) config.train.diversity_scale = DiversityScale::kRaw;
  if (config.paths.exemplars.empty()) {
    throw ConfigError("paths.exemplars is empty; list the exemplar images to train on");
  }
  config.resolve();
  const std::size_t size = config.synthesis.output_size();
  std::vector<Tensor<float>> exemplars;
  for (const auto& spec : config.paths.exemplars)
    exemplars.push_back(load_exemplar(spec, size, common.resize));
  const Extractor<float> extractor(config.extractor);
  const std::size_t total = config.train.resolved_iterations(config.synthesis.textures);
  ProgressFn progress;
  if (!options.quiet) progress = [total](const LossRecord& r) { print_progress(r, total); };
  const TrainResult result = train(exemplars, config.synthesis, extractor, config.train, progress);
  write_all({{config.paths.model, encode_model(to_model_file(result.params))},
             {config.paths.log, result.log.to_csv()}});
  std::printf("wrote %s and %s\n", config.paths.model.string().c_str(),
              config.paths.log.string().c_str());
  return 0;
}

int run_synth(const CommonOptions& common, const SynthOptions& options) {
  const RunConfig config = load_run_config(common);
  if (options.textures.empty()) throw ConfigError("synth needs at least one --texture");
  if (options.samples == 0) throw ConfigError("--samples must be positive");
  const GeneratorParams<float> params = load_generator(model_path(config, options.model));
  const SynthesisConfig& sc = params.config;
  const fs::path dir = out_dir(config, options.out);

  // Sample k always uses the k-th draw of the seed's synth stream, so the
  // same (seed, k) gives the same noise for every texture and for interpolate.
  Rng noise_rng = Rng(config.seed).child("synth");
  const Tensor<float> noise = sample_noise<float>(options.samples, sc.noise_dim, noise_rng);

  std::vector<std::pair<fs::path, std::string>> files;
  for (std::size_t texture : options.textures) {
    const std::size_t index = to_index(texture, sc.textures, "texture");
    for (std::size_t k = 0; k < options.samples; ++k) {
      const auto row = noise.data().subspan(k * sc.noise_dim, sc.noise_dim);
      const Tensor<float> z({sc.noise_dim}, std::vector<float>(row.begin(), row.end()));
      const Tensor<float> image = generate(params, SelectionUnit::one_hot(sc.textures, index), z);
      files.emplace_back(dir / synth_file_name(texture, config.seed, k),
                         encode_png(denormalize(image)));
    }
  }
  write_all(files);
  std::printf("wrote %zu images to %s\n", files.size(), dir.string().c_str());
  return 0;
}

int run_interpolate(const CommonOptions& common, const InterpolateOptions& options) {
  const RunConfig config = load_run_config(common);
  const GeneratorParams<float> params = load_generator(model_path(config, options.model));
  const SynthesisConfig& sc = params.config;
  const std::size_t from = to_index(options.from, sc.textures, "--from texture");
  const std::size_t to = to_index(options.to, sc.textures, "--to texture");
  if (from == to) throw ConfigError("--from and --to must name different textures");
  if (options.steps < 2) throw ConfigError("--steps must be at least 2");
  const fs::path dir = out_dir(config, options.out);

  Rng noise_rng = Rng(config.seed).child("synth");
  const Tensor<float> noise = sample_noise<float>(options.sample + 1, sc.noise_dim, noise_rng);
  const auto row = noise.data().subspan(options.sample * sc.noise_dim, sc.noise_dim);
  const Tensor<float> z({sc.noise_dim}, std::vector<float>(row.begin(), row.end()));

  std::vector<std::pair<fs::path, std::string>> files;
  for (std::size_t k = 0; k < options.steps; ++k) {
    const double w = static_cast<double>(k) / static_cast<double>(options.steps - 1);
    const SelectionUnit selection = interpolate_selection(sc.textures, {{from, 1.0 - w}, {to, w}});
    files.emplace_back(dir / interpolate_file_name(options.from, options.to, config.seed, k),
                       encode_png(denormalize(generate(params, selection, z))));
  }
  write_all(files);
  std::printf("wrote %zu images to %s\n", files.size(), dir.string().c_str());
  return 0;
}

int run_transfer(const CommonOptions& common, const TransferOptions& options) {
  RunConfig config = load_run_config(common);
  if (options.diversity_raw) config.transfer_train.diversity_scale = DiversityScale::kRaw;
  if (options.style_weight != 0.0) config.transfer_train.style_weight = options.style_weight;

  if (options.train) {
    if (config.paths.styles.empty()) throw ConfigError("paths.styles is empty");
    if (config.paths.contents.empty()) throw ConfigError("paths.contents is empty");
    config.resolve();
    std::vector<Tensor<float>> styles, contents;
    for (const auto& s : config.paths.styles) styles.push_back(load_exemplar(s, 0, false));
    for (const auto& c : config.paths.contents) contents.push_back(load_exemplar(c, 0, false));
    const Extractor<float> extractor(config.extractor);
    const std::size_t total = config.transfer_train.resolved_iterations(config.transfer.styles);
    ProgressFn progress;
    if (!options.quiet) progress = [total](const LossRecord& r) { print_progress(r, total); };
    const TransferResult result = train_transfer(styles, contents, config.transfer, extractor,
                                                 config.transfer_train, progress);
    const fs::path model = model_path(config, options.model);
    write_all({{model, encode_model(to_model_file(result.params))},
               {config.paths.log, result.log.to_csv()}});
    std::printf("wrote %s and %s\n", model.string().c_str(), config.paths.log.string().c_str());
    return 0;
  }

  if (options.content.empty()) throw ConfigError("transfer needs --content (or --train)");
  if (options.samples == 0) throw ConfigError("--samples must be positive");
  const TransferParams<float> params = load_transfer(model_path(config, options.model));
  const std::size_t styles = params.config.styles;
  std::vector<std::pair<std::size_t, double>> pairs;
  std::string tag;
  if (!options.mix.empty()) {
    if (options.style != 0) throw ConfigError("use either --style or --mix, not both");
    pairs = parse_mix(options.mix, styles);
    tag = "mix";
  } else {
    if (options.style == 0) throw ConfigError("transfer needs --style or --mix");
    pairs = {{to_index(options.style, styles, "style"), 1.0}};
    tag = "style" + std::to_string(options.style);
  }
  Tensor<float> content = load_exemplar(options.content, 0, false);
  const std::size_t stride = params.config.stride();
  if (common.resize && (content.dim(1) % stride != 0 || content.dim(2) % stride != 0)) {
    const std::size_t h = content.dim(1) / stride * stride, w = content.dim(2) / stride * stride;
    if (h == 0 || w == 0) throw ShapeError("content image is smaller than the encoder stride");
    content = normalize(resize_box(denormalize(content), w, h));
  }
  const fs::path dir = out_dir(config, options.out);
  Rng rng = Rng(config.seed).child("transfer-noise");
  std::vector<std::pair<fs::path, std::string>> files;
  for (std::size_t k = 0; k < options.samples; ++k) {
    const Tensor<float> out = interpolate_styles(params, content, pairs, rng);
    files.emplace_back(dir / (tag + "_s" + std::to_string(config.seed) + "_" + std::to_string(k) + ".png"),
                       encode_png(denormalize(out)));
  }
  write_all(files);
  std::printf("wrote %zu images to %s\n", files.size(), dir.string().c_str());
  return 0;
}

int run_oracle(const CommonOptions& common, const OracleOptions& options) {
  const RunConfig config = load_run_config(common);
  std::string spec = options.exemplar;
  if (spec.empty()) {
    if (config.paths.exemplars.empty()) throw ConfigError("oracle needs --exemplar or paths.exemplars");
    spec = config.paths.exemplars[to_index(options.texture, config.paths.exemplars.size(), "texture")];
  }
  const std::size_t size = common.resize ? config.synthesis.output_size() : 0;
  const Tensor<float> exemplar =
      load_exemplar(spec, size, common.resize);
  const Extractor<float> extractor(config.extractor);
  const auto target = make_texture_target(extractor, exemplar, config.train.texture_taps);
  Tensor<float> init;
  if (options.init == "noise") {
    Rng rng = Rng(config.seed).child("oracle-init");
    init = rng.uniform_tensor<float>(exemplar.shape(), -1.0, 1.0);
  } else if (options.init == "exemplar") {
    init = exemplar;
  } else {
    throw ConfigError("--init must be noise or exemplar, got '" + options.init + "'");
  }
  const PixelOptimizeResult result = pixel_optimize(extractor, target, std::move(init), options.steps,
                                                    options.learning_rate, config.train.layer_weights);
  std::string trace = "step,loss\n";
  for (std::size_t s = 0; s < result.losses.size(); ++s) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", s, result.losses[s]);
    trace += buf;
  }
  const fs::path dir = out_dir(config, options.out);
  const std::string stem = "oracle_s" + std::to_string(config.seed);
  write_all({{dir / (stem + ".png"), encode_png(denormalize(result.image))},
             {dir / (stem + ".csv"), trace}});
  std::printf("loss %.6g -> %.6g; wrote %s\n", result.losses.front(), result.losses.back(),
              (dir / (stem + ".png")).string().c_str());
  return 0;
}

int run_gradcheck(const CommonOptions& common, const CheckOptions& options) {
  GradCheckOptions gc;
  gc.seed = common.seed;
  gc.trials = options.trials;
  bool all = true;
  mtex::run_gradcheck(gc, [&all](const GradCheckResult& r) {
    all = all && r.passed();
    std::printf("%-34s %s  max_rel_err %.3e  tol %.0e  trials %zu  coords %zu", r.name.c_str(),
                r.passed() ? "PASS" : "FAIL", r.error.max_error, r.tolerance, r.trials,
                r.error.probed);
    if (r.error.skipped != 0) std::printf("  kink_skipped %zu", r.error.skipped);
    std::printf("\n");
    std::fflush(stdout);
  });
  std::printf("%s\n", all ? "gradcheck: all checks passed" : "gradcheck: FAILURES");
  return all ? 0 : 2;
}

}  // namespace mtex::cli
