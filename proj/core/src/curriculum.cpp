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

#include "mtex/curriculum.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "mtex/error.hpp"
#include "mtex/ops.hpp"
#include "mtex/weight_file.hpp"

namespace mtex {

const char* to_string(ScheduleMode mode) {
  return mode == ScheduleMode::kIncremental ? "incremental" : "random";
}

ScheduleMode parse_schedule_mode(const std::string& text) {
  if (text == "incremental") return ScheduleMode::kIncremental;
  if (text == "random") return ScheduleMode::kRandom;
  throw ConfigError("unknown schedule mode '" + text + "' (expected incremental or random)");
}

std::size_t Schedule::random_phase_start() const {
  return mode == ScheduleMode::kIncremental ? textures * phase_iters : 0;
}

std::size_t Schedule::texture_at(std::size_t iteration) const {
  if (textures == 0) throw ConfigError("schedule needs at least one texture");
  if (iteration < random_phase_start()) {
    const std::size_t introduced = iteration / phase_iters + 1;
    const std::size_t offset = iteration - (introduced - 1) * phase_iters;
    return offset % introduced;
  }
  Rng draw = Rng(seed).child("schedule").child(static_cast<std::uint64_t>(iteration));
  return draw.index(textures);
}

std::size_t Schedule::introduction(std::size_t texture) const {
  return mode == ScheduleMode::kIncremental ? texture * phase_iters : 0;
}

std::size_t TrainConfig::resolved_iterations(std::size_t textures) const {
  return iterations != 0 ? iterations : 3 * textures * phase_iters;
}

void TrainConfig::validate() const {
  if (phase_iters == 0) throw ConfigError("train.phase_iters must be positive");
  if (batch == 0) throw ConfigError("train.batch must be positive");
  if (beta != 0.0 && batch < 2) {
    throw ConfigError("train.batch must be >= 2 when train.beta != 0 (diversity loss needs pairs)");
  }
  if (!(learning_rate >= 0.0)) throw ConfigError("train.learning_rate must be >= 0");
  if (texture_taps.empty()) throw ConfigError("train.texture_taps must name at least one tap");
  if (!layer_weights.empty() && layer_weights.size() != texture_taps.size()) {
    throw ConfigError("train.layer_weights has " + std::to_string(layer_weights.size()) +
                      " entries for " + std::to_string(texture_taps.size()) + " texture taps");
  }
  if (checkpoint_every != 0 && checkpoint_dir.empty()) {
    throw ConfigError("train.checkpoint_every needs paths.checkpoint_dir");
  }
}

void LossLog::append(const LossRecord& record) {
  if (!records_.empty() && record.iteration <= records_.back().iteration) {
    throw Error("loss log iterations must increase (got " + std::to_string(record.iteration) +
                " after " + std::to_string(records_.back().iteration) + ")");
  }
  if (with_content_ != record.l_content.has_value()) {
    throw Error("loss record content column does not match log schema");
  }
  records_.push_back(record);
}

namespace {

void append_real(std::string& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

template <typename Number>
Number parse_field(const std::string& field, std::size_t line) {
  Number value{};
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw FormatError("bad loss log field '" + field + "' on line " + std::to_string(line), 0);
  }
  return value;
}

}  // namespace

std::string LossLog::to_csv() const {
  std::string out = "iter,texture,l_texture,l_diversity,total";
  if (with_content_) out += ",l_content";
  out += '\n';
  for (const auto& r : records_) {
    out += std::to_string(r.iteration);
    out += ',';
    out += std::to_string(r.texture + 1);
    out += ',';
    append_real(out, r.l_texture);
    out += ',';
    append_real(out, r.l_diversity);
    out += ',';
    append_real(out, r.total);
    if (with_content_) {
      out += ',';
      append_real(out, *r.l_content);
    }
    out += '\n';
  }
  return out;
}

LossLog LossLog::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty loss log", 0);
  bool content = false;
  if (line == "iter,texture,l_texture,l_diversity,total,l_content") {
    content = true;
  } else if (line != "iter,texture,l_texture,l_diversity,total") {
    throw FormatError("unexpected loss log header '" + line + "'", 0);
  }
  LossLog log(content);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != (content ? 6u : 5u)) {
      throw FormatError("wrong field count on loss log line " + std::to_string(line_no), 0);
    }
    LossRecord r;
    r.iteration = parse_field<std::size_t>(fields[0], line_no);
    const auto texture = parse_field<std::size_t>(fields[1], line_no);
    if (texture == 0) throw FormatError("texture ids in loss logs are 1-based", 0);
    r.texture = texture - 1;
    r.l_texture = parse_field<double>(fields[2], line_no);
    r.l_diversity = parse_field<double>(fields[3], line_no);
    r.total = parse_field<double>(fields[4], line_no);
    if (content) r.l_content = parse_field<double>(fields[5], line_no);
    log.append(r);
  }
  return log;
}

void LossLog::save(const std::filesystem::path& path) const { write_file_atomic(path, to_csv()); }

LossLog LossLog::load(const std::filesystem::path& path) { return from_csv(read_file_bytes(path)); }

template <typename T>
std::vector<TextureTarget<T>> precompute_targets(const Extractor<T>& extractor,
                                                 const std::vector<Tensor<T>>& exemplars,
                                                 const std::vector<std::string>& taps,
                                                 std::size_t size) {
  std::vector<TextureTarget<T>> targets;
  for (std::size_t k = 0; k < exemplars.size(); ++k) {
    const Shape expected{3, size, size};
    if (exemplars[k].shape() != expected) {
      throw ShapeError("exemplar " + std::to_string(k + 1) + " has shape " +
                       shape_to_string(exemplars[k].shape()) + ", expected " +
                       shape_to_string(expected) + " (resize it first)");
    }
    targets.push_back(make_texture_target(extractor, exemplars[k], taps, k));
  }
  return targets;
}

template std::vector<TextureTarget<float>> precompute_targets(
    const Extractor<float>&, const std::vector<Tensor<float>>&, const std::vector<std::string>&,
    std::size_t);
template std::vector<TextureTarget<double>> precompute_targets(
    const Extractor<double>&, const std::vector<Tensor<double>>&, const std::vector<std::string>&,
    std::size_t);

Trainer::Trainer(GeneratorParams<float> params, const Extractor<float>& extractor,
                 std::vector<TextureTarget<float>> targets, TrainConfig config)
    : params_(std::move(params)),
      extractor_(&extractor),
      targets_(std::move(targets)),
      config_(std::move(config)),
      optimizer_(AdamConfig{config_.learning_rate}, params_.tensors),
      noise_rng_(Rng(config_.seed).child("noise")),
      derangement_rng_(Rng(config_.seed).child("derangement")) {
  config_.validate();
  params_.config.validate();
  if (targets_.size() != params_.config.textures) {
    throw ConfigError(std::to_string(targets_.size()) + " texture targets for a network of " +
                      std::to_string(params_.config.textures) + " textures");
  }
  for (const auto& t : targets_) {
    if (t.taps() != config_.texture_taps) {
      throw ConfigError("texture targets do not cover the configured texture taps");
    }
  }
  taps_ = config_.texture_taps;
  if (std::find(taps_.begin(), taps_.end(), config_.diversity_tap) == taps_.end()) {
    taps_.push_back(config_.diversity_tap);
  }
}

LossRecord Trainer::step(std::size_t iteration, std::size_t texture) {
  const SynthesisConfig& sc = params_.config;
  if (texture >= sc.textures) {
    throw ConfigError("texture index " + std::to_string(texture) + " out of range");
  }
  const std::size_t n = config_.batch;
  Tape<float> tape;
  const BoundParams<float> bound(tape, params_.tensors, true);
  const Var<float> selection =
      tape.constant(SelectionUnit::one_hot(sc.textures, texture).to_tensor<float>());
  const Var<float> noise = tape.constant(sample_noise<float>(n, sc.noise_dim, noise_rng_));
  const Var<float> images = generate(sc, bound, selection, noise, config_.use_selector);
  const FeatureVars<float> feats = extractor_->extract(tape, images, taps_);

  Var<float> texture_sum;
  std::vector<Var<float>> diversity_feats;
  for (std::size_t i = 0; i < n; ++i) {
    FeatureVars<float> sample;
    for (const auto& tap : config_.texture_taps) sample.emplace(tap, slice_batch(feats.at(tap), i));
    const Var<float> term = texture_loss(targets_[texture], sample, config_.layer_weights);
    texture_sum = texture_sum.valid() ? add(texture_sum, term) : term;
    diversity_feats.push_back(slice_batch(feats.at(config_.diversity_tap), i));
  }
  const Var<float> l_texture = scale(texture_sum, 1.0 / static_cast<double>(n));
  const Var<float> l_diversity =
      n >= 2 ? diversity_loss(diversity_feats, derangement_rng_, config_.diversity_scale)
             : tape.constant(Tensor<float>::scalar(0.0f));
  const Var<float> total = total_loss(l_texture, l_diversity, config_.alpha, config_.beta);
  tape.backward(total);
  optimizer_.step(params_.tensors, bound.gradients());

  LossRecord r;
  r.iteration = iteration;
  r.texture = texture;
  r.l_texture = l_texture.value().item();
  r.l_diversity = l_diversity.value().item();
  r.total = total.value().item();
  return r;
}

TrainResult train(const std::vector<Tensor<float>>& exemplars, const SynthesisConfig& synthesis,
                  const Extractor<float>& extractor, const TrainConfig& config,
                  const ProgressFn& progress) {
  config.validate();
  synthesis.validate();
  if (exemplars.empty()) throw ConfigError("training needs at least one exemplar");
  if (exemplars.size() != synthesis.textures) {
    throw ConfigError(std::to_string(exemplars.size()) + " exemplars for a network of " +
                      std::to_string(synthesis.textures) + " textures");
  }
  auto targets =
      precompute_targets(extractor, exemplars, config.texture_taps, synthesis.output_size());
  Rng init_rng = Rng(config.seed).child("generator-init");
  Trainer trainer(init_generator<float>(synthesis, init_rng), extractor, std::move(targets),
                  config);
  const Schedule schedule{config.mode, config.phase_iters, synthesis.textures, config.seed};
  LossLog log;
  const std::size_t iterations = config.resolved_iterations(synthesis.textures);
  for (std::size_t it = 0; it < iterations; ++it) {
    const LossRecord r = trainer.step(it, schedule.texture_at(it));
    log.append(r);
    if (progress) progress(r);
    if (config.checkpoint_every != 0 && (it + 1) % config.checkpoint_every == 0) {
      std::filesystem::create_directories(config.checkpoint_dir);
      save_generator(trainer.params(),
                     config.checkpoint_dir / ("checkpoint_" + std::to_string(it + 1) + ".mtxm"));
    }
  }
  return {trainer.params(), std::move(log)};
}

double evaluate_texture_loss(const Extractor<float>& extractor, const TextureTarget<float>& target,
                             const Tensor<float>& image, std::span<const double> layer_weights) {
  Tape<float> tape;
  const auto feats = extractor.extract(tape, tape.constant(image), target.taps());
  return texture_loss(target, feats, layer_weights).value().item();
}

PixelOptimizeResult pixel_optimize(const Extractor<float>& extractor,
                                   const TextureTarget<float>& target, Tensor<float> init,
                                   std::size_t steps, double learning_rate,
                                   std::span<const double> layer_weights) {
  if (init.rank() != 3 || init.dim(0) != 3) {
    throw ShapeError("pixel_optimize: init must be (3,H,W), got " + shape_to_string(init.shape()));
  }
  ParamSet<float> pixels;
  pixels.add("image", std::move(init));
  Adam<float> optimizer(AdamConfig{learning_rate}, pixels);
  const auto taps = target.taps();
  PixelOptimizeResult result;
  for (std::size_t s = 0; s <= steps; ++s) {
    Tape<float> tape;
    const BoundParams<float> bound(tape, pixels, true);
    const auto feats = extractor.extract(tape, bound["image"], taps);
    const Var<float> loss = texture_loss(target, feats, layer_weights);
    result.losses.push_back(loss.value().item());
    if (s == steps) break;
    tape.backward(loss);
    optimizer.step(pixels, bound.gradients());
    for (auto& v : pixels.get("image").data()) v = std::clamp(v, -1.0f, 1.0f);
  }
  result.image = pixels.get("image");
  return result;
}

}  // namespace mtex
