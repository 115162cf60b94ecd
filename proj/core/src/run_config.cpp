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

#include "mtex/run_config.hpp"

#include <charconv>
#include <functional>
#include <sstream>
#include <type_traits>

#include "mtex/error.hpp"
#include "mtex/weight_file.hpp"

namespace mtex {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename Number>
Number parse_number(const std::string& key, const std::string& text) {
  Number v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError("bad value '" + text + "' for " + key);
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("bad value '" + text + "' for " + key + " (expected true or false)");
}

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  if (trim(text).empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

template <typename Number>
std::vector<Number> parse_numbers(const std::string& key, const std::string& text) {
  std::vector<Number> out;
  for (const auto& item : split(text)) out.push_back(parse_number<Number>(key, item));
  return out;
}

std::string real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string join(const std::vector<T>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i != 0) out += ", ";
    if constexpr (std::is_same_v<T, std::string>) {
      out += items[i];
    } else if constexpr (std::is_floating_point_v<T>) {
      out += real(items[i]);
    } else {
      out += std::to_string(items[i]);
    }
  }
  return out;
}

const char* scale_name(DiversityScale s) {
  switch (s) {
    case DiversityScale::kPerElement: return "per_element";
    case DiversityScale::kPerPosition: return "per_position";
    case DiversityScale::kRaw: return "raw";
  }
  return "per_position";
}

DiversityScale parse_scale(const std::string& key, const std::string& text) {
  if (text == "per_element") return DiversityScale::kPerElement;
  if (text == "per_position") return DiversityScale::kPerPosition;
  if (text == "raw") return DiversityScale::kRaw;
  throw ConfigError("bad value '" + text + "' for " + key +
                    " (expected per_element, per_position or raw)");
}

struct Field {
  const char* key;
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

// Binders from a member pointer path to a Field.
template <typename Get>
Field size_field(const char* key, Get member) {
  return {key,
          [member](RunConfig& c, const std::string& k, const std::string& v) {
            member(c) = parse_number<std::size_t>(k, v);
          },
          [member](const RunConfig& c) { return std::to_string(member(c)); }};
}

template <typename Get>
Field real_field(const char* key, Get member) {
  return {key,
          [member](RunConfig& c, const std::string& k, const std::string& v) {
            member(c) = parse_number<double>(k, v);
          },
          [member](const RunConfig& c) { return real(member(c)); }};
}

template <typename Get>
Field sizes_field(const char* key, Get member) {
  return {key,
          [member](RunConfig& c, const std::string& k, const std::string& v) {
            member(c) = parse_numbers<std::size_t>(k, v);
          },
          [member](const RunConfig& c) { return join(member(c)); }};
}

template <typename Get>
Field reals_field(const char* key, Get member) {
  return {key,
          [member](RunConfig& c, const std::string& k, const std::string& v) {
            member(c) = parse_numbers<double>(k, v);
          },
          [member](const RunConfig& c) { return join(member(c)); }};
}

template <typename Get>
Field strings_field(const char* key, Get member) {
  return {key, [member](RunConfig& c, const std::string&, const std::string& v) { member(c) = split(v); },
          [member](const RunConfig& c) { return join(member(c)); }};
}

template <typename Get>
Field string_field(const char* key, Get member) {
  return {key, [member](RunConfig& c, const std::string&, const std::string& v) { member(c) = v; },
          [member](const RunConfig& c) { return std::string(member(c)); }};
}

template <typename Get>
Field path_field(const char* key, Get member) {
  return {key, [member](RunConfig& c, const std::string&, const std::string& v) { member(c) = v; },
          [member](const RunConfig& c) { return member(c).string(); }};
}

template <typename Get>
Field bool_field(const char* key, Get member) {
  return {key,
          [member](RunConfig& c, const std::string& k, const std::string& v) {
            member(c) = parse_bool(k, v);
          },
          [member](const RunConfig& c) {
            return std::string(member(c) ? "true" : "false");
          }};
}

template <typename Get>
Field mode_field(const char* key, Get member) {
  return {key,
          [member](RunConfig& c, const std::string&, const std::string& v) {
            member(c) = parse_schedule_mode(v);
          },
          [member](const RunConfig& c) {
            return std::string(to_string(member(c)));
          }};
}

template <typename Get>
Field scale_field(const char* key, Get member) {
  return {key,
          [member](RunConfig& c, const std::string& k, const std::string& v) {
            member(c) = parse_scale(k, v);
          },
          [member](const RunConfig& c) {
            return std::string(scale_name(member(c)));
          }};
}

#define MTEX_MEMBER(expr) [](auto& c) -> auto& { return c.expr; }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"run.seed",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.seed = parse_number<std::uint64_t>(k, v);
       },
       [](const RunConfig& c) { return std::to_string(c.seed); }},

      size_field("synthesis.textures", MTEX_MEMBER(synthesis.textures)),
      size_field("synthesis.embed_dim", MTEX_MEMBER(synthesis.embed_dim)),
      size_field("synthesis.noise_dim", MTEX_MEMBER(synthesis.noise_dim)),
      size_field("synthesis.base_size", MTEX_MEMBER(synthesis.base_size)),
      size_field("synthesis.scales", MTEX_MEMBER(synthesis.scales)),
      size_field("synthesis.seed_channels", MTEX_MEMBER(synthesis.seed_channels)),
      sizes_field("synthesis.scale_channels", MTEX_MEMBER(synthesis.scale_channels)),
      size_field("synthesis.guidance_channels", MTEX_MEMBER(synthesis.guidance_channels)),

      sizes_field("extractor.stage_channels", MTEX_MEMBER(extractor.stage_channels)),
      sizes_field("extractor.convs_per_stage", MTEX_MEMBER(extractor.convs_per_stage)),
      strings_field("extractor.taps", MTEX_MEMBER(extractor.taps)),
      {"extractor.seed",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.extractor.seed = parse_number<std::uint64_t>(k, v);
       },
       [](const RunConfig& c) { return std::to_string(c.extractor.seed); }},
      {"extractor.weights",
       [](RunConfig& c, const std::string&, const std::string& v) {
         if (v.empty()) {
           c.extractor.weight_file.reset();
         } else {
           c.extractor.weight_file = v;
         }
       },
       [](const RunConfig& c) {
         return c.extractor.weight_file ? c.extractor.weight_file->string() : std::string();
       }},

      size_field("train.iterations", MTEX_MEMBER(train.iterations)),
      size_field("train.phase_iters", MTEX_MEMBER(train.phase_iters)),
      size_field("train.batch", MTEX_MEMBER(train.batch)),
      real_field("train.learning_rate", MTEX_MEMBER(train.learning_rate)),
      real_field("train.alpha", MTEX_MEMBER(train.alpha)),
      real_field("train.beta", MTEX_MEMBER(train.beta)),
      mode_field("train.mode", MTEX_MEMBER(train.mode)),
      bool_field("train.use_selector", MTEX_MEMBER(train.use_selector)),
      scale_field("train.diversity_scale", MTEX_MEMBER(train.diversity_scale)),
      strings_field("train.texture_taps", MTEX_MEMBER(train.texture_taps)),
      string_field("train.diversity_tap", MTEX_MEMBER(train.diversity_tap)),
      reals_field("train.layer_weights", MTEX_MEMBER(train.layer_weights)),
      size_field("train.checkpoint_every", MTEX_MEMBER(train.checkpoint_every)),

      size_field("transfer.styles", MTEX_MEMBER(transfer.styles)),
      sizes_field("transfer.encoder_channels", MTEX_MEMBER(transfer.encoder_channels)),
      sizes_field("transfer.decoder_channels", MTEX_MEMBER(transfer.decoder_channels)),
      size_field("transfer.noise_channels", MTEX_MEMBER(transfer.noise_channels)),
      size_field("transfer.iterations", MTEX_MEMBER(transfer_train.iterations)),
      size_field("transfer.phase_iters", MTEX_MEMBER(transfer_train.phase_iters)),
      size_field("transfer.batch", MTEX_MEMBER(transfer_train.batch)),
      real_field("transfer.learning_rate", MTEX_MEMBER(transfer_train.learning_rate)),
      real_field("transfer.content_weight", MTEX_MEMBER(transfer_train.content_weight)),
      real_field("transfer.style_weight", MTEX_MEMBER(transfer_train.style_weight)),
      real_field("transfer.alpha", MTEX_MEMBER(transfer_train.alpha)),
      real_field("transfer.beta", MTEX_MEMBER(transfer_train.beta)),
      mode_field("transfer.mode", MTEX_MEMBER(transfer_train.mode)),
      scale_field("transfer.diversity_scale", MTEX_MEMBER(transfer_train.diversity_scale)),
      strings_field("transfer.style_taps", MTEX_MEMBER(transfer_train.style_taps)),
      string_field("transfer.content_tap", MTEX_MEMBER(transfer_train.content_tap)),
      reals_field("transfer.layer_weights", MTEX_MEMBER(transfer_train.layer_weights)),

      strings_field("paths.exemplars", MTEX_MEMBER(paths.exemplars)),
      strings_field("paths.styles", MTEX_MEMBER(paths.styles)),
      strings_field("paths.contents", MTEX_MEMBER(paths.contents)),
      path_field("paths.model", MTEX_MEMBER(paths.model)),
      path_field("paths.log", MTEX_MEMBER(paths.log)),
      path_field("paths.out_dir", MTEX_MEMBER(paths.out_dir)),
      path_field("paths.checkpoint_dir", MTEX_MEMBER(paths.checkpoint_dir)),
  };
  return table;
}

#undef MTEX_MEMBER

const Field& find_field(const std::string& key) {
  for (const auto& f : fields())
    if (key == f.key) return f;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const Field& f = find_field(key);
  f.set(*this, key, trim(value));
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
  }
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.emplace_back(f.key);
    return out;
  }();
  return names;
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& f : fields()) {
    out += f.key;
    out += " = ";
    out += f.get(*this);
    out += '\n';
  }
  return out;
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected section.key = value");
    }
    try {
      config.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(number) + ": " + e.what());
    }
  }
  return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  try {
    return parse(read_file_bytes(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void RunConfig::resolve() {
  if (!paths.exemplars.empty()) synthesis.textures = paths.exemplars.size();
  if (!paths.styles.empty()) transfer.styles = paths.styles.size();
  train.seed = seed;
  transfer_train.seed = seed;
  train.checkpoint_dir = paths.checkpoint_dir;
  synthesis.validate();
  extractor.validate();
  train.validate();
  transfer.validate();
  transfer_train.validate();
}

}  // namespace mtex
