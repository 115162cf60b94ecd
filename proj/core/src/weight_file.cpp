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

#include "mtex/weight_file.hpp"

#include <bit>
#include <fstream>
#include <sstream>
#include <system_error>

#include "mtex/error.hpp"

namespace mtex {

namespace {

constexpr char kWeightMagic[4] = {'M', 'T', 'X', 'W'};
constexpr char kModelMagic[4] = {'M', 'T', 'X', 'M'};
// Guards against absurd allocations from corrupt headers.
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint64_t kMaxTensorElements = std::uint64_t{1} << 31;

class Writer {
 public:
  void bytes(const char* p, std::size_t n) { out_.append(p, n); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void i64(std::int64_t v) {
    const auto u = static_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t offset) : bytes_(bytes), pos_(offset) {}

  std::size_t pos() const { return pos_; }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() < pos_ || bytes_.size() - pos_ < n) {
      throw FormatError(std::string("truncated weight data while reading ") + what, pos_);
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::int64_t i64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return static_cast<std::int64_t>(v);
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void magic(const char (&expected)[4], const char* what) {
    need(4, what);
    if (bytes_.compare(pos_, 4, expected, 4) != 0) {
      throw FormatError(std::string("bad magic bytes for ") + what, pos_);
    }
    pos_ += 4;
  }

 private:
  const std::string& bytes_;
  std::size_t pos_;
};

void write_weight_block(Writer& w, const ParamSet<float>& weights) {
  w.bytes(kWeightMagic, 4);
  w.u32(kWeightFormatVersion);
  w.u32(static_cast<std::uint32_t>(weights.size()));
  for (const auto& e : weights.entries()) {
    w.str(e.name);
    w.u32(static_cast<std::uint32_t>(e.value.rank()));
    for (std::size_t d : e.value.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : e.value.data()) w.f32(v);
  }
}

}  // namespace

std::int64_t ModelFile::config_value(const std::string& key) const {
  for (const auto& [k, v] : config)
    if (k == key) return v;
  throw FormatError("model file lacks config key '" + key + "'", 0);
}

std::string encode_weights(const ParamSet<float>& weights) {
  Writer w;
  write_weight_block(w, weights);
  return w.take();
}

ParamSet<float> decode_weights(const std::string& bytes, std::size_t& offset) {
  Reader r(bytes, offset);
  r.magic(kWeightMagic, "weight block");
  const std::size_t version_at = r.pos();
  const std::uint32_t version = r.u32("version");
  if (version != kWeightFormatVersion) {
    throw FormatError("unsupported weight format version " + std::to_string(version),
                      version_at);
  }
  const std::uint32_t count = r.u32("tensor count");
  ParamSet<float> out;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::size_t entry_at = r.pos();
    std::string name = r.str("tensor name");
    const std::uint32_t rank = r.u32("tensor rank");
    if (rank > kMaxRank) {
      throw FormatError("tensor '" + name + "' has implausible rank " + std::to_string(rank),
                        entry_at);
    }
    Shape shape;
    std::uint64_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape.push_back(r.u32("tensor dimension"));
      numel *= shape.back();
      if (numel > kMaxTensorElements) {
        throw FormatError("tensor '" + name + "' is implausibly large", entry_at);
      }
    }
    r.need(numel * 4, "tensor data");
    std::vector<float> data(numel);
    for (auto& v : data) v = r.f32("tensor data");
    if (out.contains(name)) throw FormatError("duplicate tensor '" + name + "'", entry_at);
    out.add(std::move(name), Tensor<float>(std::move(shape), std::move(data)));
  }
  offset = r.pos();
  return out;
}

std::string encode_model(const ModelFile& model) {
  Writer w;
  w.bytes(kModelMagic, 4);
  w.u32(kWeightFormatVersion);
  w.str(model.kind);
  w.u32(static_cast<std::uint32_t>(model.config.size()));
  for (const auto& [k, v] : model.config) {
    w.str(k);
    w.i64(v);
  }
  write_weight_block(w, model.weights);
  return w.take();
}

ModelFile decode_model(const std::string& bytes) {
  Reader r(bytes, 0);
  r.magic(kModelMagic, "model file");
  const std::size_t version_at = r.pos();
  const std::uint32_t version = r.u32("version");
  if (version != kWeightFormatVersion) {
    throw FormatError("unsupported model format version " + std::to_string(version),
                      version_at);
  }
  ModelFile model;
  model.kind = r.str("model kind");
  const std::uint32_t entries = r.u32("config entry count");
  for (std::uint32_t i = 0; i < entries; ++i) {
    std::string key = r.str("config key");
    const std::int64_t value = r.i64("config value");
    model.config.emplace_back(std::move(key), value);
  }
  std::size_t offset = r.pos();
  model.weights = decode_weights(bytes, offset);
  if (offset != bytes.size()) throw FormatError("trailing bytes after weight block", offset);
  return model;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("failed writing '" + path.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path.string() + "'");
  }
}

void save_weights(const ParamSet<float>& weights, const std::filesystem::path& path) {
  write_file_atomic(path, encode_weights(weights));
}

ParamSet<float> load_weights(const std::filesystem::path& path) {
  const std::string bytes = read_file_bytes(path);
  std::size_t offset = 0;
  ParamSet<float> out = decode_weights(bytes, offset);
  if (offset != bytes.size()) throw FormatError("trailing bytes after weight block", offset);
  return out;
}

void save_model(const ModelFile& model, const std::filesystem::path& path) {
  write_file_atomic(path, encode_model(model));
}

ModelFile load_model_file(const std::filesystem::path& path) {
  return decode_model(read_file_bytes(path));
}

void require_matching_layout(const ParamSet<float>& expected, const ParamSet<float>& loaded,
                             const std::string& what) {
  bool ok = expected.size() == loaded.size();
  for (std::size_t i = 0; ok && i < expected.size(); ++i) {
    const auto& a = expected.entries()[i];
    const auto& b = loaded.entries()[i];
    ok = a.name == b.name && a.value.shape() == b.value.shape();
  }
  if (ok) return;
  std::string msg = what + ": weight layout mismatch; expected";
  for (const auto& e : expected.entries())
    msg += " " + e.name + shape_to_string(e.value.shape());
  msg += " but file holds";
  for (const auto& e : loaded.entries()) msg += " " + e.name + shape_to_string(e.value.shape());
  throw ShapeError(msg);
}

}  // namespace mtex
