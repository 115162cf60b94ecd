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

#include <gtest/gtest.h>
#include <png.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "mtex/error.hpp"
#include "mtex/exemplars.hpp"
#include "mtex/image.hpp"
#include "mtex/rng.hpp"
#include "mtex/run_config.hpp"
#include "mtex/weight_file.hpp"
#include "test_util.hpp"

namespace mtex {
namespace {

// Writes a PNG with libpng directly, bypassing the codec under test.
void write_reference_png(const std::filesystem::path& path, int width, int height, int color_type,
                         int bit_depth, const std::vector<std::uint8_t>& rows) {
  FILE* f = std::fopen(path.c_str(), "wb");
  ASSERT_NE(f, nullptr);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_init_io(png, f);
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = rows.size() / height;
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(rows.data() + y * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

ImageBuffer random_image(std::size_t w, std::size_t h, std::uint64_t seed) {
  ImageBuffer img(w, h);
  Rng rng(seed);
  for (auto& p : img.rgb) p = static_cast<std::uint8_t>(rng.index(256));
  return img;
}

TEST(Normalize, EndpointsAndMidpoint) {
  ImageBuffer img(3, 1);
  img.at(0, 0, 0) = 0;
  img.at(1, 0, 0) = 255;
  img.at(2, 0, 0) = 128;
  const auto t = normalize(img);
  EXPECT_EQ(t.shape(), (Shape{3, 1, 3}));
  EXPECT_EQ(t.at({0, 0, 0}), -1.0f);
  EXPECT_EQ(t.at({0, 0, 1}), 1.0f);
  EXPECT_NEAR(t.at({0, 0, 2}), 2.0 * 128.0 / 255.0 - 1.0, 1e-7);
  EXPECT_NEAR(t.at({0, 0, 2}), 0.00392, 1e-5);
}

TEST(Normalize, ExhaustiveRoundTrip) {
  ImageBuffer img(256, 1);
  for (std::size_t v = 0; v < 256; ++v)
    for (std::size_t c = 0; c < 3; ++c) img.at(v, 0, c) = static_cast<std::uint8_t>(v);
  EXPECT_EQ(denormalize(normalize(img)), img);
}

TEST(Normalize, DenormalizeClampsAndRejectsNonFinite) {
  Tensor<float> t({3, 1, 2});
  t.at({0, 0, 0}) = 5.0f;
  t.at({0, 0, 1}) = -5.0f;
  const auto img = denormalize(t);
  EXPECT_EQ(img.at(0, 0, 0), 255);
  EXPECT_EQ(img.at(1, 0, 0), 0);
  EXPECT_EQ(img.at(0, 0, 1), 128) << "0.0 maps to 127.5, which rounds half up";
  t[2] = std::nanf("");
  EXPECT_THROW(denormalize(t), NumericError);
  EXPECT_THROW(denormalize(Tensor<float>({1, 2, 2})), ShapeError);
}

TEST(Normalize, TensorRoundTripWithinQuantization) {
  const auto t = Rng(1).uniform_tensor<float>({3, 8, 8}, -1, 1);
  const auto back = normalize(denormalize(t));
  EXPECT_LE(max_abs_diff(back, t), 1.0f / 255.0f + 1e-6f);
}

TEST(Png, RoundTripIsExact) {
  testing::TempDir dir;
  const auto img = random_image(17, 9, 2);
  save_image(img, dir / "a.png");
  EXPECT_EQ(load_image(dir / "a.png"), img);
  EXPECT_EQ(decode_png(encode_png(img)), img);
}

TEST(Png, EncodingIsDeterministic) {
  const auto img = random_image(8, 8, 3);
  EXPECT_EQ(encode_png(img), encode_png(img));
}

TEST(Png, GrayscaleExpandsToThreeChannels) {
  testing::TempDir dir;
  std::vector<std::uint8_t> rows{0, 50, 100, 150, 200, 255};
  write_reference_png(dir / "g.png", 3, 2, PNG_COLOR_TYPE_GRAY, 8, rows);
  const auto img = load_image(dir / "g.png");
  ASSERT_EQ(img.width, 3u);
  ASSERT_EQ(img.height, 2u);
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 0; x < 3; ++x)
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(img.at(x, y, c), rows[y * 3 + x]);
}

TEST(Png, AlphaIsDropped) {
  testing::TempDir dir;
  std::vector<std::uint8_t> rows{10, 20, 30, 0, 40, 50, 60, 255};
  write_reference_png(dir / "a.png", 2, 1, PNG_COLOR_TYPE_RGBA, 8, rows);
  const auto img = load_image(dir / "a.png");
  EXPECT_EQ(img.rgb, (std::vector<std::uint8_t>{10, 20, 30, 40, 50, 60}));
}

TEST(Png, SixteenBitIsReducedToEight) {
  testing::TempDir dir;
  std::vector<std::uint8_t> rows{0x12, 0x34, 0xAB, 0xCD, 0xFF, 0xFF};
  write_reference_png(dir / "w.png", 1, 1, PNG_COLOR_TYPE_RGB, 16, rows);
  const auto img = load_image(dir / "w.png");
  EXPECT_EQ(img.rgb, (std::vector<std::uint8_t>{0x12, 0xAB, 0xFF}));
}

TEST(Png, TruncatedFileReportsOffset) {
  const std::string bytes = encode_png(random_image(32, 32, 4));
  for (std::size_t cut : {std::size_t{4}, std::size_t{20}, bytes.size() / 2, bytes.size() - 13}) {
    try {
      decode_png(bytes.substr(0, cut));
      FAIL() << "cut at " << cut << " decoded";
    } catch (const FormatError& e) {
      EXPECT_LE(e.offset(), cut);
      EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos) << e.what();
    }
  }
}

TEST(Png, BadSignatureAndMissingFile) {
  testing::TempDir dir;
  std::string bytes = encode_png(random_image(4, 4, 5));
  bytes[1] = 'Q';
  try {
    decode_png(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  EXPECT_THROW(load_image(dir / "nope.png"), IoError);
  std::FILE* f = std::fopen((dir / "junk.png").c_str(), "wb");
  std::fputs("not a png", f);
  std::fclose(f);
  try {
    load_image(dir / "junk.png");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("junk.png"), std::string::npos) << e.what();
  }
}

TEST(Resize, BoxFilterAveragesAndPreservesConstants) {
  ImageBuffer img(4, 2);
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 0; x < 4; ++x)
      for (std::size_t c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<std::uint8_t>(x < 2 ? 10 : 30);
  const auto half = resize_box(img, 2, 1);
  EXPECT_EQ(half.at(0, 0, 0), 10);
  EXPECT_EQ(half.at(1, 0, 2), 30);
  const auto one = resize_box(img, 1, 1);
  EXPECT_EQ(one.at(0, 0, 1), 20);
  ImageBuffer flat(5, 7);
  std::fill(flat.rgb.begin(), flat.rgb.end(), 77);
  const auto up = resize_box(flat, 13, 3);
  for (auto p : up.rgb) EXPECT_EQ(p, 77);
  EXPECT_EQ(resize_box(img, 4, 2), img);
  EXPECT_THROW(resize_box(img, 0, 2), Error);
}

TEST(Exemplars, BuiltinsAndFiles) {
  testing::TempDir dir;
  for (const auto& name : procedural_texture_names()) {
    const auto t = procedural_texture(name, 32, 1);
    EXPECT_EQ(t.shape(), (Shape{3, 32, 32})) << name;
    EXPECT_EQ(t.storage(), procedural_texture(name, 32, 1).storage()) << name;
    for (float v : t.data()) {
      ASSERT_GE(v, -1.0f);
      ASSERT_LE(v, 1.0f);
    }
  }
  EXPECT_THROW(procedural_texture("marble-ish", 32), ConfigError);
  EXPECT_EQ(load_exemplar("builtin:dots:16", 16, false).shape(), (Shape{3, 16, 16}));
  EXPECT_THROW(load_exemplar("builtin:dots:16", 32, false), ShapeError);
  EXPECT_EQ(load_exemplar("builtin:dots", 32, false).shape(), (Shape{3, 32, 32}));

  save_image(random_image(48, 48, 6), dir / "ex.png");
  EXPECT_THROW(load_exemplar((dir / "ex.png").string(), 32, false), ShapeError);
  EXPECT_EQ(load_exemplar((dir / "ex.png").string(), 32, true).shape(), (Shape{3, 32, 32}));
  EXPECT_EQ(load_exemplar((dir / "ex.png").string(), 0, false).shape(), (Shape{3, 48, 48}));
}

TEST(WeightFile, RoundTripAndValidation) {
  testing::TempDir dir;
  ParamSet<float> w;
  w.add("a", Rng(7).uniform_tensor<float>({2, 3}, -1, 1));
  w.add("b.c", Tensor<float>({4}, 0.5f));
  save_weights(w, dir / "w.bin");
  EXPECT_EQ(load_weights(dir / "w.bin"), w);
  const std::string bytes = read_file_bytes(dir / "w.bin");
  EXPECT_GE(bytes.size(), 4u * 10u);
  std::string bad = bytes;
  bad[0] ^= 0xFF;
  write_file_atomic(dir / "bad.bin", bad);
  EXPECT_THROW(load_weights(dir / "bad.bin"), FormatError);
  write_file_atomic(dir / "long.bin", bytes + "x");
  EXPECT_THROW(load_weights(dir / "long.bin"), FormatError);
  for (std::size_t cut = 0; cut < bytes.size(); cut += 7) {
    write_file_atomic(dir / "cut.bin", bytes.substr(0, cut));
    EXPECT_THROW(load_weights(dir / "cut.bin"), FormatError) << cut;
  }
}

TEST(WeightFile, ModelHeaderRoundTrip) {
  ModelFile m;
  m.kind = "generator";
  m.config = {{"textures", 3}, {"noise_dim", 5}};
  m.weights.add("x", Tensor<float>({1}, 2.0f));
  EXPECT_EQ(decode_model(encode_model(m)), m);
  EXPECT_EQ(m.config_value("noise_dim"), 5);
  EXPECT_THROW(m.config_value("missing"), FormatError);
}

TEST(WeightFile, AtomicWriteLeavesNoTemporaries) {
  testing::TempDir dir;
  write_file_atomic(dir / "f.bin", "abc");
  write_file_atomic(dir / "f.bin", "defg");
  EXPECT_EQ(read_file_bytes(dir / "f.bin"), "defg");
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path())) {
    (void)e;
    ++files;
  }
  EXPECT_EQ(files, 1u);
  EXPECT_THROW(write_file_atomic(dir / "no_such_dir" / "f.bin", "x"), IoError);
}

TEST(RunConfig, ParseDumpRoundTrip) {
  RunConfig c;
  c.set("train.iterations", "250");
  c.set("train.mode", "random");
  c.set("train.layer_weights", "1, 0.5, 0.25, 0.125, 2");
  c.set("synthesis.scale_channels", "8,8,4");
  c.set("paths.exemplars", "builtin:stripes, builtin:dots");
  c.set("train.diversity_scale", "raw");
  c.apply_override("run.seed=42");
  const std::string text = c.dump();
  const RunConfig back = RunConfig::parse(text);
  EXPECT_EQ(back.dump(), text);
  EXPECT_EQ(back.train.iterations, 250u);
  EXPECT_EQ(back.train.mode, ScheduleMode::kRandom);
  EXPECT_EQ(back.train.layer_weights, (std::vector<double>{1, 0.5, 0.25, 0.125, 2}));
  EXPECT_EQ(back.paths.exemplars, (std::vector<std::string>{"builtin:stripes", "builtin:dots"}));
  EXPECT_EQ(back.train.diversity_scale, DiversityScale::kRaw);
  EXPECT_EQ(back.seed, 42u);
  // Every documented key appears in the dump.
  for (const auto& key : RunConfig::keys()) EXPECT_NE(text.find(key + " ="), std::string::npos) << key;
}

TEST(RunConfig, CommentsBlankLinesAndErrors) {
  const RunConfig c = RunConfig::parse("# a comment\n\ntrain.batch = 2   \n  synthesis.noise_dim=3\n");
  EXPECT_EQ(c.train.batch, 2u);
  EXPECT_EQ(c.synthesis.noise_dim, 3u);
  try {
    RunConfig::parse("train.batch = 2\ntrain.bacth = 3\n");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("train.bacth"), std::string::npos) << msg;
    EXPECT_NE(msg.find("2"), std::string::npos) << msg;
  }
  EXPECT_THROW(RunConfig::parse("no equals sign\n"), ConfigError);
  RunConfig d;
  EXPECT_THROW(d.set("train.batch", "two"), ConfigError);
  EXPECT_THROW(d.set("train.batch", "-1"), ConfigError);
  EXPECT_THROW(d.set("train.mode", "sometimes"), ConfigError);
  EXPECT_THROW(d.set("train.use_selector", "maybe"), ConfigError);
  EXPECT_THROW(d.apply_override("train.batch"), ConfigError);
}

TEST(RunConfig, ResolveDerivesCountsAndSeeds) {
  RunConfig c;
  c.paths.exemplars = {"builtin:stripes", "builtin:dots", "builtin:bricks", "builtin:waves"};
  c.paths.styles = {"builtin:stripes"};
  c.seed = 9;
  c.resolve();
  EXPECT_EQ(c.synthesis.textures, 4u);
  EXPECT_EQ(c.transfer.styles, 1u);
  EXPECT_EQ(c.train.seed, 9u);
  EXPECT_EQ(c.transfer_train.seed, 9u);
  RunConfig bad;
  bad.train.batch = 1;
  EXPECT_THROW(bad.resolve(), ConfigError);
}

TEST(RunConfig, LoadFromFile) {
  testing::TempDir dir;
  write_file_atomic(dir / "run.cfg", "train.phase_iters = 7\n");
  EXPECT_EQ(RunConfig::load(dir / "run.cfg").train.phase_iters, 7u);
  EXPECT_THROW(RunConfig::load(dir / "missing.cfg"), IoError);
}

}  // namespace
}  // namespace mtex
