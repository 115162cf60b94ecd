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

#include "mtex/exemplars.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numbers>
#include <string_view>

#include "mtex/error.hpp"
#include "mtex/image.hpp"
#include "mtex/rng.hpp"

namespace mtex {

namespace {

using Rgb = std::array<double, 3>;

Rgb mix(const Rgb& a, const Rgb& b, double t) {
  return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

template <typename Fn>
Tensor<float> paint(std::size_t size, Fn&& color_at) {
  Tensor<float> out({3, size, size});
  const std::size_t plane = size * size;
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const Rgb c = color_at(static_cast<double>(x), static_cast<double>(y));
      for (std::size_t ch = 0; ch < 3; ++ch) {
        out[ch * plane + y * size + x] = static_cast<float>(std::clamp(c[ch], -1.0, 1.0));
      }
    }
  return out;
}

}  // namespace

const std::vector<std::string>& procedural_texture_names() {
  static const std::vector<std::string> names = {"stripes", "checker", "dots",
                                                 "waves",   "bricks",  "speckle"};
  return names;
}

Tensor<float> procedural_texture(const std::string& name, std::size_t size, std::uint64_t seed) {
  if (size == 0) throw ConfigError("procedural texture size must be positive");
  Rng rng = Rng(seed).child(name);
  const double pi = std::numbers::pi;
  const double jitter = rng.uniform(0.0, 2.0 * pi);

  if (name == "stripes") {
    const Rgb a{0.9, 0.2, -0.6}, b{-0.7, -0.5, 0.4};
    return paint(size, [&](double x, double y) {
      const double t = 0.5 + 0.5 * std::sin(2.0 * pi * (x + y) / 6.0 + jitter);
      return mix(a, b, t);
    });
  }
  if (name == "checker") {
    const Rgb a{0.8, 0.8, 0.7}, b{-0.8, -0.6, -0.9};
    return paint(size, [&](double x, double y) {
      const auto cx = static_cast<long>(x) / 4, cy = static_cast<long>(y) / 4;
      return (cx + cy) % 2 == 0 ? a : b;
    });
  }
  if (name == "dots") {
    const Rgb bg{-0.4, 0.5, -0.2}, dot{0.9, -0.8, 0.6};
    return paint(size, [&](double x, double y) {
      const double dx = std::fmod(x, 8.0) - 3.5, dy = std::fmod(y, 8.0) - 3.5;
      const double r = std::sqrt(dx * dx + dy * dy);
      return mix(dot, bg, std::clamp((r - 1.5) / 1.5, 0.0, 1.0));
    });
  }
  if (name == "waves") {
    const Rgb a{-0.9, -0.2, 0.9}, b{0.6, 0.9, -0.3};
    return paint(size, [&](double x, double y) {
      const double t =
          0.5 + 0.5 * std::sin(2.0 * pi * y / 10.0 + 1.5 * std::sin(2.0 * pi * x / 12.0) + jitter);
      return mix(a, b, t);
    });
  }
  if (name == "bricks") {
    const Rgb brick{0.7, -0.3, -0.6}, mortar{0.3, 0.3, 0.2};
    return paint(size, [&](double x, double y) {
      const auto row = static_cast<long>(y) / 4;
      const auto xs = static_cast<long>(x) + (row % 2) * 4;
      const bool line = static_cast<long>(y) % 4 == 0 || xs % 8 == 0;
      return line ? mortar : brick;
    });
  }
  if (name == "speckle") {
    std::vector<double> field(size * size);
    for (auto& v : field) v = rng.uniform();
    const Rgb a{-0.8, -0.8, -0.5}, b{0.8, 0.6, 0.9};
    return paint(size, [&](double x, double y) {
      const auto ix = static_cast<std::size_t>(x), iy = static_cast<std::size_t>(y);
      return mix(a, b, field[iy * size + ix] > 0.7 ? 1.0 : 0.0);
    });
  }
  throw ConfigError("unknown procedural texture '" + name + "'");
}

Tensor<float> load_exemplar(const std::string& spec, std::size_t size, bool resize) {
  constexpr std::string_view kBuiltin = "builtin:";
  if (spec.starts_with(kBuiltin)) {
    std::string name = spec.substr(kBuiltin.size());
    std::size_t side = size;
    if (const auto colon = name.find(':'); colon != std::string::npos) {
      const std::string digits = name.substr(colon + 1);
      name.resize(colon);
      std::size_t parsed = 0;
      const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), parsed);
      if (res.ec != std::errc() || res.ptr != digits.data() + digits.size() || parsed == 0) {
        throw ConfigError("bad size in image reference '" + spec + "'");
      }
      if (size != 0 && parsed != size && !resize) {
        throw ShapeError("'" + spec + "' is " + digits + "x" + digits + ", expected " +
                         std::to_string(size) + "x" + std::to_string(size) + " (use --resize)");
      }
      side = size != 0 ? size : parsed;
    }
    if (side == 0) throw ConfigError("'" + spec + "' needs an explicit size: builtin:<name>:<size>");
    return procedural_texture(name, side);
  }
  ImageBuffer image = load_image(spec);
  if (size != 0 && (image.width != size || image.height != size)) {
    if (!resize) {
      throw ShapeError("'" + spec + "' is " + std::to_string(image.width) + "x" +
                       std::to_string(image.height) + ", expected " + std::to_string(size) + "x" +
                       std::to_string(size) + " (use --resize)");
    }
    image = resize_box(image, size, size);
  }
  return normalize(image);
}

}  // namespace mtex
