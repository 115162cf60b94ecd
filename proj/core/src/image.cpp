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

#include "mtex/image.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "mtex/error.hpp"

namespace mtex {

namespace {

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

// (source index, weight) pairs of every output cell along one axis; the
// weights of a cell sum to 1.
std::vector<std::vector<std::pair<std::size_t, double>>> box_weights(std::size_t src,
                                                                     std::size_t dst) {
  std::vector<std::vector<std::pair<std::size_t, double>>> cells(dst);
  const double ratio = static_cast<double>(src) / static_cast<double>(dst);
  for (std::size_t o = 0; o < dst; ++o) {
    const double lo = static_cast<double>(o) * ratio;
    const double hi = lo + ratio;
    const auto first = static_cast<std::size_t>(std::floor(lo));
    const auto last = std::min(src, static_cast<std::size_t>(std::ceil(hi)));
    for (std::size_t i = first; i < last; ++i) {
      const double overlap =
          std::min(hi, static_cast<double>(i + 1)) - std::max(lo, static_cast<double>(i));
      if (overlap > 0.0) cells[o].emplace_back(i, overlap / ratio);
    }
  }
  return cells;
}

}  // namespace

Tensor<float> normalize(const ImageBuffer& image) {
  const std::size_t h = image.height, w = image.width;
  Tensor<float> out({3, h, w});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        out[(c * h + y) * w + x] = static_cast<float>(2.0 * (image.at(x, y, c) / 255.0) - 1.0);
  return out;
}

ImageBuffer denormalize(const Tensor<float>& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("denormalize expects (3,H,W), got " + shape_to_string(image.shape()));
  }
  if (!image.all_finite()) throw NumericError("cannot convert a non-finite image to pixels");
  const std::size_t h = image.dim(1), w = image.dim(2);
  ImageBuffer out(w, h);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double v = std::clamp(static_cast<double>(image[(c * h + y) * w + x]), -1.0, 1.0);
        out.at(x, y, c) = quantize((v + 1.0) / 2.0 * 255.0);
      }
  return out;
}

ImageBuffer resize_box(const ImageBuffer& image, std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) throw ShapeError("resize target must be non-empty");
  if (image.width == 0 || image.height == 0) throw ShapeError("cannot resize an empty image");
  if (width == image.width && height == image.height) return image;
  const auto wx = box_weights(image.width, width);
  const auto wy = box_weights(image.height, height);
  ImageBuffer out(width, height);
  for (std::size_t oy = 0; oy < height; ++oy)
    for (std::size_t ox = 0; ox < width; ++ox)
      for (std::size_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (const auto& [sy, fy] : wy[oy])
          for (const auto& [sx, fx] : wx[ox]) acc += fy * fx * image.at(sx, sy, c);
        out.at(ox, oy, c) = quantize(acc);
      }
  return out;
}

}  // namespace mtex
