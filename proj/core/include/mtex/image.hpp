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
#include <filesystem>
#include <string>
#include <vector>

#include "mtex/tensor.hpp"

namespace mtex {

/// 8-bit RGB pixels, row-major, channels interleaved.
struct ImageBuffer {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;

  ImageBuffer() = default;
  ImageBuffer(std::size_t w, std::size_t h) : width(w), height(h), rgb(w * h * 3, 0) {}

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) { return rgb[(y * width + x) * 3 + c]; }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
    return rgb[(y * width + x) * 3 + c];
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;
};

/// Decodes a PNG held in memory. Gray, palette and alpha variants are
/// converted to RGB (alpha dropped), 16-bit samples to 8-bit. Malformed
/// input raises FormatError carrying the byte offset reached.
ImageBuffer decode_png(const std::string& bytes);
/// 8-bit RGB PNG. Output bytes depend only on the pixels.
std::string encode_png(const ImageBuffer& image);

ImageBuffer load_image(const std::filesystem::path& path);
/// Written atomically: a failed save leaves no file behind.
void save_image(const ImageBuffer& image, const std::filesystem::path& path);

/// [3,H,W] tensor with x = 2p/255 - 1.
Tensor<float> normalize(const ImageBuffer& image);
/// Inverse of normalize: clamp to [-1,1], then round half up to 8 bits.
/// Throws NumericError on non-finite input.
ImageBuffer denormalize(const Tensor<float>& image);

/// Area-averaging resample (box filter); each output pixel is the
/// overlap-weighted mean of the source pixels it covers.
ImageBuffer resize_box(const ImageBuffer& image, std::size_t width, std::size_t height);

}  // namespace mtex
