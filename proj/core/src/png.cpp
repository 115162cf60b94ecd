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

#include <png.h>

#include <cstdio>
#include <cstring>

#include "mtex/error.hpp"
#include "mtex/image.hpp"
#include "mtex/weight_file.hpp"

namespace mtex {

namespace {

constexpr png_uint_32 kMaxSide = 1u << 14;

struct ReadState {
  const unsigned char* data;
  std::size_t size;
  std::size_t offset;
  char message[256];
};

struct WriteState {
  std::string* out;
  char message[256];
};

void read_bytes(png_structp png, png_bytep dst, png_size_t n) {
  auto* s = static_cast<ReadState*>(png_get_io_ptr(png));
  if (n > s->size - s->offset) {
    s->offset = s->size;
    png_error(png, "unexpected end of file");
  }
  std::memcpy(dst, s->data + s->offset, n);
  s->offset += n;
}

void read_error(png_structp png, png_const_charp msg) {
  auto* s = static_cast<ReadState*>(png_get_error_ptr(png));
  std::snprintf(s->message, sizeof s->message, "%s", msg);
  png_longjmp(png, 1);
}

void write_bytes(png_structp png, png_bytep src, png_size_t n) {
  static_cast<WriteState*>(png_get_io_ptr(png))->out->append(reinterpret_cast<const char*>(src), n);
}

void write_error(png_structp png, png_const_charp msg) {
  auto* s = static_cast<WriteState*>(png_get_error_ptr(png));
  std::snprintf(s->message, sizeof s->message, "%s", msg);
  png_longjmp(png, 1);
}

void ignore_warning(png_structp, png_const_charp) {}
void no_flush(png_structp) {}

// The setjmp frame. Only trivially destructible locals live here, so libpng's
// longjmp skips no destructors; the buffers belong to the caller.
bool read_pixels(png_structp png, png_infop info, ImageBuffer* out,
                 std::vector<png_bytep>* rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_read_fn(png, png_get_error_ptr(png), read_bytes);
  png_set_user_limits(png, kMaxSide, kMaxSide);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  if (png_get_channels(png, info) != 3 || png_get_bit_depth(png, info) != 8) {
    png_error(png, "unsupported pixel layout");
  }
  out->width = png_get_image_width(png, info);
  out->height = png_get_image_height(png, info);
  out->rgb.assign(out->width * out->height * 3, 0);
  rows->resize(out->height);
  for (std::size_t y = 0; y < out->height; ++y) (*rows)[y] = out->rgb.data() + y * out->width * 3;
  png_read_image(png, rows->data());
  png_read_end(png, nullptr);
  return true;
}

bool write_pixels(png_structp png, png_infop info, const ImageBuffer& image,
                  std::vector<png_bytep>* rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_write_fn(png, png_get_error_ptr(png), write_bytes, no_flush);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  png_write_image(png, rows->data());
  png_write_end(png, nullptr);
  return true;
}

}  // namespace

ImageBuffer decode_png(const std::string& bytes) {
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 8 || png_sig_cmp(data, 0, 8) != 0) {
    throw FormatError("not a PNG file (bad signature)", 0);
  }
  ReadState state{data, bytes.size(), 0, {}};
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &state, read_error, ignore_warning);
  if (png == nullptr) throw Error("cannot allocate PNG decoder");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("cannot allocate PNG decoder");
  }
  ImageBuffer out;
  std::vector<png_bytep> rows;
  const bool ok = read_pixels(png, info, &out, &rows);
  png_destroy_read_struct(&png, &info, nullptr);
  if (!ok) throw FormatError(std::string("malformed PNG: ") + state.message, state.offset);
  return out;
}

std::string encode_png(const ImageBuffer& image) {
  if (image.width == 0 || image.height == 0 || image.width > kMaxSide || image.height > kMaxSide) {
    throw ShapeError("cannot encode a " + std::to_string(image.width) + "x" +
                     std::to_string(image.height) + " image");
  }
  if (image.rgb.size() != image.width * image.height * 3) {
    throw ShapeError("image buffer holds " + std::to_string(image.rgb.size()) + " bytes, expected " +
                     std::to_string(image.width * image.height * 3));
  }
  std::string out;
  WriteState state{&out, {}};
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &state, write_error, ignore_warning);
  if (png == nullptr) throw Error("cannot allocate PNG encoder");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("cannot allocate PNG encoder");
  }
  std::vector<png_bytep> rows(image.height);
  auto* base = const_cast<png_bytep>(image.rgb.data());  // libpng's row type is non-const
  for (std::size_t y = 0; y < image.height; ++y) rows[y] = base + y * image.width * 3;
  const bool ok = write_pixels(png, info, image, &rows);
  png_destroy_write_struct(&png, &info);
  if (!ok) throw Error(std::string("PNG encoding failed: ") + state.message);
  return out;
}

ImageBuffer load_image(const std::filesystem::path& path) {
  try {
    return decode_png(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.detail(), e.offset());
  }
}

void save_image(const ImageBuffer& image, const std::filesystem::path& path) {
  write_file_atomic(path, encode_png(image));
}

}  // namespace mtex
