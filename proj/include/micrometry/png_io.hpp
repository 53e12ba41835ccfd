// Copyright 2026 The Micrometry Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// PNG codecs: 8-bit gray/RGB images and 16-bit grayscale label maps.

#pragma once

#include <png.h>

#include <csetjmp>
#include <cstdint>
#include <cstring>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "micrometry/error.hpp"
#include "micrometry/imagecore.hpp"

namespace micrometry {

namespace detail {

struct PngContext {
  std::span<const std::uint8_t> input;
  std::size_t offset = 0;
  std::vector<std::uint8_t> output;
  std::string message;
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
};

inline void png_error_fn(png_structp png, png_const_charp msg) {
  auto* ctx = static_cast<PngContext*>(png_get_error_ptr(png));
  ctx->message = msg ? msg : "png error";
  png_longjmp(png, 1);
}

inline void png_warning_fn(png_structp, png_const_charp) {}

inline void png_read_fn(png_structp png, png_bytep out, png_size_t len) {
  auto* ctx = static_cast<PngContext*>(png_get_io_ptr(png));
  if (ctx->offset + len > ctx->input.size()) {
    png_error(png, "unexpected end of PNG data");
  }
  std::memcpy(out, ctx->input.data() + ctx->offset, len);
  ctx->offset += len;
}

inline void png_write_fn(png_structp png, png_bytep data, png_size_t len) {
  auto* ctx = static_cast<PngContext*>(png_get_io_ptr(png));
  ctx->output.insert(ctx->output.end(), data, data + len);
}

inline void png_flush_fn(png_structp) {}

// Decodes into ctx->pixels. 16-bit samples are kept big-endian-swapped to
// host order as uint16 pairs when keep16 is set, otherwise stripped to 8 bits.
// Palette and low-bit-depth images are expanded; alpha is dropped.
inline bool png_decode(PngContext* ctx, bool keep16) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, ctx,
                                           png_error_fn, png_warning_fn);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, ctx, png_read_fn);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) {
    png_set_strip_alpha(png);
  }
  if (depth == 16) {
    if (keep16) {
      png_set_swap(png);
    } else {
      png_set_strip_16(png);
    }
  }
  png_read_update_info(png, info);
  ctx->width = static_cast<int>(png_get_image_width(png, info));
  ctx->height = static_cast<int>(png_get_image_height(png, info));
  ctx->channels = png_get_channels(png, info);
  ctx->bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  ctx->pixels.resize(rowbytes * static_cast<std::size_t>(ctx->height));
  ctx->rows.resize(static_cast<std::size_t>(ctx->height));
  for (int y = 0; y < ctx->height; ++y) ctx->rows[y] = ctx->pixels.data() + rowbytes * y;
  png_read_image(png, ctx->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

// Encodes ctx->pixels (host-order samples) with the given layout.
inline bool png_encode(PngContext* ctx, int color_type) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, ctx,
                                            png_error_fn, png_warning_fn);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, ctx, png_write_fn, png_flush_fn);
  png_set_IHDR(png, info, static_cast<png_uint_32>(ctx->width),
               static_cast<png_uint_32>(ctx->height), ctx->bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  if (ctx->bit_depth == 16) png_set_swap(png);
  const std::size_t rowbytes = static_cast<std::size_t>(ctx->width) * ctx->channels *
                               (ctx->bit_depth / 8);
  for (int y = 0; y < ctx->height; ++y) {
    png_write_row(png, ctx->pixels.data() + rowbytes * y);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace detail

inline Raster8 decode_png_image(std::span<const std::uint8_t> bytes) {
  auto ctx = std::make_unique<detail::PngContext>();
  ctx->input = bytes;
  if (!detail::png_decode(ctx.get(), false)) {
    throw Error(ErrorCode::decode, "PNG decode failed: " + ctx->message);
  }
  const int ch = ctx->channels;
  if (ch == 1 || ch == 3) {
    return Raster8(ctx->width, ctx->height, ch, std::move(ctx->pixels));
  }
  if (ch == 2 || ch == 4) {  // alpha survived; drop it
    const int keep = ch == 2 ? 1 : 3;
    std::vector<std::uint8_t> out(static_cast<std::size_t>(ctx->width) * ctx->height * keep);
    for (std::size_t p = 0, n = static_cast<std::size_t>(ctx->width) * ctx->height; p < n; ++p) {
      for (int c = 0; c < keep; ++c) out[p * keep + c] = ctx->pixels[p * ch + c];
    }
    return Raster8(ctx->width, ctx->height, keep, std::move(out));
  }
  throw Error(ErrorCode::decode, "unsupported PNG channel layout");
}

inline std::vector<std::uint8_t> encode_png(const Raster8& img) {
  auto ctx = std::make_unique<detail::PngContext>();
  ctx->width = img.width();
  ctx->height = img.height();
  ctx->channels = img.channels();
  ctx->bit_depth = 8;
  ctx->pixels.assign(img.data().begin(), img.data().end());
  const int color = img.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  if (!detail::png_encode(ctx.get(), color)) {
    throw Error(ErrorCode::io, "PNG encode failed: " + ctx->message);
  }
  return std::move(ctx->output);
}

// Label maps travel as single-channel 16-bit PNG, value = instance id.
inline std::vector<std::uint8_t> encode_label_png(const LabelMap& lm) {
  auto ctx = std::make_unique<detail::PngContext>();
  ctx->width = lm.width();
  ctx->height = lm.height();
  ctx->channels = 1;
  ctx->bit_depth = 16;
  ctx->pixels.resize(lm.size() * 2);
  for (std::size_t i = 0; i < lm.size(); ++i) {
    if (lm[i] > 0xffffu) {
      throw Error(ErrorCode::out_of_bounds, "label id exceeds 16-bit PNG range");
    }
    const auto v = static_cast<std::uint16_t>(lm[i]);
    std::memcpy(&ctx->pixels[i * 2], &v, 2);
  }
  if (!detail::png_encode(ctx.get(), PNG_COLOR_TYPE_GRAY)) {
    throw Error(ErrorCode::io, "PNG encode failed: " + ctx->message);
  }
  return std::move(ctx->output);
}

inline LabelMap decode_label_png(std::span<const std::uint8_t> bytes) {
  auto ctx = std::make_unique<detail::PngContext>();
  ctx->input = bytes;
  if (!detail::png_decode(ctx.get(), true)) {
    throw Error(ErrorCode::decode, "PNG decode failed: " + ctx->message);
  }
  if (ctx->channels != 1) {
    throw Error(ErrorCode::decode, "label PNG must be single-channel");
  }
  LabelMap lm(ctx->width, ctx->height, 0u);
  for (std::size_t i = 0; i < lm.size(); ++i) {
    if (ctx->bit_depth == 16) {
      std::uint16_t v;
      std::memcpy(&v, &ctx->pixels[i * 2], 2);
      lm[i] = v;
    } else {
      lm[i] = ctx->pixels[i];
    }
  }
  return lm;
}

inline Raster8 read_png_image(const std::string& path) {
  return decode_png_image(read_file_bytes(path));
}
inline void write_png_image(const Raster8& img, const std::string& path) {
  write_file_bytes(path, encode_png(img));
}
inline LabelMap read_label_png(const std::string& path) {
  return decode_label_png(read_file_bytes(path));
}
inline void write_label_png(const LabelMap& lm, const std::string& path) {
  write_file_bytes(path, encode_label_png(lm));
}

}  // namespace micrometry
