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

// Raster containers, label-map helpers, run-length masks and the UAFL
// flow-field exchange format. All rasters are row-major, origin top-left,
// y pointing down.

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "micrometry/error.hpp"

namespace micrometry {

struct Pixel {
  int y = 0;
  int x = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

// Axis-aligned integer rectangle (x, y, w, h).
struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  int right() const { return x + w; }   // exclusive
  int bottom() const { return y + h; }  // exclusive
  long long area() const { return static_cast<long long>(w) * h; }
  bool empty() const { return w <= 0 || h <= 0; }
  bool contains(int py, int px) const {
    return px >= x && px < right() && py >= y && py < bottom();
  }
  friend bool operator==(const Rect&, const Rect&) = default;
};

inline Rect intersect(const Rect& a, const Rect& b) {
  int x0 = std::max(a.x, b.x), y0 = std::max(a.y, b.y);
  int x1 = std::min(a.right(), b.right()), y1 = std::min(a.bottom(), b.bottom());
  if (x1 <= x0 || y1 <= y0) return {};
  return {x0, y0, x1 - x0, y1 - y0};
}

inline double rect_iou(const Rect& a, const Rect& b) {
  const Rect i = intersect(a, b);
  const double inter = static_cast<double>(i.empty() ? 0 : i.area());
  const double uni = static_cast<double>(a.area() + b.area()) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

// Dense single-plane raster.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) {
      throw Error(ErrorCode::invalid_argument, "negative grid dimensions");
    }
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }
  Grid(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(width) * height) {
      throw Error(ErrorCode::dimension_mismatch, "grid data length does not match dimensions");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool in_bounds(int y, int x) const {
    return y >= 0 && x >= 0 && y < height_ && x < width_;
  }
  std::size_t index(int y, int x) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  T& operator()(int y, int x) { return data_[index(y, x)]; }
  const T& operator()(int y, int x) const { return data_[index(y, x)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Mask = Grid<std::uint8_t>;
using LabelMap = Grid<std::uint32_t>;

// 8-bit image with 1 or 3 interleaved channels.
class Raster8 {
 public:
  Raster8() = default;
  Raster8(int width, int height, int channels, std::uint8_t fill = 0)
      : width_(width), height_(height), channels_(channels) {
    validate_dims();
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }
  Raster8(int width, int height, int channels, std::vector<std::uint8_t> data)
      : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    validate_dims();
    if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
      throw Error(ErrorCode::dimension_mismatch, "raster data length does not match dimensions");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }

  std::uint8_t& at(int y, int x, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  std::uint8_t at(int y, int x, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  // Writes the same value into every channel.
  void set(int y, int x, std::uint8_t v) {
    for (int c = 0; c < channels_; ++c) at(y, x, c) = v;
  }

  std::span<std::uint8_t> data() { return data_; }
  std::span<const std::uint8_t> data() const { return data_; }

  Grid<std::uint8_t> channel(int c) const {
    Grid<std::uint8_t> out(width_, height_);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = data_[i * channels_ + c];
    return out;
  }

  Raster8 crop(const Rect& r) const {
    Raster8 out(r.w, r.h, channels_);
    for (int y = 0; y < r.h; ++y) {
      const std::size_t src = (static_cast<std::size_t>(r.y + y) * width_ + r.x) * channels_;
      std::memcpy(&out.at(y, 0), data_.data() + src, static_cast<std::size_t>(r.w) * channels_);
    }
    return out;
  }

  friend bool operator==(const Raster8&, const Raster8&) = default;

 private:
  void validate_dims() const {
    if (width_ < 1 || height_ < 1) {
      throw Error(ErrorCode::invalid_argument, "raster must be at least 1x1");
    }
    if (channels_ != 1 && channels_ != 3) {
      throw Error(ErrorCode::invalid_argument, "raster must have 1 or 3 channels");
    }
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<std::uint8_t> data_;
};

// Per-pixel unit vectors toward instance centers plus foreground probability.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> dy;
  std::vector<float> dx;
  std::vector<float> fg;

  FlowField() = default;
  FlowField(int w, int h)
      : width(w), height(h),
        dy(static_cast<std::size_t>(w) * h, 0.0f),
        dx(static_cast<std::size_t>(w) * h, 0.0f),
        fg(static_cast<std::size_t>(w) * h, 0.0f) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  void validate() const {
    if (width < 0 || height < 0) {
      throw Error(ErrorCode::invalid_argument, "negative flow dimensions");
    }
    const std::size_t n = pixel_count();
    if (dy.size() != n || dx.size() != n || fg.size() != n) {
      throw Error(ErrorCode::dimension_mismatch, "flow planes do not match declared dimensions");
    }
  }

  friend bool operator==(const FlowField&, const FlowField&) = default;
};

// ---------------------------------------------------------------------------
// Connected components and canonical labels

namespace detail {

// Flood-fills the 4-connected region containing `seed` whose pixels satisfy
// `member`, writing `id` into out. Returns the pixel count.
template <typename Member>
std::size_t flood4(int width, int height, std::size_t seed, std::uint32_t id,
                   LabelMap& out, std::vector<std::size_t>& stack, Member&& member) {
  std::size_t count = 0;
  stack.clear();
  stack.push_back(seed);
  out[seed] = id;
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    ++count;
    const int y = static_cast<int>(i / width);
    const int x = static_cast<int>(i % width);
    auto visit = [&](std::size_t j) {
      if (out[j] == 0 && member(j)) {
        out[j] = id;
        stack.push_back(j);
      }
    };
    if (x > 0) visit(i - 1);
    if (x + 1 < width) visit(i + 1);
    if (y > 0) visit(i - width);
    if (y + 1 < height) visit(i + width);
  }
  return count;
}

}  // namespace detail

// Renumbers instances 1..K by first raster occurrence, splitting any id whose
// pixels form more than one 4-connected region.
inline LabelMap canonicalize_labels(const LabelMap& lm) {
  LabelMap out(lm.width(), lm.height(), 0u);
  std::vector<std::size_t> stack;
  std::uint32_t next = 0;
  for (std::size_t i = 0; i < lm.size(); ++i) {
    if (lm[i] == 0 || out[i] != 0) continue;
    const std::uint32_t source = lm[i];
    detail::flood4(lm.width(), lm.height(), i, ++next, out, stack,
                   [&](std::size_t j) { return lm[j] == source; });
  }
  return out;
}

// 4-connected components of the nonzero pixels of a mask, numbered by first
// raster occurrence.
inline LabelMap label_components(const Mask& mask) {
  LabelMap out(mask.width(), mask.height(), 0u);
  std::vector<std::size_t> stack;
  std::uint32_t next = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] == 0 || out[i] != 0) continue;
    detail::flood4(mask.width(), mask.height(), i, ++next, out, stack,
                   [&](std::size_t j) { return mask[j] != 0; });
  }
  return out;
}

inline std::uint32_t max_label(const LabelMap& lm) {
  std::uint32_t k = 0;
  for (std::uint32_t v : lm.data()) k = std::max(k, v);
  return k;
}

inline bool is_canonical(const LabelMap& lm) { return canonicalize_labels(lm) == lm; }

// Pixel count per id; index 0 holds the background count.
inline std::vector<std::uint64_t> label_areas(const LabelMap& lm) {
  std::vector<std::uint64_t> areas(static_cast<std::size_t>(max_label(lm)) + 1, 0);
  for (std::uint32_t v : lm.data()) ++areas[v];
  return areas;
}

// Tight bounding box per id (index 0 unused; empty ids get an empty Rect).
inline std::vector<Rect> label_boxes(const LabelMap& lm) {
  const std::uint32_t k = max_label(lm);
  std::vector<std::array<int, 4>> ext(k + 1, {lm.width(), lm.height(), -1, -1});
  for (int y = 0; y < lm.height(); ++y) {
    for (int x = 0; x < lm.width(); ++x) {
      const std::uint32_t v = lm(y, x);
      if (v == 0) continue;
      auto& e = ext[v];
      e[0] = std::min(e[0], x);
      e[1] = std::min(e[1], y);
      e[2] = std::max(e[2], x);
      e[3] = std::max(e[3], y);
    }
  }
  std::vector<Rect> boxes(k + 1);
  for (std::uint32_t id = 1; id <= k; ++id) {
    const auto& e = ext[id];
    if (e[2] >= 0) boxes[id] = {e[0], e[1], e[2] - e[0] + 1, e[3] - e[1] + 1};
  }
  return boxes;
}

// Binary mask of one id restricted to a rectangle.
inline Mask crop_instance(const LabelMap& lm, std::uint32_t id, const Rect& box) {
  Mask m(box.w, box.h, 0);
  for (int y = 0; y < box.h; ++y) {
    for (int x = 0; x < box.w; ++x) {
      m(y, x) = lm(box.y + y, box.x + x) == id ? 1 : 0;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Run-length masks

struct Run {
  std::uint64_t start = 0;
  std::uint64_t length = 0;
  friend bool operator==(const Run&, const Run&) = default;
};

struct RunLengthMask {
  int width = 0;
  int height = 0;
  std::vector<Run> runs;
  friend bool operator==(const RunLengthMask&, const RunLengthMask&) = default;
};

template <typename Pred>
RunLengthMask encode_rle_if(int width, int height, Pred&& pred) {
  RunLengthMask rle{width, height, {}};
  const std::uint64_t n = static_cast<std::uint64_t>(width) * height;
  std::uint64_t i = 0;
  while (i < n) {
    if (!pred(i)) {
      ++i;
      continue;
    }
    const std::uint64_t start = i;
    while (i < n && pred(i)) ++i;
    rle.runs.push_back({start, i - start});
  }
  return rle;
}

inline RunLengthMask encode_rle(const Mask& mask) {
  return encode_rle_if(mask.width(), mask.height(),
                       [&](std::uint64_t i) { return mask[i] != 0; });
}

inline RunLengthMask encode_instance_rle(const LabelMap& lm, std::uint32_t id) {
  return encode_rle_if(lm.width(), lm.height(),
                       [&](std::uint64_t i) { return lm[i] == id; });
}

inline Mask decode_rle(const RunLengthMask& rle) {
  Mask mask(rle.width, rle.height, 0);
  const std::uint64_t n = mask.size();
  std::uint64_t prev_end = 0;
  for (const Run& r : rle.runs) {
    if (r.start < prev_end || r.length == 0 || r.start + r.length > n) {
      throw Error(ErrorCode::out_of_bounds, "run out of bounds or unordered");
    }
    std::fill_n(mask.data().begin() + static_cast<std::ptrdiff_t>(r.start),
                static_cast<std::ptrdiff_t>(r.length), std::uint8_t{1});
    prev_end = r.start + r.length;
  }
  return mask;
}

// ---------------------------------------------------------------------------
// UAFL flow files: "UAFL", u32 version, u32 height, u32 width, then the dy,
// dx and fg planes as float32. Everything little-endian.

inline constexpr std::uint32_t kUaflVersion = 1;
inline constexpr std::size_t kUaflHeaderBytes = 16;

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

inline std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(in[at + b]) << (8 * b);
  return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_flow(const FlowField& f) {
  f.validate();
  const std::size_t n = f.pixel_count();
  std::vector<std::uint8_t> out;
  out.reserve(kUaflHeaderBytes + 3 * n * 4);
  for (char c : {'U', 'A', 'F', 'L'}) out.push_back(static_cast<std::uint8_t>(c));
  detail::put_u32(out, kUaflVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(f.height));
  detail::put_u32(out, static_cast<std::uint32_t>(f.width));
  for (const auto* plane : {&f.dy, &f.dx, &f.fg}) {
    for (float v : *plane) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

inline FlowField decode_flow(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kUaflHeaderBytes) {
    throw Error(ErrorCode::truncated, "UAFL header truncated");
  }
  if (std::memcmp(bytes.data(), "UAFL", 4) != 0) {
    throw Error(ErrorCode::bad_magic, "not a UAFL file (bad magic)");
  }
  const std::uint32_t version = detail::get_u32(bytes, 4);
  if (version != kUaflVersion) {
    throw Error(ErrorCode::version_mismatch,
                "unsupported UAFL version " + std::to_string(version));
  }
  const std::uint32_t h = detail::get_u32(bytes, 8);
  const std::uint32_t w = detail::get_u32(bytes, 12);
  const std::uint64_t n = static_cast<std::uint64_t>(h) * w;
  if (h > 0x7fffffffu || w > 0x7fffffffu ||
      bytes.size() - kUaflHeaderBytes < 3 * n * 4) {
    throw Error(ErrorCode::truncated, "UAFL payload truncated");
  }
  FlowField f(static_cast<int>(w), static_cast<int>(h));
  std::size_t at = kUaflHeaderBytes;
  for (auto* plane : {&f.dy, &f.dx, &f.fg}) {
    for (auto& v : *plane) {
      v = std::bit_cast<float>(detail::get_u32(bytes, at));
      at += 4;
    }
  }
  return f;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> bytes(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()),
                           static_cast<std::streamsize>(size))) {
    throw Error(ErrorCode::io, "cannot read " + path);
  }
  return bytes;
}

inline void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot create " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::io, "cannot write " + path);
}

inline FlowField read_flow_file(const std::string& path) {
  return decode_flow(read_file_bytes(path));
}

inline void write_flow_file(const FlowField& f, const std::string& path) {
  write_file_bytes(path, encode_flow(f));
}

}  // namespace micrometry
