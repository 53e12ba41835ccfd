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

// Pixel dynamics: integrate every foreground pixel along the bilinearly
// interpolated flow field until it settles, then cluster the settling points
// into instances.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "micrometry/error.hpp"
#include "micrometry/imagecore.hpp"
#include "micrometry/parallel.hpp"

namespace micrometry {

struct DynamicsParams {
  double step_size = 1.0;
  int max_steps = 250;
  double convergence_eps = 0.01;
  double fg_threshold = 0.5;
  int bin_closing_radius = 1;
  int min_instance_area = 15;

  void validate() const {
    if (!(step_size > 0.0)) throw Error(ErrorCode::invalid_argument, "step_size must be > 0");
    if (max_steps < 1) throw Error(ErrorCode::invalid_argument, "max_steps must be >= 1");
    if (!(fg_threshold > 0.0 && fg_threshold < 1.0)) {
      throw Error(ErrorCode::invalid_argument, "fg_threshold must lie in (0, 1)");
    }
    if (min_instance_area < 1) {
      throw Error(ErrorCode::invalid_argument, "min_instance_area must be >= 1");
    }
    if (bin_closing_radius < 0) {
      throw Error(ErrorCode::invalid_argument, "bin_closing_radius must be >= 0");
    }
    if (convergence_eps < 0.0) {
      throw Error(ErrorCode::invalid_argument, "convergence_eps must be >= 0");
    }
  }
};

// Final positions of the integrated pixels. Background pixels keep their
// start position and have active = 0.
struct ConvergenceMap {
  int width = 0;
  int height = 0;
  std::vector<float> pos_y;
  std::vector<float> pos_x;
  std::vector<std::uint16_t> steps;
  std::vector<std::uint8_t> active;

  std::uint64_t total_steps() const {
    std::uint64_t s = 0;
    for (auto v : steps) s += v;
    return s;
  }
  std::size_t active_count() const {
    std::size_t n = 0;
    for (auto v : active) n += v;
    return n;
  }
};

inline constexpr int kDynamicsTile = 128;

namespace detail {

// Bilinear sample of the (dy, dx) planes at a position inside the image.
inline void sample_flow(const FlowField& f, float py, float px, float& vy, float& vx) {
  const int y0 = static_cast<int>(py);
  const int x0 = static_cast<int>(px);
  const int y1 = std::min(y0 + 1, f.height - 1);
  const int x1 = std::min(x0 + 1, f.width - 1);
  const float ty = py - static_cast<float>(y0);
  const float tx = px - static_cast<float>(x0);
  const std::size_t w = static_cast<std::size_t>(f.width);
  const std::size_t i00 = y0 * w + x0, i01 = y0 * w + x1;
  const std::size_t i10 = y1 * w + x0, i11 = y1 * w + x1;
  const float w00 = (1.0f - ty) * (1.0f - tx), w01 = (1.0f - ty) * tx;
  const float w10 = ty * (1.0f - tx), w11 = ty * tx;
  vy = w00 * f.dy[i00] + w01 * f.dy[i01] + w10 * f.dy[i10] + w11 * f.dy[i11];
  vx = w00 * f.dx[i00] + w01 * f.dx[i01] + w10 * f.dx[i10] + w11 * f.dx[i11];
}

}  // namespace detail

// Euler integration x <- clamp(x + step * F(x)) for every pixel with
// fg >= fg_threshold. Each pixel is independent; tiles are distributed over
// threads and the output is identical for any thread count.
inline ConvergenceMap follow_flows(const FlowField& f, const DynamicsParams& p, int threads = 0) {
  f.validate();
  p.validate();
  ConvergenceMap c;
  c.width = f.width;
  c.height = f.height;
  const std::size_t n = f.pixel_count();
  c.pos_y.assign(n, 0.0f);
  c.pos_x.assign(n, 0.0f);
  c.steps.assign(n, 0);
  c.active.assign(n, 0);
  if (n == 0) return c;

  const int tiles_x = (f.width + kDynamicsTile - 1) / kDynamicsTile;
  const int tiles_y = (f.height + kDynamicsTile - 1) / kDynamicsTile;
  const auto step = static_cast<float>(p.step_size);
  const auto eps2 = static_cast<float>(p.convergence_eps * p.convergence_eps);
  const auto threshold = static_cast<float>(p.fg_threshold);
  const auto ymax = static_cast<float>(f.height - 1);
  const auto xmax = static_cast<float>(f.width - 1);

  parallel_for(static_cast<std::size_t>(tiles_x) * tiles_y, threads, [&](std::size_t t) {
    const int ty = static_cast<int>(t / tiles_x), tx = static_cast<int>(t % tiles_x);
    const int y_end = std::min(f.height, (ty + 1) * kDynamicsTile);
    const int x_end = std::min(f.width, (tx + 1) * kDynamicsTile);
    for (int y = ty * kDynamicsTile; y < y_end; ++y) {
      for (int x = tx * kDynamicsTile; x < x_end; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * f.width + x;
        auto py = static_cast<float>(y);
        auto px = static_cast<float>(x);
        if (!(f.fg[i] >= threshold)) {
          c.pos_y[i] = py;
          c.pos_x[i] = px;
          continue;
        }
        int s = 0;
        while (s < p.max_steps) {
          float vy, vx;
          detail::sample_flow(f, py, px, vy, vx);
          const float ny = std::clamp(py + step * vy, 0.0f, ymax);
          const float nx = std::clamp(px + step * vx, 0.0f, xmax);
          const float my = ny - py, mx = nx - px;
          py = ny;
          px = nx;
          ++s;
          if (my * my + mx * mx < eps2) break;
        }
        c.pos_y[i] = py;
        c.pos_x[i] = px;
        c.steps[i] = static_cast<std::uint16_t>(s);
        c.active[i] = 1;
      }
    }
  });
  return c;
}

namespace detail {

// Separable square dilation (or erosion) with half-width r. For erosion the
// area outside the grid counts as set.
inline Mask morph_square(const Mask& in, int r, bool dilate) {
  if (r <= 0) return in;
  const int w = in.width(), h = in.height();
  Mask tmp(w, h, 0), out(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = dilate ? 0 : 1;
      for (int k = std::max(0, x - r); k <= std::min(w - 1, x + r); ++k) {
        v = dilate ? (v | in(y, k)) : (v & in(y, k));
      }
      tmp(y, x) = v;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = dilate ? 0 : 1;
      for (int k = std::max(0, y - r); k <= std::min(h - 1, y + r); ++k) {
        v = dilate ? (v | tmp(k, x)) : (v & tmp(k, x));
      }
      out(y, x) = v;
    }
  }
  return out;
}

inline std::size_t bin_of(const ConvergenceMap& c, std::size_t i) {
  const int by = std::clamp(static_cast<int>(std::lround(c.pos_y[i])), 0, c.height - 1);
  const int bx = std::clamp(static_cast<int>(std::lround(c.pos_x[i])), 0, c.width - 1);
  return static_cast<std::size_t>(by) * c.width + bx;
}

// Zeroes 4-connected regions smaller than min_area and renumbers the rest.
inline LabelMap drop_small_regions(const LabelMap& lm, int min_area) {
  LabelMap canon = canonicalize_labels(lm);
  const std::vector<std::uint64_t> areas = label_areas(canon);
  bool any = false;
  for (std::size_t id = 1; id < areas.size(); ++id) {
    if (areas[id] < static_cast<std::uint64_t>(min_area)) any = true;
  }
  if (!any) return canon;
  for (auto& v : canon.storage()) {
    if (v != 0 && areas[v] < static_cast<std::uint64_t>(min_area)) v = 0;
  }
  return canonicalize_labels(canon);
}

}  // namespace detail

// Rounds final positions to bins, closes the occupied-bin set with a square
// of half-width bin_closing_radius, and labels every source pixel with the
// 4-connected component of its bin. Regions smaller than min_instance_area
// become background; the result is canonical.
inline LabelMap cluster_sinks(const ConvergenceMap& c, const DynamicsParams& p) {
  p.validate();
  const std::size_t n = static_cast<std::size_t>(c.width) * c.height;
  if (n == 0) return LabelMap(c.width, c.height, 0u);
  LabelMap labels(c.width, c.height, 0u);
  {
    Mask occupied(c.width, c.height, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (c.active[i]) occupied[detail::bin_of(c, i)] = 1;
    }
    const Mask closed = detail::morph_square(
        detail::morph_square(occupied, p.bin_closing_radius, true), p.bin_closing_radius, false);
    const LabelMap components = label_components(closed);
    for (std::size_t i = 0; i < n; ++i) {
      if (c.active[i]) labels[i] = components[detail::bin_of(c, i)];
    }
  }
  return detail::drop_small_regions(labels, p.min_instance_area);
}

inline LabelMap segment(const FlowField& f, const DynamicsParams& p = {}, int threads = 0) {
  return cluster_sinks(follow_flows(f, p, threads), p);
}

}  // namespace micrometry
