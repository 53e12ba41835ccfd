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

// Seeded procedural test data: labeled particle scenes and images carrying
// a scale bar with known endpoints and label text. Geometry is rasterized
// with integer arithmetic so identical specs give identical bytes.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "micrometry/bitmap_font.hpp"
#include "micrometry/error.hpp"
#include "micrometry/imagecore.hpp"
#include "micrometry/scalebar.hpp"

namespace micrometry {

// Thin deterministic layer over mt19937_64 (whose output sequence is fixed by
// the standard; the standard distributions are not, so they are avoided).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(next());
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t v;
    do {
      v = next();
    } while (v >= limit);
    return lo + static_cast<std::int64_t>(v % range);
  }

  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Irwin-Hall approximation (sum of 12 uniforms); only exact IEEE ops.
  double normal() {
    double s = 0;
    for (int i = 0; i < 12; ++i) s += uniform01();
    return s - 6.0;
  }

  bool coin() { return (next() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
};

// Splits one seed into independent streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Particle scenes

enum class ParticleShape { disk, ellipse, polygon };
enum class Texture { flat, noisy, shaded };

struct SceneSpec {
  int width = 512;
  int height = 512;
  int particle_count = 50;
  int particle_count_max = 0;  // > particle_count: count drawn from the seed
  ParticleShape shape = ParticleShape::disk;
  double log_mean = 3.2;       // ln of the equivalent diameter in px
  double log_sigma = 0.35;
  double diameter_min = 4.0;
  double diameter_max = 0.0;   // 0: min(width, height) / 2
  double max_pairwise_iou = 0.0;
  Texture texture = Texture::flat;
  double noise_sigma = 8.0;
  int background_gray = 96;
  int gray_min = 0;            // particle intensities stay within these
  int gray_max = 255;
  int min_visible_area = 32;
  int max_attempts = 100;
  std::uint64_t seed = 0;

  double effective_max_diameter() const {
    const double cap = std::min(width, height) / 2.0;
    return diameter_max > 0 ? std::min(diameter_max, cap) : cap;
  }

  void validate() const {
    if (width < 1 || height < 1) throw Error(ErrorCode::invalid_argument, "scene must be >= 1x1");
    if (particle_count < 0) throw Error(ErrorCode::invalid_argument, "negative particle count");
    if (particle_count > 0 && std::min(width, height) / 2.0 < 4.0) {
      throw Error(ErrorCode::invalid_argument, "canvas too small for any particle");
    }
    if (max_pairwise_iou < 0 || max_pairwise_iou >= 1) {
      throw Error(ErrorCode::invalid_argument, "max_pairwise_iou must lie in [0, 1)");
    }
    if (log_sigma < 0) throw Error(ErrorCode::invalid_argument, "log_sigma must be >= 0");
    if (background_gray < 0 || background_gray > 255 || gray_min < 0 || gray_max > 255 ||
        gray_min > gray_max) {
      throw Error(ErrorCode::invalid_argument, "gray levels out of range");
    }
    if (max_attempts < 1) throw Error(ErrorCode::invalid_argument, "max_attempts must be >= 1");
  }
};

struct ParticleTruth {
  std::uint32_t id = 0;      // canonical label id
  int source_index = 0;      // placement order
  int center_y = 0;
  int center_x = 0;
  double nominal_diameter = 0;
  bool touches_edge = false;
};

struct SceneTruth {
  LabelMap label_map;
  std::vector<ParticleTruth> particles;  // one per canonical id, by id
  int requested = 0;
  int placed = 0;
};

struct Scene {
  Raster8 image;
  SceneTruth truth;
};

namespace detail {

inline constexpr int kSub = 16;        // geometry in 1/16 px
inline constexpr int kTrigScale = 4096;

inline int quantized_trig(double v) { return static_cast<int>(std::lround(v * kTrigScale)); }

struct Shape {
  ParticleShape kind = ParticleShape::disk;
  int cy = 0, cx = 0;        // center pixel
  int d16 = 0;               // nominal diameter in 1/16 px
  int a16 = 0, b16 = 0;      // ellipse semi-axes
  int cos_q = kTrigScale, sin_q = 0;
  std::vector<std::pair<long long, long long>> vertices;  // polygon, 1/16 px, (y, x)
  int reach = 0;             // bounding half-size in px
};

inline Shape make_shape(ParticleShape kind, int cy, int cx, double diameter, Rng& rng) {
  Shape s;
  s.kind = kind;
  s.cy = cy;
  s.cx = cx;
  s.d16 = static_cast<int>(std::lround(diameter * kSub));
  const double r = diameter / 2.0;
  switch (kind) {
    case ParticleShape::disk:
      s.reach = static_cast<int>(std::ceil(r)) + 1;
      break;
    case ParticleShape::ellipse: {
      const double ratio = rng.uniform(1.0, 2.5);
      const double a = r * std::sqrt(ratio), b = r / std::sqrt(ratio);
      s.a16 = std::max(kSub, static_cast<int>(std::lround(a * kSub)));
      s.b16 = std::max(kSub, static_cast<int>(std::lround(b * kSub)));
      const double theta = rng.uniform(0.0, std::numbers::pi);
      s.cos_q = quantized_trig(std::cos(theta));
      s.sin_q = quantized_trig(std::sin(theta));
      s.reach = static_cast<int>(std::ceil(a)) + 1;
      break;
    }
    case ParticleShape::polygon: {
      const int k = static_cast<int>(rng.uniform_int(5, 9));
      const double step = 2.0 * std::numbers::pi / k;
      const double base = rng.uniform(0.0, step);
      std::vector<double> angles(k);
      for (int i = 0; i < k; ++i) angles[i] = base + i * step + rng.uniform(-0.3, 0.3) * step;
      // scale the inscribed polygon to the nominal equivalent area
      double area = 0;
      for (int i = 0; i < k; ++i) area += 0.5 * std::sin(angles[(i + 1) % k] - angles[i] +
                                                         (i + 1 == k ? 2 * std::numbers::pi : 0));
      const double radius = r * std::sqrt(std::numbers::pi / area);
      for (int i = 0; i < k; ++i) {
        s.vertices.emplace_back(std::llround(radius * std::sin(angles[i]) * kSub),
                                std::llround(radius * std::cos(angles[i]) * kSub));
      }
      s.reach = static_cast<int>(std::ceil(radius)) + 1;
      break;
    }
  }
  return s;
}

inline bool shape_contains(const Shape& s, int dy, int dx) {
  switch (s.kind) {
    case ParticleShape::disk: {
      const long long d2 = 4LL * (static_cast<long long>(dy) * dy + static_cast<long long>(dx) * dx);
      return d2 * kSub * kSub <= static_cast<long long>(s.d16) * s.d16;
    }
    case ParticleShape::ellipse: {
      const __int128 y = static_cast<__int128>(dy) * kSub, x = static_cast<__int128>(dx) * kSub;
      const __int128 u = x * s.cos_q + y * s.sin_q;
      const __int128 v = -x * s.sin_q + y * s.cos_q;
      const __int128 a = s.a16, b = s.b16;
      const __int128 lhs = u * u * b * b + v * v * a * a;
      const __int128 rhs = a * a * b * b * kTrigScale * kTrigScale;
      return lhs <= rhs;
    }
    case ParticleShape::polygon: {
      const long long py = static_cast<long long>(dy) * kSub, px = static_cast<long long>(dx) * kSub;
      int sign = 0;
      const std::size_t n = s.vertices.size();
      for (std::size_t i = 0; i < n; ++i) {
        const auto [ay, ax] = s.vertices[i];
        const auto [by, bx] = s.vertices[(i + 1) % n];
        const long long cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
        const int sg = cross > 0 ? 1 : (cross < 0 ? -1 : 0);
        if (sg == 0) continue;
        if (sign == 0) sign = sg;
        if (sg != sign) return false;
      }
      return true;
    }
  }
  return false;
}

// Clipped pixel indices of a shape, row-major.
inline std::vector<std::size_t> rasterize(const Shape& s, int width, int height) {
  std::vector<std::size_t> px;
  for (int y = std::max(0, s.cy - s.reach); y <= std::min(height - 1, s.cy + s.reach); ++y) {
    for (int x = std::max(0, s.cx - s.reach); x <= std::min(width - 1, s.cx + s.reach); ++x) {
      if (shape_contains(s, y - s.cy, x - s.cx)) {
        px.push_back(static_cast<std::size_t>(y) * width + x);
      }
    }
  }
  return px;
}

inline bool four_connected(const std::vector<std::size_t>& px, int width) {
  if (px.empty()) return false;
  std::vector<std::uint8_t> seen(px.size(), 0);
  std::vector<std::size_t> stack{0};
  seen[0] = 1;
  std::size_t reached = 1;
  auto find = [&](std::size_t idx) -> std::ptrdiff_t {
    auto it = std::lower_bound(px.begin(), px.end(), idx);
    return (it != px.end() && *it == idx) ? it - px.begin() : -1;
  };
  while (!stack.empty()) {
    const std::size_t k = stack.back();
    stack.pop_back();
    const std::size_t i = px[k];
    const std::size_t x = i % width;
    const std::size_t cand[4] = {x > 0 ? i - 1 : SIZE_MAX, x + 1 < static_cast<std::size_t>(width) ? i + 1 : SIZE_MAX,
                                 i >= static_cast<std::size_t>(width) ? i - width : SIZE_MAX, i + width};
    for (std::size_t c : cand) {
      if (c == SIZE_MAX) continue;
      const std::ptrdiff_t j = find(c);
      if (j >= 0 && !seen[j]) {
        seen[j] = 1;
        ++reached;
        stack.push_back(static_cast<std::size_t>(j));
      }
    }
  }
  return reached == px.size();
}

inline std::size_t sorted_intersection(const std::vector<std::size_t>& a,
                                       const std::vector<std::size_t>& b) {
  std::size_t i = 0, j = 0, n = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

inline std::uint8_t clamp_gray(long long v) {
  return static_cast<std::uint8_t>(std::clamp<long long>(v, 0, 255));
}

inline int particle_gray(int background, int lo, int hi, Rng& rng) {
  const int offset = static_cast<int>(rng.uniform_int(30, 80));
  const bool up_ok = background + offset <= hi;
  const bool down_ok = background - offset >= lo;
  if (up_ok && down_ok) return rng.coin() ? background + offset : background - offset;
  if (up_ok) return background + offset;
  if (down_ok) return background - offset;
  // fall back to the farthest admissible level
  return (hi - background >= background - lo) ? hi : lo;
}

}  // namespace detail

inline int resolved_particle_count(const SceneSpec& spec) {
  if (spec.particle_count_max <= spec.particle_count) return spec.particle_count;
  Rng rng(derive_seed(spec.seed, 7));
  return static_cast<int>(rng.uniform_int(spec.particle_count, spec.particle_count_max));
}

// Rejection-sampled particle scene. Particles that cannot be placed within
// max_attempts are skipped (truth.placed < truth.requested). Later particles
// occlude earlier ones where overlap is allowed.
inline Scene gen_scene(const SceneSpec& spec) {
  spec.validate();
  const int w = spec.width, h = spec.height;
  Rng rng(derive_seed(spec.seed, 0));
  Rng gray_rng(derive_seed(spec.seed, 1));
  Rng noise_rng(derive_seed(spec.seed, 2));

  LabelMap raw(w, h, 0u);
  Raster8 image(w, h, 1, static_cast<std::uint8_t>(spec.background_gray));
  struct Placed {
    detail::Shape shape;
    std::vector<std::size_t> pixels;
    double diameter;
    Rect box;
  };
  std::vector<Placed> placed;
  const int requested = resolved_particle_count(spec);
  const double dmin = std::max(4.0, spec.diameter_min);
  const double dmax = std::max(dmin, spec.effective_max_diameter());

  for (int p = 0; p < requested; ++p) {
    for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
      double d = std::exp(spec.log_mean + spec.log_sigma * rng.normal());
      d = std::clamp(d, dmin, dmax);
      d = std::round(d * detail::kSub) / detail::kSub;
      const int cy = static_cast<int>(rng.uniform_int(0, h - 1));
      const int cx = static_cast<int>(rng.uniform_int(0, w - 1));
      detail::Shape shape = detail::make_shape(spec.shape, cy, cx, d, rng);
      std::vector<std::size_t> px = detail::rasterize(shape, w, h);
      if (static_cast<int>(px.size()) < spec.min_visible_area) continue;
      if (!detail::four_connected(px, w)) continue;
      const Rect box{std::max(0, cx - shape.reach), std::max(0, cy - shape.reach),
                     std::min(w - 1, cx + shape.reach) - std::max(0, cx - shape.reach) + 1,
                     std::min(h - 1, cy + shape.reach) - std::max(0, cy - shape.reach) + 1};
      bool ok = true;
      if (spec.max_pairwise_iou == 0.0) {
        for (std::size_t i : px) {
          if (raw[i] != 0) {
            ok = false;
            break;
          }
        }
      } else {
        for (const Placed& q : placed) {
          if (intersect(q.box, box).empty()) continue;
          const std::size_t inter = detail::sorted_intersection(px, q.pixels);
          if (inter == 0) continue;
          const double iou = static_cast<double>(inter) /
                             static_cast<double>(px.size() + q.pixels.size() - inter);
          if (iou > spec.max_pairwise_iou) {
            ok = false;
            break;
          }
        }
      }
      if (!ok) continue;

      const auto id = static_cast<std::uint32_t>(placed.size() + 1);
      const int gray = detail::particle_gray(spec.background_gray, spec.gray_min, spec.gray_max,
                                             gray_rng);
      const long long r2 = std::max<long long>(1, static_cast<long long>(shape.reach) * shape.reach);
      for (std::size_t i : px) {
        raw[i] = id;
        long long g = gray;
        if (spec.texture == Texture::shaded) {
          const long long dy = static_cast<long long>(i / w) - cy;
          const long long dx = static_cast<long long>(i % w) - cx;
          // fade halfway toward the background at the rim
          g = gray + (spec.background_gray - gray) * std::min(r2, dy * dy + dx * dx) / (2 * r2);
        }
        image.at(static_cast<int>(i / w), static_cast<int>(i % w)) = detail::clamp_gray(g);
      }
      placed.push_back({std::move(shape), std::move(px), d, box});
      break;
    }
  }

  if (spec.texture == Texture::noisy && spec.noise_sigma > 0) {
    for (auto& v : image.data()) {
      v = detail::clamp_gray(v + std::llround(spec.noise_sigma * noise_rng.normal()));
    }
  }

  Scene scene;
  scene.image = std::move(image);
  scene.truth.label_map = canonicalize_labels(raw);
  scene.truth.requested = requested;
  scene.truth.placed = static_cast<int>(placed.size());
  const LabelMap& lm = scene.truth.label_map;
  const std::uint32_t k = max_label(lm);
  scene.truth.particles.resize(k);
  std::vector<std::uint8_t> seen(k + 1, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint32_t id = lm(y, x);
      if (id == 0) continue;
      ParticleTruth& t = scene.truth.particles[id - 1];
      if (!seen[id]) {
        seen[id] = 1;
        const std::uint32_t src = raw(y, x);
        const Placed& q = placed[src - 1];
        t.id = id;
        t.source_index = static_cast<int>(src - 1);
        t.center_y = q.shape.cy;
        t.center_x = q.shape.cx;
        t.nominal_diameter = q.diameter;
      }
      if (y == 0 || x == 0 || y == h - 1 || x == w - 1) t.touches_edge = true;
    }
  }
  return scene;
}

// ---------------------------------------------------------------------------
// Scale-bar images

enum class BarStyle { plain, end_ticks, panel };
enum class Polarity { light_on_dark, dark_on_light };

struct ScaleBarSpec {
  int canvas_w = 640;
  int canvas_h = 480;
  int bar_length_px = 200;
  int bar_thickness = 4;
  BarStyle style = BarStyle::plain;
  Polarity polarity = Polarity::light_on_dark;
  double value = 5;
  Unit unit = Unit::um;
  int font_scale = 2;
  bool scene_background = true;
  bool space_before_unit = true;
  int clear_halo = 16;  // cleared strip around non-panel bars; 0 disables
  std::uint64_t seed = 0;

  void validate() const {
    if (canvas_w < 32 || canvas_h < 32) {
      throw Error(ErrorCode::invalid_argument, "scale-bar canvas must be at least 32x32");
    }
    const int max_len = std::min(static_cast<int>(0.8 * canvas_w), 1000);
    if (bar_length_px < 20 || bar_length_px > max_len) {
      throw Error(ErrorCode::invalid_argument, "bar length outside [20, min(0.8 w, 1000)]");
    }
    if (bar_thickness < 2 || bar_thickness > 12) {
      throw Error(ErrorCode::invalid_argument, "bar thickness outside [2, 12]");
    }
    if (font_scale < 1 || font_scale > 3) {
      throw Error(ErrorCode::invalid_argument, "font scale outside [1, 3]");
    }
    if (!(value > 0)) throw Error(ErrorCode::invalid_argument, "scale value must be positive");
    if (clear_halo < 0) throw Error(ErrorCode::invalid_argument, "clear_halo must be >= 0");
  }
};

struct ScaleBarTruth {
  Rect bar_bbox;     // tight box of every bar pixel (ticks included)
  int x_left = 0;
  int x_right = 0;
  int pixel_length = 0;  // drawn column count
  std::string text;
  Rect text_bbox;
  double value = 0;
  Unit unit = Unit::um;
};

struct ScaleBarImage {
  Raster8 image;
  ScaleBarTruth truth;
};

inline std::string format_scale_value(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) return std::to_string(static_cast<long long>(v));
  std::string s = std::to_string(v);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

inline std::string scale_label(const ScaleBarSpec& spec) {
  return format_scale_value(spec.value) + (spec.space_before_unit ? " " : "") +
         unit_symbol(spec.unit);
}

inline int tick_width(int thickness) { return std::max(1, thickness / 2); }
inline int tick_extension(int thickness) { return std::max(2, thickness / 2 + 1); }

// Draws the bar and its label onto an existing image. Bar and text colours
// come from the polarity; the panel style first fills a contrasting box.
// Without a panel, a strip of `clear_gray` spec.clear_halo px wide is painted
// around the bar first (instruments stamp the bar on a cleared strip).
inline ScaleBarTruth draw_scalebar(Raster8& img, const ScaleBarSpec& spec,
                                   std::uint8_t clear_gray) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, 11));
  const int w = img.width(), h = img.height();
  const bool light = spec.polarity == Polarity::light_on_dark;
  const auto ink = static_cast<std::uint8_t>(light ? rng.uniform_int(240, 255) : rng.uniform_int(0, 15));
  const auto panel_gray =
      static_cast<std::uint8_t>(light ? rng.uniform_int(0, 20) : rng.uniform_int(235, 255));

  const std::string text = scale_label(spec);
  const int text_w = font::text_width(text, spec.font_scale);
  const int text_h = font::text_height(spec.font_scale);
  const int ext = spec.style == BarStyle::end_ticks ? tick_extension(spec.bar_thickness) : 0;
  const int bar_block_h = spec.bar_thickness + 2 * ext;
  const int gap = 3 + spec.font_scale;
  const int block_w = std::max(spec.bar_length_px, text_w);
  const int block_h = text_h + gap + bar_block_h;
  const int pad = spec.style == BarStyle::panel ? 6 : 0;
  const int margin = 8 + pad;
  if (block_w + 2 * margin > w || block_h + 2 * margin > h) {
    throw Error(ErrorCode::invalid_argument, "scale-bar text layout overflows the canvas");
  }
  const int block_x = static_cast<int>(rng.uniform_int(margin, w - margin - block_w));
  const int block_y = static_cast<int>(rng.uniform_int(margin, h - margin - block_h));
  const bool text_above = rng.coin();

  const int bar_x = block_x + (block_w - spec.bar_length_px) / 2;
  const int text_x = block_x + (block_w - text_w) / 2;
  const int bar_top = text_above ? block_y + text_h + gap + ext : block_y + ext;
  const int text_y = text_above ? block_y : block_y + bar_block_h + gap;

  if (spec.style == BarStyle::panel) {
    for (int y = block_y - pad; y < block_y + block_h + pad; ++y) {
      for (int x = block_x - pad; x < block_x + block_w + pad; ++x) img.set(y, x, panel_gray);
    }
  }
  if (spec.style != BarStyle::panel && spec.clear_halo > 0) {
    const int y0 = std::max(0, bar_top - ext - spec.clear_halo);
    const int y1 = std::min(h, bar_top + spec.bar_thickness + ext + spec.clear_halo);
    const int x0 = std::max(0, bar_x - spec.clear_halo);
    const int x1 = std::min(w, bar_x + spec.bar_length_px + spec.clear_halo);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) img.set(y, x, clear_gray);
    }
  }
  for (int y = bar_top; y < bar_top + spec.bar_thickness; ++y) {
    for (int x = bar_x; x < bar_x + spec.bar_length_px; ++x) img.set(y, x, ink);
  }
  const int x_right = bar_x + spec.bar_length_px - 1;
  if (spec.style == BarStyle::end_ticks) {
    const int tw = tick_width(spec.bar_thickness);
    for (int y = bar_top - ext; y < bar_top + spec.bar_thickness + ext; ++y) {
      for (int k = 0; k < tw; ++k) {
        img.set(y, bar_x + k, ink);
        img.set(y, x_right - k, ink);
      }
    }
  }
  font::render_text(text, text_y, text_x, spec.font_scale,
                    [&](int y, int x) { img.set(y, x, ink); });

  ScaleBarTruth t;
  t.bar_bbox = {bar_x, bar_top - ext, spec.bar_length_px, bar_block_h};
  t.x_left = bar_x;
  t.x_right = x_right;
  t.pixel_length = spec.bar_length_px;
  t.text = text;
  t.text_bbox = {text_x, text_y, text_w, text_h};
  t.value = spec.value;
  t.unit = spec.unit;
  return t;
}

// Background (particle scene or flat panel) plus one scale bar and label.
inline ScaleBarImage gen_scalebar_image(const ScaleBarSpec& spec) {
  spec.validate();
  const bool light = spec.polarity == Polarity::light_on_dark;
  Rng rng(derive_seed(spec.seed, 10));
  const int bg = static_cast<int>(light ? rng.uniform_int(50, 120) : rng.uniform_int(140, 200));
  ScaleBarImage out;
  if (spec.scene_background) {
    SceneSpec scene;
    scene.width = spec.canvas_w;
    scene.height = spec.canvas_h;
    scene.particle_count =
        std::max(1, static_cast<int>(static_cast<long long>(spec.canvas_w) * spec.canvas_h / 5000));
    scene.shape = static_cast<ParticleShape>(rng.uniform_int(0, 2));
    scene.log_mean = std::log(rng.uniform(10.0, 40.0));
    scene.texture = static_cast<Texture>(rng.uniform_int(0, 2));
    scene.noise_sigma = static_cast<double>(rng.uniform_int(2, 6));
    scene.background_gray = bg;
    scene.gray_min = light ? 20 : 70;
    scene.gray_max = light ? 190 : 235;
    scene.max_pairwise_iou = 0.1;
    scene.min_visible_area = 8;
    scene.seed = derive_seed(spec.seed, 12);
    out.image = gen_scene(scene).image;
  } else {
    out.image = Raster8(spec.canvas_w, spec.canvas_h, 1, static_cast<std::uint8_t>(bg));
  }
  out.truth = draw_scalebar(out.image, spec, static_cast<std::uint8_t>(bg));
  return out;
}

// Ranges used when sampling a scale-bar corpus.
struct ScaleBarTemplate {
  int canvas_w = 640;
  int canvas_h = 480;
  int length_min = 40;
  int length_max = 400;
  int thickness_min = 2;
  int thickness_max = 12;
  int clear_halo = 16;

  void validate() const {
    if (canvas_w < 32 || canvas_h < 32) {
      throw Error(ErrorCode::invalid_argument, "scale-bar canvas must be at least 32x32");
    }
    if (length_min < 20 || length_max < length_min) {
      throw Error(ErrorCode::invalid_argument, "bar length range must satisfy 20 <= min <= max");
    }
    if (thickness_min < 2 || thickness_max > 12 || thickness_max < thickness_min) {
      throw Error(ErrorCode::invalid_argument, "thickness range must lie inside [2, 12]");
    }
    if (clear_halo < 0) throw Error(ErrorCode::invalid_argument, "clear_halo must be >= 0");
  }
};

inline ScaleBarSpec sample_scalebar_spec(const ScaleBarTemplate& t, std::uint64_t seed) {
  static constexpr double kValues[] = {1, 2, 5, 10, 20, 50, 100, 200, 500};
  static constexpr Unit kUnits[] = {Unit::nm, Unit::um, Unit::mm};
  t.validate();
  Rng rng(derive_seed(seed, 20));
  ScaleBarSpec s;
  s.clear_halo = t.clear_halo;
  s.canvas_w = t.canvas_w;
  s.canvas_h = t.canvas_h;
  s.seed = seed;
  const int max_len = std::min({t.length_max, static_cast<int>(0.8 * t.canvas_w), 1000});
  if (max_len < std::max(20, t.length_min)) {
    throw Error(ErrorCode::invalid_argument, "bar length range does not fit the canvas");
  }
  s.bar_length_px = static_cast<int>(rng.uniform_int(std::max(20, t.length_min), max_len));
  // keep the bar at least 8x longer than thick so it reads as a bar
  const int thick_cap = std::clamp(s.bar_length_px / 8, 2, t.thickness_max);
  s.bar_thickness = static_cast<int>(rng.uniform_int(std::max(2, t.thickness_min),
                                                     std::max(2, thick_cap)));
  s.style = static_cast<BarStyle>(rng.uniform_int(0, 2));
  s.polarity = rng.coin() ? Polarity::light_on_dark : Polarity::dark_on_light;
  s.value = kValues[rng.uniform_int(0, 8)];
  s.unit = kUnits[rng.uniform_int(0, 2)];
  s.font_scale = static_cast<int>(rng.uniform_int(1, 3));
  s.scene_background = rng.uniform_int(0, 3) != 0;
  s.space_before_unit = rng.coin();
  return s;
}

}  // namespace micrometry
