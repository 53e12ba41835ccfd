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

// Ground-truth flow fields from labeled masks: each instance diffuses heat
// from an interior center, and the flow is the normalized gradient of the
// log-heat.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "micrometry/error.hpp"
#include "micrometry/imagecore.hpp"
#include "micrometry/parallel.hpp"

namespace micrometry {

struct FlowGenParams {
  double iterations_factor = 2.0;  // multiplies the instance bbox diagonal
  int max_iterations = 2000;

  void validate() const {
    if (!(iterations_factor > 0.0)) {
      throw Error(ErrorCode::invalid_argument, "iterations_factor must be > 0");
    }
    if (max_iterations < 1) {
      throw Error(ErrorCode::invalid_argument, "max_iterations must be >= 1");
    }
  }
};

// Heat values are kept in double precision: far from the source they decay
// by many orders of magnitude and the log-gradient needs them resolved.
using HeatMap = Grid<double>;

inline int diffusion_iterations(int width, int height, const FlowGenParams& p) {
  const double diag = std::sqrt(static_cast<double>(width) * width +
                                static_cast<double>(height) * height);
  const double n = std::ceil(p.iterations_factor * diag);
  return static_cast<int>(std::min<double>(p.max_iterations, std::max(1.0, n)));
}

// City-block distance to the nearest background pixel; pixels outside the
// grid count as background.
inline Grid<int> city_block_distance(const Mask& mask) {
  const int w = mask.width(), h = mask.height();
  const int inf = std::numeric_limits<int>::max() / 2;
  Grid<int> d(w, h, 0);
  for (std::size_t i = 0; i < mask.size(); ++i) d[i] = mask[i] ? inf : 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask(y, x)) continue;
      const int up = y > 0 ? d(y - 1, x) : 0;
      const int left = x > 0 ? d(y, x - 1) : 0;
      d(y, x) = std::min(d(y, x), std::min(up, left) + 1);
    }
  }
  for (int y = h - 1; y >= 0; --y) {
    for (int x = w - 1; x >= 0; --x) {
      if (!mask(y, x)) continue;
      const int down = y + 1 < h ? d(y + 1, x) : 0;
      const int right = x + 1 < w ? d(y, x + 1) : 0;
      d(y, x) = std::min(d(y, x), std::min(down, right) + 1);
    }
  }
  return d;
}

// The mask pixel farthest (city-block) from the background. Among equally
// deep pixels the one nearest the mean of that set wins, then the smallest
// raster index; the result always lies inside the mask.
inline Pixel instance_center(const Mask& mask) {
  const Grid<int> d = city_block_distance(mask);
  int best = 0;
  for (std::size_t i = 0; i < d.size(); ++i) best = std::max(best, d[i]);
  if (best == 0) throw Error(ErrorCode::empty_input, "instance_center: empty mask");

  long long n = 0, sy = 0, sx = 0;
  for (int y = 0; y < d.height(); ++y) {
    for (int x = 0; x < d.width(); ++x) {
      if (d(y, x) == best) {
        ++n;
        sy += y;
        sx += x;
      }
    }
  }
  Pixel center{};
  long long best_dist = std::numeric_limits<long long>::max();
  for (int y = 0; y < d.height(); ++y) {
    for (int x = 0; x < d.width(); ++x) {
      if (d(y, x) != best) continue;
      // distance to the mean, scaled by n to stay in integers
      const long long ey = n * y - sy, ex = n * x - sx;
      const long long dist = ey * ey + ex * ex;
      if (dist < best_dist) {
        best_dist = dist;
        center = {y, x};
      }
    }
  }
  return center;
}

// Zhang-Suen thinning to a fixpoint.
inline Mask skeletonize(const Mask& mask) {
  const int w = mask.width(), h = mask.height();
  // one pixel of background padding so neighborhoods never leave the grid
  Mask img(w + 2, h + 2, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) img(y + 1, x + 1) = mask(y, x) ? 1 : 0;
  }
  std::vector<std::size_t> doomed;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      doomed.clear();
      for (int y = 1; y <= h; ++y) {
        for (int x = 1; x <= w; ++x) {
          if (!img(y, x)) continue;
          // P2..P9 clockwise from north
          const int p[8] = {img(y - 1, x),     img(y - 1, x + 1), img(y, x + 1),
                            img(y + 1, x + 1), img(y + 1, x),     img(y + 1, x - 1),
                            img(y, x - 1),     img(y - 1, x - 1)};
          int b = 0, a = 0;
          for (int k = 0; k < 8; ++k) {
            b += p[k];
            if (p[k] == 0 && p[(k + 1) % 8] == 1) ++a;
          }
          if (b < 2 || b > 6 || a != 1) continue;
          if (pass == 0) {
            if (p[0] * p[2] * p[4] != 0 || p[2] * p[4] * p[6] != 0) continue;
          } else {
            if (p[0] * p[2] * p[6] != 0 || p[0] * p[4] * p[6] != 0) continue;
          }
          doomed.push_back(img.index(y, x));
        }
      }
      for (std::size_t i : doomed) img[i] = 0;
      if (!doomed.empty()) changed = true;
    }
  }
  Mask out(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out(y, x) = img(y + 1, x + 1);
  }
  return out;
}

// Relaxation confined to the mask: each iteration injects 1.0 at the center,
// then every mask pixel takes the mean of itself and its in-mask 4-neighbors.
inline HeatMap diffuse_heat(const Mask& mask, Pixel center, const FlowGenParams& params) {
  params.validate();
  if (!mask.in_bounds(center.y, center.x) || !mask(center.y, center.x)) {
    throw Error(ErrorCode::invalid_argument, "diffuse_heat: center outside mask");
  }
  const int w = mask.width(), h = mask.height();

  // compact indexing of mask pixels with their in-mask neighbors
  Grid<int> slot(w, h, -1);
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) {
      slot[i] = static_cast<int>(where.size());
      where.push_back(i);
    }
  }
  const std::size_t n = where.size();
  std::vector<std::int32_t> nbr(n * 4, -1);
  std::vector<double> inv(n);
  for (std::size_t k = 0; k < n; ++k) {
    const int y = static_cast<int>(where[k] / w), x = static_cast<int>(where[k] % w);
    int c = 0;
    auto add = [&](int yy, int xx) {
      if (yy >= 0 && xx >= 0 && yy < h && xx < w && slot(yy, xx) >= 0) {
        nbr[k * 4 + c++] = slot(yy, xx);
      }
    };
    add(y - 1, x);
    add(y + 1, x);
    add(y, x - 1);
    add(y, x + 1);
    inv[k] = 1.0 / (1 + c);
  }
  const auto source = static_cast<std::size_t>(slot(center.y, center.x));

  std::vector<double> cur(n, 0.0), next(n, 0.0);
  const int iterations = diffusion_iterations(w, h, params);
  for (int it = 0; it < iterations; ++it) {
    cur[source] += 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      double s = cur[k];
      const std::int32_t* nb = &nbr[k * 4];
      for (int c = 0; c < 4 && nb[c] >= 0; ++c) s += cur[static_cast<std::size_t>(nb[c])];
      next[k] = s * inv[k];
    }
    cur.swap(next);
  }

  HeatMap heat(w, h, 0.0);
  for (std::size_t k = 0; k < n; ++k) heat[where[k]] = cur[k];
  return heat;
}

inline constexpr double kLogHeatEpsilon = 1e-20;
inline constexpr double kMinGradient = 1e-12;

struct InstanceFlow {
  Grid<float> dy;
  Grid<float> dx;
  Pixel center;
};

// Flow for one instance mask (typically a bbox crop). Central differences of
// log(heat + eps); neighbors outside the mask take the pixel's own value.
inline InstanceFlow instance_flow(const Mask& mask, const FlowGenParams& params) {
  const Pixel center = instance_center(mask);
  const HeatMap heat = diffuse_heat(mask, center, params);
  const int w = mask.width(), h = mask.height();
  Grid<double> logh(w, h, 0.0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) logh[i] = std::log(heat[i] + kLogHeatEpsilon);
  }
  InstanceFlow out{Grid<float>(w, h, 0.0f), Grid<float>(w, h, 0.0f), center};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask(y, x)) continue;
      const double self = logh(y, x);
      auto value = [&](int yy, int xx) {
        return (yy >= 0 && xx >= 0 && yy < h && xx < w && mask(yy, xx)) ? logh(yy, xx) : self;
      };
      const double gy = 0.5 * (value(y + 1, x) - value(y - 1, x));
      const double gx = 0.5 * (value(y, x + 1) - value(y, x - 1));
      const double norm = std::sqrt(gy * gy + gx * gx);
      if (norm < kMinGradient || (y == center.y && x == center.x)) continue;
      out.dy(y, x) = static_cast<float>(gy / norm);
      out.dx(y, x) = static_cast<float>(gx / norm);
    }
  }
  return out;
}

// Ground-truth flow field for a canonical label map. Instances are processed
// independently on their bounding-box crops, so the result does not depend
// on processing order or thread count.
inline FlowField labels_to_flows(const LabelMap& lm, const FlowGenParams& params = {},
                                 int threads = 0) {
  params.validate();
  FlowField flow(lm.width(), lm.height());
  const std::vector<Rect> boxes = label_boxes(lm);
  parallel_for(boxes.size() > 0 ? boxes.size() - 1 : 0, threads, [&](std::size_t k) {
    const auto id = static_cast<std::uint32_t>(k + 1);
    const Rect& box = boxes[id];
    if (box.empty()) return;
    const Mask crop = crop_instance(lm, id, box);
    const InstanceFlow f = instance_flow(crop, params);
    for (int y = 0; y < box.h; ++y) {
      for (int x = 0; x < box.w; ++x) {
        if (!crop(y, x)) continue;
        const std::size_t i = lm.index(box.y + y, box.x + x);
        flow.dy[i] = f.dy(y, x);
        flow.dx[i] = f.dx(y, x);
        flow.fg[i] = 1.0f;
      }
    }
  });
  return flow;
}

}  // namespace micrometry
