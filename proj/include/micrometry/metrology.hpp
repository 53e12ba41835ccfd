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

// Per-particle measurements, filtering and weighted distribution statistics.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "micrometry/error.hpp"
#include "micrometry/imagecore.hpp"
#include "micrometry/parallel.hpp"

namespace micrometry {

struct InstanceMetrics {
  std::uint32_t id = 0;
  double area_px = 0;
  double perimeter_px = 0;
  double diameter_px = 0;  // equivalent circular diameter
  double sphericity = 0;
  double aspect_ratio = 1;
  double smoothness = 1;
  double centroid_x = 0;
  double centroid_y = 0;
  bool touches_edge = false;
  std::optional<double> diameter_phys;  // nm, present iff calibrated

  friend bool operator==(const InstanceMetrics&, const InstanceMetrics&) = default;
};

// ---------------------------------------------------------------------------
// Contour geometry

struct PointD {
  double y = 0;
  double x = 0;
};

// Outer boundary of a binary mask by Moore-neighbor tracing (8-connected,
// clockwise, Jacob's stopping rule). Points are pixel centers in mask
// coordinates, starting at the first foreground pixel in raster order.
inline std::vector<Pixel> trace_boundary(const Mask& mask) {
  static constexpr int kDy[8] = {0, 1, 1, 1, 0, -1, -1, -1};
  static constexpr int kDx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
  const int w = mask.width(), h = mask.height();
  auto on = [&](int y, int x) { return y >= 0 && x >= 0 && y < h && x < w && mask(y, x); };

  std::vector<Pixel> pts;
  Pixel start{-1, -1};
  for (int y = 0; y < h && start.y < 0; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask(y, x)) {
        start = {y, x};
        break;
      }
    }
  }
  if (start.y < 0) return pts;

  auto next_dir = [&](Pixel cur, int d) {
    const int first = (d + 6) % 8;
    for (int k = 0; k < 8; ++k) {
      const int dd = (first + k) % 8;
      if (on(cur.y + kDy[dd], cur.x + kDx[dd])) return dd;
    }
    return -1;
  };

  pts.push_back(start);
  Pixel cur = start;
  int d = 7;
  int first_move = -1;
  const std::size_t guard = 4 * mask.size() + 8;
  while (pts.size() <= guard) {
    const int dd = next_dir(cur, d);
    if (dd < 0) return pts;  // isolated pixel
    if (cur == start && first_move >= 0 && dd == first_move) break;
    if (first_move < 0) first_move = dd;
    cur = {cur.y + kDy[dd], cur.x + kDx[dd]};
    d = dd;
    pts.push_back(cur);
  }
  pts.pop_back();  // the closing return to start
  return pts;
}

// Boundary length estimate: mean of two-step chords along the traced
// contour plus the half-pixel offset from pixel centers to the pixel edge
// (pi for a closed convex curve). Single-step chain lengths (1 and sqrt 2)
// overstate curved boundaries by about 5%.
inline double contour_perimeter(const std::vector<Pixel>& pts) {
  const std::size_t n = pts.size();
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Pixel& a = pts[i];
    const Pixel& b = pts[(i + 2) % n];
    sum += std::hypot(static_cast<double>(b.y - a.y), static_cast<double>(b.x - a.x));
  }
  return 0.5 * sum + std::numbers::pi;
}

// Convex hull (monotone chain), counter-clockwise without collinear points.
inline std::vector<Pixel> convex_hull(std::vector<Pixel> pts) {
  std::sort(pts.begin(), pts.end(), [](const Pixel& a, const Pixel& b) {
    return a.x != b.x ? a.x < b.x : a.y < b.y;
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](const Pixel& o, const Pixel& a, const Pixel& b) {
    return static_cast<long long>(a.x - o.x) * (b.y - o.y) -
           static_cast<long long>(a.y - o.y) * (b.x - o.x);
  };
  std::vector<Pixel> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Pixel& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

inline double hull_perimeter(const std::vector<Pixel>& hull) {
  double sum = 0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Pixel& a = hull[i];
    const Pixel& b = hull[(i + 1) % hull.size()];
    sum += std::hypot(static_cast<double>(b.y - a.y), static_cast<double>(b.x - a.x));
  }
  if (hull.size() == 2) sum *= 0.5;  // the loop walked the segment twice
  return sum + std::numbers::pi;
}

// ---------------------------------------------------------------------------
// Measurement

// Measures one instance given its crop and the crop's offset in the image.
inline InstanceMetrics measure_instance(const Mask& crop, const Rect& box, int image_w,
                                        int image_h, std::uint32_t id) {
  InstanceMetrics m;
  m.id = id;
  double n = 0, sy = 0, sx = 0;
  for (int y = 0; y < crop.height(); ++y) {
    for (int x = 0; x < crop.width(); ++x) {
      if (!crop(y, x)) continue;
      n += 1;
      sy += y;
      sx += x;
      const int gy = box.y + y, gx = box.x + x;
      if (gy == 0 || gx == 0 || gy == image_h - 1 || gx == image_w - 1) m.touches_edge = true;
    }
  }
  if (n == 0) return m;
  const double cy = sy / n, cx = sx / n;
  double myy = 0, mxx = 0, mxy = 0;
  for (int y = 0; y < crop.height(); ++y) {
    for (int x = 0; x < crop.width(); ++x) {
      if (!crop(y, x)) continue;
      const double dy = y - cy, dx = x - cx;
      myy += dy * dy;
      mxx += dx * dx;
      mxy += dx * dy;
    }
  }
  myy /= n;
  mxx /= n;
  mxy /= n;
  const double tr = 0.5 * (myy + mxx);
  const double disc = std::sqrt(std::max(0.0, 0.25 * (myy - mxx) * (myy - mxx) + mxy * mxy));
  const double lambda_major = tr + disc;
  const double lambda_minor = std::max(0.0, tr - disc);
  // full axis lengths of the moment-equivalent ellipse, clamped for lines
  const double major = std::max(0.5, 4.0 * std::sqrt(lambda_major));
  const double minor = std::max(0.5, 4.0 * std::sqrt(lambda_minor));

  const std::vector<Pixel> contour = trace_boundary(crop);
  const double perimeter = contour_perimeter(contour);

  m.area_px = n;
  m.perimeter_px = perimeter;
  m.diameter_px = 2.0 * std::sqrt(n / std::numbers::pi);
  m.sphericity = std::min(1.0, 4.0 * std::numbers::pi * n / (perimeter * perimeter));
  m.aspect_ratio = major / minor;
  m.smoothness = std::min(1.0, hull_perimeter(convex_hull(contour)) / perimeter);
  m.centroid_x = box.x + cx;
  m.centroid_y = box.y + cy;
  return m;
}

// One record per instance of a canonical label map, ordered by id.
// nm_per_pixel, when given, fills diameter_phys (nm).
inline std::vector<InstanceMetrics> measure_all(const LabelMap& lm,
                                                std::optional<double> nm_per_pixel = {},
                                                int threads = 0) {
  const std::vector<Rect> boxes = label_boxes(lm);
  const std::size_t k = boxes.empty() ? 0 : boxes.size() - 1;
  std::vector<InstanceMetrics> out(k);
  parallel_for(k, threads, [&](std::size_t i) {
    const auto id = static_cast<std::uint32_t>(i + 1);
    if (boxes[id].empty()) {
      out[i].id = id;
      return;
    }
    out[i] = measure_instance(crop_instance(lm, id, boxes[id]), boxes[id], lm.width(),
                              lm.height(), id);
    if (nm_per_pixel) out[i].diameter_phys = out[i].diameter_px * *nm_per_pixel;
  });
  std::erase_if(out, [](const InstanceMetrics& m) { return m.area_px == 0; });
  return out;
}

// ---------------------------------------------------------------------------
// Filtering

enum class LengthUnit { px, nm };

struct FilterCriteria {
  std::optional<double> diameter_min;
  std::optional<double> diameter_max;
  LengthUnit unit = LengthUnit::px;  // nm bounds compare against diameter_phys
  bool exclude_edge = false;

  void validate() const {
    if (diameter_min && diameter_max && *diameter_min > *diameter_max) {
      throw Error(ErrorCode::invalid_argument, "diameter_min exceeds diameter_max");
    }
  }
  bool is_identity() const { return !diameter_min && !diameter_max && !exclude_edge; }
  friend bool operator==(const FilterCriteria&, const FilterCriteria&) = default;
};

inline bool passes(const InstanceMetrics& m, const FilterCriteria& fc) {
  if (fc.exclude_edge && m.touches_edge) return false;
  if (!fc.diameter_min && !fc.diameter_max) return true;
  double d = m.diameter_px;
  if (fc.unit == LengthUnit::nm) {
    if (!m.diameter_phys) {
      throw Error(ErrorCode::unit_mismatch, "physical diameter bounds need a calibration");
    }
    d = *m.diameter_phys;
  }
  if (fc.diameter_min && d < *fc.diameter_min) return false;
  if (fc.diameter_max && d > *fc.diameter_max) return false;
  return true;
}

// Keeps records inside the inclusive diameter range (and off the image edge
// when requested); order is preserved.
inline std::vector<InstanceMetrics> filter_instances(const std::vector<InstanceMetrics>& metrics,
                                                     const FilterCriteria& fc) {
  fc.validate();
  if (fc.unit == LengthUnit::nm && (fc.diameter_min || fc.diameter_max)) {
    for (const auto& m : metrics) {
      if (!m.diameter_phys) {
        throw Error(ErrorCode::unit_mismatch, "physical diameter bounds need a calibration");
      }
    }
  }
  std::vector<InstanceMetrics> out;
  for (const auto& m : metrics) {
    if (passes(m, fc)) out.push_back(m);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Weighted statistics

struct StatsSummary {
  std::size_t count = 0;
  double min = 0;
  double max = 0;
  double mean = 0;
  double std = 0;  // population
  double p10 = 0;
  double p50 = 0;
  double p90 = 0;
  friend bool operator==(const StatsSummary&, const StatsSummary&) = default;
};

// Sorted distinct values with their summed weights.
struct WeightedSamples {
  std::vector<double> values;
  std::vector<double> weights;
};

inline WeightedSamples merge_samples(const std::vector<double>& values,
                                     const std::vector<double>& weights) {
  if (values.empty()) throw Error(ErrorCode::empty_input, "no samples");
  if (weights.size() != values.size()) {
    throw Error(ErrorCode::dimension_mismatch, "values and weights differ in length");
  }
  std::vector<std::size_t> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (!(weights[i] > 0) || !std::isfinite(weights[i]) || !std::isfinite(values[i])) {
      throw Error(ErrorCode::invalid_argument, "weights must be positive and values finite");
    }
    order[i] = i;
  }
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  WeightedSamples s;
  for (std::size_t i : order) {
    if (!s.values.empty() && s.values.back() == values[i]) {
      s.weights.back() += weights[i];
    } else {
      s.values.push_back(values[i]);
      s.weights.push_back(weights[i]);
    }
  }
  return s;
}

// Percentile by linear interpolation on the weighted cumulative distribution.
// Distinct value i sits at the midpoint of its normalized weight mass m_i;
// positions are then mapped by (m_i - 1/2n) * n / (n - 1), which puts equal
// weights exactly at i / (n - 1) (the familiar (n - 1) * q rule) while
// unequal weights shift mass toward heavier values. Queries outside the
// first/last position clamp to min/max.
inline double weighted_percentile(const WeightedSamples& s, double q) {
  const std::size_t n = s.values.size();
  if (n == 1) return s.values[0];
  double total = 0;
  for (double w : s.weights) total += w;
  const double nd = static_cast<double>(n);
  auto position = [&](double cum_before, double w) {
    const double mid = (cum_before + 0.5 * w) / total;
    return (mid - 0.5 / nd) * nd / (nd - 1.0);
  };
  q = std::clamp(q, 0.0, 1.0);
  double cum = 0;
  double prev = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = position(cum, s.weights[i]);
    if (q <= pos) {
      if (i == 0) return s.values[0];
      const double t = (q - prev) / (pos - prev);
      return s.values[i - 1] + t * (s.values[i] - s.values[i - 1]);
    }
    prev = pos;
    cum += s.weights[i];
  }
  return s.values.back();
}

inline double weighted_percentile(const std::vector<double>& values,
                                  const std::vector<double>& weights, double q) {
  return weighted_percentile(merge_samples(values, weights), q);
}

inline StatsSummary summarize(const std::vector<double>& values,
                              const std::vector<double>& weights) {
  const WeightedSamples s = merge_samples(values, weights);
  StatsSummary out;
  out.count = values.size();
  out.min = s.values.front();
  out.max = s.values.back();
  double total = 0, acc = 0;
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    total += s.weights[i];
    acc += s.weights[i] * s.values[i];
  }
  out.mean = acc / total;
  double var = 0;
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const double d = s.values[i] - out.mean;
    var += s.weights[i] * d * d;
  }
  out.std = std::sqrt(var / total);
  out.p10 = weighted_percentile(s, 0.10);
  out.p50 = weighted_percentile(s, 0.50);
  out.p90 = weighted_percentile(s, 0.90);
  return out;
}

inline StatsSummary summarize(const std::vector<double>& values) {
  return summarize(values, std::vector<double>(values.size(), 1.0));
}

enum class Weighting { count, area, volume };

inline double weight_of(const InstanceMetrics& m, Weighting w) {
  switch (w) {
    case Weighting::count: return 1.0;
    case Weighting::area: return m.area_px;
    case Weighting::volume: return m.diameter_px * m.diameter_px * m.diameter_px;
  }
  return 1.0;
}

inline std::vector<double> weights_of(const std::vector<InstanceMetrics>& metrics, Weighting w) {
  std::vector<double> out;
  out.reserve(metrics.size());
  for (const auto& m : metrics) out.push_back(weight_of(m, w));
  return out;
}

// Physical diameter (nm) when every record is calibrated, else pixels.
inline std::vector<double> diameters_of(const std::vector<InstanceMetrics>& metrics) {
  const bool phys = !metrics.empty() && std::all_of(metrics.begin(), metrics.end(), [](const auto& m) {
    return m.diameter_phys.has_value();
  });
  std::vector<double> out;
  out.reserve(metrics.size());
  for (const auto& m : metrics) out.push_back(phys ? *m.diameter_phys : m.diameter_px);
  return out;
}

struct DiameterPercentiles {
  double d10 = 0;
  double d50 = 0;
  double d90 = 0;
};

inline DiameterPercentiles diameter_percentiles(const std::vector<InstanceMetrics>& metrics,
                                                Weighting w = Weighting::count) {
  if (metrics.empty()) throw Error(ErrorCode::empty_input, "no instances");
  const WeightedSamples s = merge_samples(diameters_of(metrics), weights_of(metrics, w));
  return {weighted_percentile(s, 0.10), weighted_percentile(s, 0.50),
          weighted_percentile(s, 0.90)};
}

struct Histogram {
  std::vector<double> edges;   // bins + 1 entries
  std::vector<double> counts;  // weighted
};

// Left-closed right-open bins from min to max, the last bin right-closed.
// Exactly one of bin_width > 0 or bin_count >= 1 selects the layout.
inline Histogram histogram(const std::vector<double>& values, const std::vector<double>& weights,
                           double bin_width, int bin_count = 0) {
  if (values.empty()) throw Error(ErrorCode::empty_input, "histogram of no values");
  if (weights.size() != values.size()) {
    throw Error(ErrorCode::dimension_mismatch, "values and weights differ in length");
  }
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  std::size_t bins = 1;
  if (bin_count >= 1) {
    bins = static_cast<std::size_t>(bin_count);
    bin_width = hi > lo ? (hi - lo) / bin_count : 1.0;
  } else if (bin_width > 0) {
    bins = hi > lo ? static_cast<std::size_t>(std::ceil((hi - lo) / bin_width)) : 1;
    bins = std::max<std::size_t>(bins, 1);
  } else {
    throw Error(ErrorCode::invalid_argument, "bin width must be positive");
  }
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::size_t b = 0; b < bins; ++b) h.edges[b] = lo + static_cast<double>(b) * bin_width;
  h.edges[bins] = hi;
  if (hi == lo) h.edges[bins] = lo;
  h.counts.assign(bins, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::size_t b = bins - 1;
    if (hi > lo) {
      const double pos = std::floor((values[i] - lo) / bin_width);
      b = std::min<std::size_t>(bins - 1, static_cast<std::size_t>(std::max(0.0, pos)));
    }
    h.counts[b] += weights[i];
  }
  return h;
}

// ---------------------------------------------------------------------------
// CSV export

namespace detail {
inline std::string csv_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}
}  // namespace detail

inline void write_metrics_csv(std::ostream& out, const std::vector<InstanceMetrics>& metrics) {
  out << "id,area_px,perimeter_px,diameter_px,diameter_phys,sphericity,aspect_ratio,"
         "smoothness,centroid_x,centroid_y,touches_edge\n";
  for (const auto& m : metrics) {
    out << m.id << ',' << detail::csv_number(m.area_px) << ','
        << detail::csv_number(m.perimeter_px) << ',' << detail::csv_number(m.diameter_px) << ','
        << (m.diameter_phys ? detail::csv_number(*m.diameter_phys) : std::string()) << ','
        << detail::csv_number(m.sphericity) << ',' << detail::csv_number(m.aspect_ratio) << ','
        << detail::csv_number(m.smoothness) << ',' << detail::csv_number(m.centroid_x) << ','
        << detail::csv_number(m.centroid_y) << ',' << (m.touches_edge ? 1 : 0) << '\n';
  }
}

}  // namespace micrometry
