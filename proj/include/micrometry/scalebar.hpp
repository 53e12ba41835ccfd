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

// Scale-bar recognition: candidate bars, endpoint localization on the bar
// region, label-text parsing, bar/text matching and pixel calibration.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <regex>
#include <string>
#include <utility>
#include <vector>

#include "micrometry/error.hpp"
#include "micrometry/imagecore.hpp"

namespace micrometry {

enum class Unit { angstrom, nm, um, mm, cm };

inline double unit_in_nm(Unit u) {
  switch (u) {
    case Unit::angstrom: return 0.1;
    case Unit::nm: return 1.0;
    case Unit::um: return 1e3;
    case Unit::mm: return 1e6;
    case Unit::cm: return 1e7;
  }
  return 1.0;
}

// Canonical UTF-8 spelling.
inline std::string unit_symbol(Unit u) {
  switch (u) {
    case Unit::angstrom: return "\xC3\x85";  // Å
    case Unit::nm: return "nm";
    case Unit::um: return "\xC2\xB5m";  // µm
    case Unit::mm: return "mm";
    case Unit::cm: return "cm";
  }
  return "nm";
}

inline std::optional<Unit> unit_from_symbol(const std::string& s) {
  if (s == "\xC3\x85" || s == "\xE2\x84\xAB" || s == "A\xC2\xB0" || s == "angstrom") {
    return Unit::angstrom;
  }
  if (s == "nm") return Unit::nm;
  if (s == "um" || s == "\xC2\xB5m" || s == "\xCE\xBCm") return Unit::um;
  if (s == "mm") return Unit::mm;
  if (s == "cm") return Unit::cm;
  return std::nullopt;
}

enum class DetectionSource { heuristic, external };

struct BarDetection {
  Rect bbox;
  double confidence = 0;
  DetectionSource source = DetectionSource::heuristic;
};

struct TextDetection {
  Rect bbox;
  std::string text;
  double confidence = 0;
};

struct EndpointResult {
  int x_left = 0;
  int x_right = 0;
  int row = 0;
  int pixel_length = 0;  // x_right - x_left + 1
};

struct ScaleCalibration {
  double value = 0;
  Unit unit = Unit::nm;
  int pixel_length = 0;
  double nm_per_pixel = 0;
  friend bool operator==(const ScaleCalibration&, const ScaleCalibration&) = default;
};

// Raised when the edge profile has fewer than two qualifying peaks; carries
// the smoothed profile (ROI columns) for diagnostics.
class LocalizationFailed : public Error {
 public:
  LocalizationFailed(const std::string& msg, std::vector<double> profile)
      : Error(ErrorCode::localization_failed, msg), profile_(std::move(profile)) {}
  const std::vector<double>& profile() const { return profile_; }

 private:
  std::vector<double> profile_;
};

namespace detail {

inline int clampi(int v, int lo, int hi) { return std::min(std::max(v, lo), hi); }

// Horizontal Sobel response (d/dx) of one channel with replicated borders.
inline int sobel_x(const Raster8& img, int c, int y, int x) {
  const int w = img.width(), h = img.height();
  auto px = [&](int yy, int xx) {
    return static_cast<int>(img.at(clampi(yy, 0, h - 1), clampi(xx, 0, w - 1), c));
  };
  return (px(y - 1, x + 1) + 2 * px(y, x + 1) + px(y + 1, x + 1)) -
         (px(y - 1, x - 1) + 2 * px(y, x - 1) + px(y + 1, x - 1));
}

inline int luminance(const Raster8& img, int y, int x) {
  if (img.channels() == 1) return img.at(y, x);
  return (img.at(y, x, 0) * 299 + img.at(y, x, 1) * 587 + img.at(y, x, 2) * 114 + 500) / 1000;
}

inline Rect pad_rect(const Rect& r, int margin, int w, int h) {
  const int x0 = std::max(0, r.x - margin), y0 = std::max(0, r.y - margin);
  const int x1 = std::min(w, r.right() + margin), y1 = std::min(h, r.bottom() + margin);
  return {x0, y0, x1 - x0, y1 - y0};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Candidate search

struct CandidateParams {
  int bright_threshold = 225;
  int dark_threshold = 30;
  int min_length = 20;
  double min_aspect = 5.0;
};

// Stand-in for a learned detector: connected regions of near-white or
// near-black pixels whose longest horizontal run is at least min_length and
// at least min_aspect times the bar thickness (rows whose run reaches 80% of
// the longest). Confidence is the contrast against a 2-pixel ring around the
// region, scaled to [0, 1]. Sorted by confidence, then raster order.
inline std::vector<BarDetection> find_bar_candidates(const Raster8& img,
                                                     const CandidateParams& params = {}) {
  std::vector<BarDetection> out;
  const int w = img.width(), h = img.height();
  Grid<int> lum(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) lum(y, x) = detail::luminance(img, y, x);
  }
  for (int polarity = 0; polarity < 2; ++polarity) {
    Mask m(w, h, 0);
    for (std::size_t i = 0; i < m.size(); ++i) {
      m[i] = polarity == 0 ? lum[i] >= params.bright_threshold : lum[i] <= params.dark_threshold;
    }
    const LabelMap comps = label_components(m);
    const std::vector<Rect> boxes = label_boxes(comps);
    for (std::uint32_t id = 1; id < boxes.size(); ++id) {
      const Rect& b = boxes[id];
      if (b.w < params.min_length) continue;
      std::vector<int> run_per_row(static_cast<std::size_t>(b.h), 0);
      for (int y = 0; y < b.h; ++y) {
        int run = 0, best = 0;
        for (int x = 0; x < b.w; ++x) {
          run = comps(b.y + y, b.x + x) == id ? run + 1 : 0;
          best = std::max(best, run);
        }
        run_per_row[y] = best;
      }
      const int longest = *std::max_element(run_per_row.begin(), run_per_row.end());
      if (longest < params.min_length) continue;
      int thickness = 0;
      for (int r : run_per_row) thickness += 5 * r >= 4 * longest;
      if (longest < params.min_aspect * thickness) continue;

      double inside = 0, ring = 0;
      long long n_in = 0, n_ring = 0;
      const Rect outer = detail::pad_rect(b, 2, w, h);
      for (int y = outer.y; y < outer.bottom(); ++y) {
        for (int x = outer.x; x < outer.right(); ++x) {
          if (comps(y, x) == id) {
            inside += lum(y, x);
            ++n_in;
          } else if (!b.contains(y, x)) {
            ring += lum(y, x);
            ++n_ring;
          }
        }
      }
      const double contrast =
          n_ring > 0 ? std::abs(inside / n_in - ring / n_ring) / 255.0 : 0.0;
      out.push_back({b, std::clamp(contrast, 0.0, 1.0), DetectionSource::heuristic});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const BarDetection& a, const BarDetection& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.bbox.y != b.bbox.y ? a.bbox.y < b.bbox.y : a.bbox.x < b.bbox.x;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Endpoint localization

// Channel with the largest summed |horizontal Sobel| inside bbox; ties go to
// the lowest index.
inline int select_edge_channel(const Raster8& img, const Rect& bbox) {
  if (bbox.w < 3 || bbox.h < 3) {
    throw Error(ErrorCode::invalid_argument, "select_edge_channel: bbox smaller than 3x3");
  }
  const Rect clipped = intersect(bbox, {0, 0, img.width(), img.height()});
  if (clipped != bbox) throw Error(ErrorCode::out_of_bounds, "bbox outside image");
  if (img.channels() == 1) return 0;
  int best = 0;
  long long best_sum = -1;
  for (int c = 0; c < img.channels(); ++c) {
    long long s = 0;
    for (int y = bbox.y; y < bbox.bottom(); ++y) {
      for (int x = bbox.x; x < bbox.right(); ++x) s += std::abs(detail::sobel_x(img, c, y, x));
    }
    if (s > best_sum) {
      best_sum = s;
      best = c;
    }
  }
  return best;
}

struct EndpointParams {
  int window = 31;        // local-mean threshold window
  int offset = 5;         // C in mean - C thresholding
  int margin = 16;        // ROI padding around the bar box
  double min_amplitude = 0.5;  // fraction of the profile maximum
  double min_sharpness = 1.5;  // ratio to the mean of the +-5 neighborhood
  int neighborhood = 5;
};

// Vertical-edge profile of the bar region. Returned values are indexed by
// ROI column; `roi` receives the padded region actually analysed.
struct EdgeProfile {
  Rect roi;
  int channel = 0;
  bool bright_foreground = true;
  Mask binary;                  // ROI-sized
  std::vector<double> raw;      // per ROI column
  std::vector<double> smoothed;
};

inline EdgeProfile edge_profile(const Raster8& img, const Rect& bbox, const EndpointParams& p = {}) {
  const Rect image_rect{0, 0, img.width(), img.height()};
  if (bbox.empty() || intersect(bbox, image_rect) != bbox) {
    throw Error(ErrorCode::out_of_bounds, "bar bbox outside image");
  }
  EdgeProfile prof;
  prof.roi = detail::pad_rect(bbox, p.margin, img.width(), img.height());
  const Rect& roi = prof.roi;
  prof.channel = (roi.w >= 3 && roi.h >= 3) ? select_edge_channel(img, roi) : 0;
  const int c = prof.channel;

  // local mean via an integral image over the ROI (window clipped to ROI)
  const int rw = roi.w, rh = roi.h;
  std::vector<long long> integral(static_cast<std::size_t>(rw + 1) * (rh + 1), 0);
  auto I = [&](int y, int x) -> long long& {
    return integral[static_cast<std::size_t>(y) * (rw + 1) + x];
  };
  for (int y = 0; y < rh; ++y) {
    long long row = 0;
    for (int x = 0; x < rw; ++x) {
      row += img.at(roi.y + y, roi.x + x, c);
      I(y + 1, x + 1) = I(y, x + 1) + row;
    }
  }
  const int half = p.window / 2;
  Mask bright(rw, rh, 0), dark(rw, rh, 0);
  long long n_bright = 0, n_dark = 0;
  for (int y = 0; y < rh; ++y) {
    for (int x = 0; x < rw; ++x) {
      const int y0 = std::max(0, y - half), y1 = std::min(rh, y + half + 1);
      const int x0 = std::max(0, x - half), x1 = std::min(rw, x + half + 1);
      const long long sum = I(y1, x1) - I(y0, x1) - I(y1, x0) + I(y0, x0);
      const long long cnt = static_cast<long long>(y1 - y0) * (x1 - x0);
      const long long v = img.at(roi.y + y, roi.x + x, c);
      // v > mean + C  <=>  v * cnt > sum + C * cnt
      if (v * cnt > sum + p.offset * cnt) {
        bright(y, x) = 1;
        ++n_bright;
      } else if (v * cnt < sum - p.offset * cnt) {
        dark(y, x) = 1;
        ++n_dark;
      }
    }
  }
  // foreground polarity follows the contrast of the box against the rest of
  // the ROI; the minority rule only breaks exact ties
  long long box_sum = 0, ring_sum = 0, box_n = 0, ring_n = 0;
  for (int y = 0; y < rh; ++y) {
    for (int x = 0; x < rw; ++x) {
      const long long v = img.at(roi.y + y, roi.x + x, c);
      if (bbox.contains(roi.y + y, roi.x + x)) {
        box_sum += v;
        ++box_n;
      } else {
        ring_sum += v;
        ++ring_n;
      }
    }
  }
  const long long lhs = box_sum * ring_n, rhs = ring_sum * box_n;
  prof.bright_foreground = (ring_n == 0 || lhs == rhs) ? n_bright <= n_dark : lhs > rhs;
  prof.binary = prof.bright_foreground ? std::move(bright) : std::move(dark);

  // transitions between horizontally adjacent pixels on the bar rows, each
  // credited to its foreground-side column and weighted by |Sobel_x| there
  prof.raw.assign(static_cast<std::size_t>(rw), 0.0);
  const int by0 = bbox.y - roi.y, by1 = bbox.bottom() - roi.y;
  for (int y = by0; y < by1; ++y) {
    for (int x = 1; x < rw; ++x) {
      const int a = prof.binary(y, x - 1), b = prof.binary(y, x);
      if (a == b) continue;
      const int col = b ? x : x - 1;
      prof.raw[col] += std::abs(detail::sobel_x(img, c, roi.y + y, roi.x + col));
    }
  }
  prof.smoothed.assign(prof.raw.size(), 0.0);
  for (int x = 0; x < rw; ++x) {
    double s = 0;
    for (int k = std::max(0, x - 1); k <= std::min(rw - 1, x + 1); ++k) s += prof.raw[k];
    prof.smoothed[x] = s / 3.0;
  }
  return prof;
}

// A maximal run of equal values strictly above both flanking values.
struct ProfilePeak {
  int first = 0;
  int last = 0;
  double value = 0;
};

inline std::vector<ProfilePeak> find_plateau_peaks(const std::vector<double>& v) {
  std::vector<ProfilePeak> peaks;
  const int n = static_cast<int>(v.size());
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && v[j + 1] == v[i]) ++j;
    const bool left_ok = i == 0 || v[i - 1] < v[i];
    const bool right_ok = j == n - 1 || v[j + 1] < v[i];
    if (left_ok && right_ok && v[i] > 0) peaks.push_back({i, j, v[i]});
    i = j + 1;
  }
  return peaks;
}

// Bar endpoints inside bbox: local mean-C binarization, vertical-edge profile,
// then the outermost pair of peaks passing the amplitude and sharpness tests.
// A flat-topped peak resolves to its center, rounded outward.
inline EndpointResult localize_endpoints(const Raster8& img, const Rect& bbox,
                                         const EndpointParams& p = {}) {
  const EdgeProfile prof = edge_profile(img, bbox, p);
  const std::vector<double>& s = prof.smoothed;
  const double peak_max = s.empty() ? 0.0 : *std::max_element(s.begin(), s.end());
  const int bx0 = bbox.x - prof.roi.x, bx1 = bbox.right() - prof.roi.x - 1;

  struct Qualified {
    int left_pos, right_pos;
  };
  std::vector<Qualified> qualified;
  if (peak_max > 0) {
    for (const ProfilePeak& pk : find_plateau_peaks(s)) {
      if (pk.value < p.min_amplitude * peak_max) continue;
      double sum = 0;
      int cnt = 0;
      for (int k = pk.first - p.neighborhood; k <= pk.last + p.neighborhood; ++k) {
        if (k < 0 || k >= static_cast<int>(s.size()) || (k >= pk.first && k <= pk.last)) continue;
        sum += s[k];
        ++cnt;
      }
      const double mean = cnt > 0 ? sum / cnt : 0.0;
      if (pk.value < p.min_sharpness * mean) continue;
      const int lo = (pk.first + pk.last) / 2;
      const int hi = (pk.first + pk.last + 1) / 2;
      if (hi < bx0 || lo > bx1) continue;
      qualified.push_back({std::max(lo, bx0), std::min(hi, bx1)});
    }
  }
  if (qualified.size() < 2) {
    throw LocalizationFailed("fewer than two qualifying edge peaks", s);
  }
  // the 3-tap mean can fuse two edges two columns apart (end ticks); snap
  // each endpoint to the strongest raw column under its smoothing support,
  // preferring the outer side on ties
  auto snap = [&](int pos, int outward) {
    int best = pos;
    for (int k : {pos - outward, pos, pos + outward}) {
      if (k < bx0 || k > bx1) continue;
      if (prof.raw[k] > prof.raw[best] ||
          (prof.raw[k] == prof.raw[best] && (k - best) * outward > 0)) {
        best = k;
      }
    }
    return best;
  };
  EndpointResult r;
  r.x_left = prof.roi.x + snap(qualified.front().left_pos, -1);
  r.x_right = prof.roi.x + snap(qualified.back().right_pos, 1);
  if (r.x_left >= r.x_right) {
    throw LocalizationFailed("edge peaks do not bracket a bar", s);
  }
  int best_row = bbox.y, best_count = -1;
  for (int y = bbox.y; y < bbox.bottom(); ++y) {
    int count = 0;
    for (int x = bbox.x; x < bbox.right(); ++x) count += prof.binary(y - prof.roi.y, x - prof.roi.x);
    if (count > best_count) {
      best_count = count;
      best_row = y;
    }
  }
  r.row = best_row;
  r.pixel_length = r.x_right - r.x_left + 1;
  return r;
}

// ---------------------------------------------------------------------------
// Text parsing and matching

struct ParsedLabel {
  double value = 0;
  Unit unit = Unit::nm;
  friend bool operator==(const ParsedLabel&, const ParsedLabel&) = default;
};

// OCR label strings are short; longer inputs are scanned only up to this
// many bytes, which bounds the regex engine's work on hostile input.
inline constexpr std::size_t kMaxLabelBytes = 256;

// Number (optional decimals), optional whitespace, then a unit token among
// Å, A°, nm, um, µm, μm, mm, cm. The first match wins.
inline ParsedLabel parse_label_text(const std::string& input) {
  static const std::regex pattern(
      "(\\d+(?:[.]\\d+)?|[.]\\d+)[ \\t]*"
      "(\xC3\x85|\xE2\x84\xAB|A\xC2\xB0|nm|um|\xC2\xB5m|\xCE\xBCm|mm|cm)"
      "(?![A-Za-z])");
  const std::string s = input.substr(0, kMaxLabelBytes);
  std::smatch m;
  if (!std::regex_search(s, m, pattern)) {
    throw Error(ErrorCode::no_match, "no value/unit in label text '" + s + "'");
  }
  const std::string number = m[1].str();
  const double value = std::strtod(number.c_str(), nullptr);
  const auto unit = unit_from_symbol(m[2].str());
  if (!unit) throw Error(ErrorCode::no_match, "unknown unit");
  return {value, *unit};
}

inline std::optional<ParsedLabel> try_parse_label_text(const std::string& s) {
  try {
    return parse_label_text(s);
  } catch (const Error&) {
    return std::nullopt;
  }
}

inline constexpr double kTextConfidenceThreshold = 0.15;

struct BarTextPair {
  std::size_t bar = 0;   // index into the bars list
  std::size_t text = 0;  // index into the texts list
  ParsedLabel label;
  double distance = 0;
};

// Pairs every confident, parseable text with its nearest bar (centroid
// distance); a bar claimed by several texts keeps the nearest one. Ties go
// to the earlier box in raster order. Output is ordered by bar index.
inline std::vector<BarTextPair> match_text_to_bar(const std::vector<BarDetection>& bars,
                                                  const std::vector<TextDetection>& texts,
                                                  double min_conf = kTextConfidenceThreshold) {
  auto centroid = [](const Rect& r) {
    return std::pair<double, double>{r.y + 0.5 * r.h, r.x + 0.5 * r.w};
  };
  auto raster_before = [](const Rect& a, const Rect& b) {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  };
  std::vector<std::optional<BarTextPair>> best(bars.size());
  for (std::size_t t = 0; t < texts.size(); ++t) {
    if (texts[t].confidence < min_conf) continue;
    const auto label = try_parse_label_text(texts[t].text);
    if (!label) continue;
    const auto [ty, tx] = centroid(texts[t].bbox);
    std::optional<std::size_t> nearest;
    double nearest_d = 0;
    for (std::size_t b = 0; b < bars.size(); ++b) {
      const auto [by, bx] = centroid(bars[b].bbox);
      const double d = std::hypot(by - ty, bx - tx);
      if (!nearest || d < nearest_d ||
          (d == nearest_d && raster_before(bars[b].bbox, bars[*nearest].bbox))) {
        nearest = b;
        nearest_d = d;
      }
    }
    if (!nearest) continue;
    auto& slot = best[*nearest];
    if (!slot || nearest_d < slot->distance ||
        (nearest_d == slot->distance && raster_before(texts[t].bbox, texts[slot->text].bbox))) {
      slot = BarTextPair{*nearest, t, *label, nearest_d};
    }
  }
  std::vector<BarTextPair> out;
  for (auto& s : best) {
    if (s) out.push_back(*s);
  }
  return out;
}

inline ScaleCalibration calibrate(int pixel_length, double value, Unit unit) {
  if (!(value > 0)) throw Error(ErrorCode::invalid_argument, "scale value must be positive");
  if (pixel_length < 2) throw Error(ErrorCode::invalid_argument, "scale bar shorter than 2 px");
  return {value, unit, pixel_length, value * unit_in_nm(unit) / pixel_length};
}

inline ScaleCalibration calibrate(const EndpointResult& e, double value, Unit unit) {
  return calibrate(e.pixel_length, value, unit);
}

// ---------------------------------------------------------------------------
// Whole-image recognition

struct ScalebarRecognition {
  std::optional<BarDetection> bar;
  std::optional<EndpointResult> endpoints;
  std::optional<TextDetection> text;
  std::optional<ScaleCalibration> calibration;
  std::string failure;  // empty on success
};

// Picks the most confident bar (external bars when supplied, otherwise the
// heuristic candidates), localizes its endpoints and, if a text detection
// pairs with it, calibrates.
inline ScalebarRecognition recognize_scalebar(const Raster8& img,
                                              const std::vector<BarDetection>& external_bars = {},
                                              const std::vector<TextDetection>& texts = {},
                                              const EndpointParams& params = {}) {
  ScalebarRecognition r;
  std::vector<BarDetection> bars = external_bars;
  if (bars.empty()) {
    bars = find_bar_candidates(img);
  } else {
    std::stable_sort(bars.begin(), bars.end(), [](const BarDetection& a, const BarDetection& b) {
      return a.confidence > b.confidence;
    });
  }
  if (bars.empty()) {
    r.failure = "no scale bar candidate";
    return r;
  }
  const std::vector<BarDetection> top{bars.front()};
  r.bar = bars.front();
  try {
    r.endpoints = localize_endpoints(img, r.bar->bbox, params);
  } catch (const Error& e) {
    r.failure = e.what();
    return r;
  }
  const auto pairs = match_text_to_bar(top, texts);
  if (pairs.empty()) {
    r.failure = "no label text matched to the scale bar";
    return r;
  }
  r.text = texts[pairs.front().text];
  r.calibration = calibrate(*r.endpoints, pairs.front().label.value, pairs.front().label.unit);
  return r;
}

}  // namespace micrometry
