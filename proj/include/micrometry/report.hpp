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

// Statistics blocks, chart data and the self-contained HTML report with its
// JSON twin. The HTML is generated from the document alone, and every number
// printed as text in it is formatted by the same routine that writes the twin.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "micrometry/error.hpp"
#include "micrometry/json_io.hpp"
#include "micrometry/metrology.hpp"
#include "micrometry/scalebar.hpp"

namespace micrometry {

inline constexpr const char* kReportSchema = "micrometry.report/1";
inline constexpr const char* kSoftwareVersion = "micrometry 1.0.0";

// ---------------------------------------------------------------------------
// Metric access

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {
      "area_px",  "perimeter_px", "diameter_px", "diameter_nm", "sphericity",
      "aspect_ratio", "smoothness", "centroid_x", "centroid_y"};
  return names;
}

inline std::string metric_unit(const std::string& name) {
  if (name == "area_px") return "px^2";
  if (name == "perimeter_px" || name == "diameter_px" || name == "centroid_x" ||
      name == "centroid_y") {
    return "px";
  }
  if (name == "diameter_nm") return "nm";
  return "";
}

inline double metric_value(const InstanceMetrics& m, const std::string& name) {
  if (name == "area_px") return m.area_px;
  if (name == "perimeter_px") return m.perimeter_px;
  if (name == "diameter_px") return m.diameter_px;
  if (name == "diameter_nm") {
    if (!m.diameter_phys) {
      throw Error(ErrorCode::unit_mismatch, "diameter_nm needs a calibration");
    }
    return *m.diameter_phys;
  }
  if (name == "sphericity") return m.sphericity;
  if (name == "aspect_ratio") return m.aspect_ratio;
  if (name == "smoothness") return m.smoothness;
  if (name == "centroid_x") return m.centroid_x;
  if (name == "centroid_y") return m.centroid_y;
  throw Error(ErrorCode::invalid_argument, "unknown metric: " + name);
}

inline std::vector<double> metric_values(const std::vector<InstanceMetrics>& metrics,
                                         const std::string& name) {
  std::vector<double> out;
  out.reserve(metrics.size());
  for (const auto& m : metrics) out.push_back(metric_value(m, name));
  return out;
}

// The diameter column used for charts: physical when every record has it.
inline std::string diameter_metric(const std::vector<InstanceMetrics>& metrics) {
  const bool phys = !metrics.empty() && std::all_of(metrics.begin(), metrics.end(), [](const auto& m) {
    return m.diameter_phys.has_value();
  });
  return phys ? "diameter_nm" : "diameter_px";
}

// ---------------------------------------------------------------------------
// Chart data

enum class ChartKind { histogram, scatter, box };

inline std::string to_string(ChartKind k) {
  switch (k) {
    case ChartKind::histogram: return "histogram";
    case ChartKind::scatter: return "scatter";
    case ChartKind::box: return "box";
  }
  return "histogram";
}

struct Series {
  std::string name;
  std::vector<double> values;
  friend bool operator==(const Series&, const Series&) = default;
};

// Box statistics; lo/hi are the whisker ends (most extreme non-outliers).
struct BoxGroup {
  std::string name;
  std::size_t count = 0;
  double lo = 0, q1 = 0, median = 0, q3 = 0, hi = 0;
  std::vector<double> outliers;
  friend bool operator==(const BoxGroup&, const BoxGroup&) = default;
};

struct ChartData {
  ChartKind kind = ChartKind::histogram;
  std::string title;
  std::string x_label, x_unit, y_label, y_unit;
  // histogram: "edges", "counts"; scatter: "id", "x", "y"
  std::vector<Series> series;
  std::vector<BoxGroup> groups;  // box only
  // configuration echoed for clients
  std::optional<double> bin_width;
  std::optional<Weighting> weighting;
  std::vector<double> x_ticks, y_ticks;

  const Series* find(const std::string& name) const {
    for (const auto& s : series) {
      if (s.name == name) return &s;
    }
    return nullptr;
  }
  friend bool operator==(const ChartData&, const ChartData&) = default;
};

// Round-number axis ticks covering [lo, hi]. Values are built from integer
// mantissas and a decimal exponent so they print without representation noise.
inline std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) return {};
  if (hi < lo) std::swap(lo, hi);
  if (hi == lo) {
    hi = lo + (lo == 0 ? 1.0 : std::abs(lo) * 0.1);
    lo = lo - (lo == 0 ? 0.0 : std::abs(lo) * 0.1);
  }
  const double raw = (hi - lo) / std::max(1, target);
  int e = static_cast<int>(std::floor(std::log10(raw)));
  const double base = std::pow(10.0, e);
  long long m = 10;
  for (long long c : {1LL, 2LL, 5LL, 10LL}) {
    if (static_cast<double>(c) * base >= raw) {
      m = c;
      break;
    }
  }
  if (m == 10) {
    m = 1;
    ++e;
  }
  auto value = [&](long long k) {
    const long long mant = k * m;
    return e >= 0 ? static_cast<double>(mant) * std::pow(10.0, e)
                  : static_cast<double>(mant) / std::pow(10.0, -e);
  };
  const double step = e >= 0 ? static_cast<double>(m) * std::pow(10.0, e)
                             : static_cast<double>(m) / std::pow(10.0, -e);
  const auto k0 = static_cast<long long>(std::floor(lo / step));
  const auto k1 = static_cast<long long>(std::ceil(hi / step));
  std::vector<double> out;
  for (long long k = k0; k <= k1 && out.size() < 64; ++k) out.push_back(value(k));
  return out;
}

inline ChartData build_histogram(const std::vector<InstanceMetrics>& metrics,
                                 const std::string& metric, Weighting weighting,
                                 double bin_width, int bin_count = 0) {
  ChartData c;
  c.kind = ChartKind::histogram;
  c.title = metric + " distribution";
  c.x_label = metric;
  c.x_unit = metric_unit(metric);
  c.y_label = weighting == Weighting::count  ? "count"
              : weighting == Weighting::area ? "area-weighted frequency"
                                             : "volume-weighted frequency";
  c.weighting = weighting;
  if (bin_count < 1 && !(bin_width > 0)) {
    throw Error(ErrorCode::invalid_argument, "bin width must be positive");
  }
  if (bin_count < 1) c.bin_width = bin_width;
  Histogram h;
  if (!metrics.empty()) {
    h = histogram(metric_values(metrics, metric), weights_of(metrics, weighting), bin_width,
                  bin_count);
  }
  if (weighting != Weighting::count) {
    double total = 0;
    for (double v : h.counts) total += v;
    if (total > 0) {
      for (double& v : h.counts) v /= total;
    }
  }
  c.series = {{"edges", h.edges}, {"counts", h.counts}};
  if (!h.edges.empty()) {
    c.x_ticks = nice_ticks(h.edges.front(), h.edges.back());
    const double top = *std::max_element(h.counts.begin(), h.counts.end());
    c.y_ticks = nice_ticks(0.0, top > 0 ? top : 1.0);
  }
  return c;
}

// Paired points in instance order.
inline ChartData build_scatter(const std::vector<InstanceMetrics>& metrics, const std::string& x,
                               const std::string& y) {
  const auto& names = metric_names();
  for (const auto* n : {&x, &y}) {
    if (std::find(names.begin(), names.end(), *n) == names.end()) {
      throw Error(ErrorCode::invalid_argument, "unknown metric: " + *n);
    }
  }
  ChartData c;
  c.kind = ChartKind::scatter;
  c.title = y + " vs " + x;
  c.x_label = x;
  c.x_unit = metric_unit(x);
  c.y_label = y;
  c.y_unit = metric_unit(y);
  Series ids{"id", {}}, xs{"x", {}}, ys{"y", {}};
  for (const auto& m : metrics) {
    const double vx = metric_value(m, x), vy = metric_value(m, y);
    if (!std::isfinite(vx) || !std::isfinite(vy)) continue;
    ids.values.push_back(m.id);
    xs.values.push_back(vx);
    ys.values.push_back(vy);
  }
  if (!xs.values.empty()) {
    const auto [xlo, xhi] = std::minmax_element(xs.values.begin(), xs.values.end());
    const auto [ylo, yhi] = std::minmax_element(ys.values.begin(), ys.values.end());
    c.x_ticks = nice_ticks(*xlo, *xhi);
    c.y_ticks = nice_ticks(*ylo, *yhi);
  }
  c.series = {std::move(ids), std::move(xs), std::move(ys)};
  return c;
}

// Tukey box per sample; quartiles use metrology's percentile rule.
inline BoxGroup box_stats(const std::string& name, const std::vector<double>& values) {
  BoxGroup g;
  g.name = name;
  g.count = values.size();
  if (values.empty()) return g;
  const WeightedSamples s = merge_samples(values, std::vector<double>(values.size(), 1.0));
  g.q1 = weighted_percentile(s, 0.25);
  g.median = weighted_percentile(s, 0.50);
  g.q3 = weighted_percentile(s, 0.75);
  const double iqr = g.q3 - g.q1;
  const double lo_fence = g.q1 - 1.5 * iqr, hi_fence = g.q3 + 1.5 * iqr;
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  bool have = false;
  for (double v : sorted) {
    if (v < lo_fence || v > hi_fence) {
      g.outliers.push_back(v);
      continue;
    }
    if (!have) g.lo = v;
    g.hi = v;
    have = true;
  }
  return g;
}

inline ChartData build_box(const std::vector<std::pair<std::string, std::vector<double>>>& samples,
                           const std::string& metric = "value", const std::string& unit = "") {
  if (samples.empty()) throw Error(ErrorCode::empty_input, "box chart needs at least one sample");
  ChartData c;
  c.kind = ChartKind::box;
  c.title = metric + " by sample";
  c.x_label = "sample";
  c.y_label = metric;
  c.y_unit = unit;
  double lo = 0, hi = 0;
  bool any = false;
  for (const auto& [name, values] : samples) {
    c.groups.push_back(box_stats(name, values));
    for (double v : values) {
      lo = any ? std::min(lo, v) : v;
      hi = any ? std::max(hi, v) : v;
      any = true;
    }
  }
  if (any) c.y_ticks = nice_ticks(lo, hi);
  return c;
}

// ---------------------------------------------------------------------------
// Report document

struct MetricSummary {
  std::string metric;
  std::string unit;
  Weighting weighting = Weighting::count;
  std::optional<StatsSummary> stats;  // empty when no instance survives
  friend bool operator==(const MetricSummary&, const MetricSummary&) = default;
};

struct SampleSummary {
  std::string name;
  std::size_t instance_count = 0;
  std::optional<ScaleCalibration> calibration;
  std::vector<MetricSummary> metrics;
  friend bool operator==(const SampleSummary&, const SampleSummary&) = default;
};

struct ReportDocument {
  std::string title = "Particle analysis report";
  std::vector<SampleSummary> samples;
  std::vector<ChartData> charts;
  json provenance = json::object();
  friend bool operator==(const ReportDocument& a, const ReportDocument& b) {
    return a.title == b.title && a.samples == b.samples && a.charts == b.charts &&
           a.provenance == b.provenance;
  }
};

struct ReportOptions {
  Weighting weighting = Weighting::count;
  double bin_width = 0;       // 0: 20 equal bins
  std::string scatter_x = "";  // "": the diameter metric
  std::string scatter_y = "sphericity";
};

inline MetricSummary summarize_metric(const std::vector<InstanceMetrics>& metrics,
                                      const std::string& metric, Weighting w) {
  MetricSummary s{metric, metric_unit(metric), w, std::nullopt};
  if (!metrics.empty()) s.stats = summarize(metric_values(metrics, metric), weights_of(metrics, w));
  return s;
}

inline SampleSummary summarize_sample(const std::string& name,
                                      const std::vector<InstanceMetrics>& metrics,
                                      const std::optional<ScaleCalibration>& calibration,
                                      Weighting w) {
  SampleSummary s;
  s.name = name;
  s.instance_count = metrics.size();
  s.calibration = calibration;
  const std::string dm = diameter_metric(metrics);
  s.metrics.push_back(summarize_metric(metrics, dm, w));
  if (w != Weighting::count) s.metrics.push_back(summarize_metric(metrics, dm, Weighting::count));
  if (dm != "diameter_px") s.metrics.push_back(summarize_metric(metrics, "diameter_px", Weighting::count));
  for (const char* m : {"area_px", "sphericity", "aspect_ratio", "smoothness"}) {
    s.metrics.push_back(summarize_metric(metrics, m, Weighting::count));
  }
  return s;
}

struct ReportSample {
  std::string name;
  const std::vector<InstanceMetrics>* metrics = nullptr;
  std::optional<ScaleCalibration> calibration;
};

// One sample: summary, diameter histogram and a scatter. Two or more: per
// sample histograms plus box comparisons of diameter, sphericity and aspect
// ratio.
inline ReportDocument build_report(const std::vector<ReportSample>& samples,
                                   const ReportOptions& opt, json provenance = json::object()) {
  if (samples.empty()) throw Error(ErrorCode::empty_input, "report needs at least one sample");
  ReportDocument doc;
  doc.provenance = std::move(provenance);
  doc.provenance["software"] = kSoftwareVersion;
  // a shared diameter metric keeps multi-sample charts comparable
  bool all_phys = true;
  for (const auto& s : samples) all_phys = all_phys && diameter_metric(*s.metrics) == "diameter_nm";
  const std::string dm = all_phys ? "diameter_nm" : "diameter_px";
  for (const auto& s : samples) {
    doc.samples.push_back(summarize_sample(s.name, *s.metrics, s.calibration, opt.weighting));
    ChartData h = build_histogram(*s.metrics, dm, opt.weighting, opt.bin_width,
                                  opt.bin_width > 0 ? 0 : 20);
    if (samples.size() > 1) h.title = s.name + ": " + h.title;
    doc.charts.push_back(std::move(h));
  }
  if (samples.size() == 1) {
    doc.charts.push_back(build_scatter(*samples[0].metrics,
                                       opt.scatter_x.empty() ? dm : opt.scatter_x, opt.scatter_y));
  } else {
    for (const std::string m : {dm, std::string("sphericity"), std::string("aspect_ratio")}) {
      std::vector<std::pair<std::string, std::vector<double>>> groups;
      for (const auto& s : samples) groups.emplace_back(s.name, metric_values(*s.metrics, m));
      doc.charts.push_back(build_box(groups, m, metric_unit(m)));
    }
  }
  return doc;
}

// ---------------------------------------------------------------------------
// JSON twin

inline void to_json(json& j, const Series& s) { j = json{{"name", s.name}, {"values", s.values}}; }
inline void from_json(const json& j, Series& s) {
  s.name = j.at("name").get<std::string>();
  s.values = j.at("values").get<std::vector<double>>();
}

inline void to_json(json& j, const BoxGroup& g) {
  j = json{{"name", g.name}, {"count", g.count},   {"lo", g.lo},   {"q1", g.q1},
           {"median", g.median}, {"q3", g.q3}, {"hi", g.hi}, {"outliers", g.outliers}};
}
inline void from_json(const json& j, BoxGroup& g) {
  g.name = j.at("name").get<std::string>();
  g.count = j.at("count").get<std::size_t>();
  g.lo = j.at("lo").get<double>();
  g.q1 = j.at("q1").get<double>();
  g.median = j.at("median").get<double>();
  g.q3 = j.at("q3").get<double>();
  g.hi = j.at("hi").get<double>();
  g.outliers = j.at("outliers").get<std::vector<double>>();
}

inline void to_json(json& j, const ChartData& c) {
  j = json{{"kind", to_string(c.kind)},
           {"title", c.title},
           {"x_label", c.x_label},
           {"x_unit", c.x_unit},
           {"y_label", c.y_label},
           {"y_unit", c.y_unit},
           {"series", c.series},
           {"groups", c.groups},
           {"bin_width", detail::opt_json(c.bin_width)},
           {"weighting", c.weighting ? json(*c.weighting) : json(nullptr)},
           {"x_ticks", c.x_ticks},
           {"y_ticks", c.y_ticks}};
}
inline void from_json(const json& j, ChartData& c) {
  const std::string kind = j.at("kind").get<std::string>();
  c.kind = kind == "scatter" ? ChartKind::scatter : kind == "box" ? ChartKind::box : ChartKind::histogram;
  c.title = j.at("title").get<std::string>();
  c.x_label = j.at("x_label").get<std::string>();
  c.x_unit = j.at("x_unit").get<std::string>();
  c.y_label = j.at("y_label").get<std::string>();
  c.y_unit = j.at("y_unit").get<std::string>();
  c.series = j.at("series").get<std::vector<Series>>();
  c.groups = j.at("groups").get<std::vector<BoxGroup>>();
  c.bin_width.reset();
  detail::read_opt(j, "bin_width", c.bin_width);
  c.weighting.reset();
  if (!j.at("weighting").is_null()) c.weighting = parse_weighting(j.at("weighting"));
  c.x_ticks = j.at("x_ticks").get<std::vector<double>>();
  c.y_ticks = j.at("y_ticks").get<std::vector<double>>();
}

inline void to_json(json& j, const MetricSummary& m) {
  j = json{{"metric", m.metric},
           {"unit", m.unit},
           {"weighting", m.weighting},
           {"empty", !m.stats.has_value()},
           {"stats", m.stats ? json(*m.stats) : json(nullptr)}};
}
inline void from_json(const json& j, MetricSummary& m) {
  m.metric = j.at("metric").get<std::string>();
  m.unit = j.at("unit").get<std::string>();
  m.weighting = parse_weighting(j.at("weighting"));
  m.stats.reset();
  if (!j.at("stats").is_null()) m.stats = j.at("stats").get<StatsSummary>();
}

inline void to_json(json& j, const SampleSummary& s) {
  j = json{{"name", s.name},
           {"instance_count", s.instance_count},
           {"calibration", s.calibration ? json(*s.calibration) : json(nullptr)},
           {"metrics", s.metrics}};
}
inline void from_json(const json& j, SampleSummary& s) {
  s.name = j.at("name").get<std::string>();
  s.instance_count = j.at("instance_count").get<std::size_t>();
  s.calibration.reset();
  if (!j.at("calibration").is_null()) s.calibration = j.at("calibration").get<ScaleCalibration>();
  s.metrics = j.at("metrics").get<std::vector<MetricSummary>>();
}

inline json report_json(const ReportDocument& doc) {
  return json{{"schema", kReportSchema},
              {"title", doc.title},
              {"samples", doc.samples},
              {"charts", doc.charts},
              {"provenance", doc.provenance}};
}

inline ReportDocument report_from_json(const json& j) {
  if (j.value("schema", std::string()) != kReportSchema) {
    throw Error(ErrorCode::version_mismatch, "unsupported report schema");
  }
  ReportDocument doc;
  doc.title = j.at("title").get<std::string>();
  doc.samples = j.at("samples").get<std::vector<SampleSummary>>();
  doc.charts = j.at("charts").get<std::vector<ChartData>>();
  doc.provenance = j.at("provenance");
  return doc;
}

// ---------------------------------------------------------------------------
// HTML rendering

// Shared number formatting: the shortest round-trip form, as in the twin.
inline std::string format_number(double v) { return json(v).dump(); }
inline std::string format_number(std::size_t v) { return json(v).dump(); }

namespace detail {

inline std::string html_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// SVG geometry; not report content.
inline std::string coord(double v) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << v;
  return os.str();
}

struct Frame {
  double left = 64, right = 16, top = 28, bottom = 44;
  double width = 480, height = 300;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

inline void set_range(double& lo, double& hi, const std::vector<double>& ticks) {
  if (!ticks.empty()) {
    lo = std::min(lo, ticks.front());
    hi = std::max(hi, ticks.back());
  }
  if (hi <= lo) hi = lo + 1;
}

inline std::string axis_label(const std::string& label, const std::string& unit) {
  return unit.empty() ? label : label + " (" + unit + ")";
}

inline void draw_axes(std::ostringstream& o, const Frame& f, const ChartData& c, bool x_numeric) {
  o << "<line x1=\"" << coord(f.left) << "\" y1=\"" << coord(f.height - f.bottom) << "\" x2=\""
    << coord(f.width - f.right) << "\" y2=\"" << coord(f.height - f.bottom)
    << "\" stroke=\"#333\"/>";
  o << "<line x1=\"" << coord(f.left) << "\" y1=\"" << coord(f.top) << "\" x2=\"" << coord(f.left)
    << "\" y2=\"" << coord(f.height - f.bottom) << "\" stroke=\"#333\"/>";
  if (x_numeric) {
    for (double t : c.x_ticks) {
      o << "<text x=\"" << coord(f.px(t)) << "\" y=\"" << coord(f.height - f.bottom + 14)
        << "\" text-anchor=\"middle\" font-size=\"10\">" << format_number(t) << "</text>";
    }
  }
  for (double t : c.y_ticks) {
    o << "<text x=\"" << coord(f.left - 4) << "\" y=\"" << coord(f.py(t) + 3)
      << "\" text-anchor=\"end\" font-size=\"10\">" << format_number(t) << "</text>";
  }
  o << "<text x=\"" << coord((f.left + f.width - f.right) / 2) << "\" y=\""
    << coord(f.height - 8) << "\" text-anchor=\"middle\" font-size=\"11\">"
    << html_escape(axis_label(c.x_label, c.x_unit)) << "</text>";
  o << "<text x=\"12\" y=\"" << coord((f.top + f.height - f.bottom) / 2)
    << "\" font-size=\"11\" transform=\"rotate(-90 12 " << coord((f.top + f.height - f.bottom) / 2)
    << ")\" text-anchor=\"middle\">" << html_escape(axis_label(c.y_label, c.y_unit)) << "</text>";
}

inline std::string render_chart_svg(const ChartData& c) {
  std::ostringstream o;
  Frame f;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << coord(f.width) << "\" height=\""
    << coord(f.height) << "\" viewBox=\"0 0 " << coord(f.width) << ' ' << coord(f.height) << "\">";
  o << "<text x=\"" << coord(f.width / 2) << "\" y=\"16\" text-anchor=\"middle\" font-size=\"12\">"
    << html_escape(c.title) << "</text>";
  if (c.kind == ChartKind::histogram) {
    const Series* e = c.find("edges");
    const Series* n = c.find("counts");
    if (e && n && !n->values.empty()) {
      f.x0 = e->values.front();
      f.x1 = e->values.back();
      set_range(f.x0, f.x1, c.x_ticks);
      f.y0 = 0;
      f.y1 = *std::max_element(n->values.begin(), n->values.end());
      set_range(f.y0, f.y1, c.y_ticks);
      for (std::size_t b = 0; b < n->values.size(); ++b) {
        const double xa = f.px(e->values[b]), xb = f.px(e->values[b + 1]);
        const double ya = f.py(n->values[b]), yb = f.py(0);
        o << "<rect x=\"" << coord(xa) << "\" y=\"" << coord(ya) << "\" width=\""
          << coord(std::max(0.5, xb - xa)) << "\" height=\"" << coord(yb - ya)
          << "\" fill=\"#4a7ab5\" stroke=\"#fff\" stroke-width=\"0.5\"/>";
      }
    }
    draw_axes(o, f, c, true);
  } else if (c.kind == ChartKind::scatter) {
    const Series* xs = c.find("x");
    const Series* ys = c.find("y");
    if (xs && ys && !xs->values.empty()) {
      auto [xlo, xhi] = std::minmax_element(xs->values.begin(), xs->values.end());
      auto [ylo, yhi] = std::minmax_element(ys->values.begin(), ys->values.end());
      f.x0 = *xlo;
      f.x1 = *xhi;
      f.y0 = *ylo;
      f.y1 = *yhi;
      set_range(f.x0, f.x1, c.x_ticks);
      set_range(f.y0, f.y1, c.y_ticks);
      for (std::size_t i = 0; i < xs->values.size(); ++i) {
        o << "<circle cx=\"" << coord(f.px(xs->values[i])) << "\" cy=\""
          << coord(f.py(ys->values[i])) << "\" r=\"2\" fill=\"#c0504d\" fill-opacity=\"0.6\"/>";
      }
    }
    draw_axes(o, f, c, true);
  } else {
    f.y0 = c.y_ticks.empty() ? 0 : c.y_ticks.front();
    f.y1 = c.y_ticks.empty() ? 1 : c.y_ticks.back();
    set_range(f.y0, f.y1, {});
    const double slot = (f.width - f.left - f.right) / std::max<std::size_t>(1, c.groups.size());
    for (std::size_t g = 0; g < c.groups.size(); ++g) {
      const BoxGroup& b = c.groups[g];
      const double cx = f.left + slot * (static_cast<double>(g) + 0.5);
      const double hw = std::min(40.0, slot * 0.3);
      if (b.count > 0) {
        o << "<line x1=\"" << coord(cx) << "\" y1=\"" << coord(f.py(b.lo)) << "\" x2=\"" << coord(cx)
          << "\" y2=\"" << coord(f.py(b.hi)) << "\" stroke=\"#333\"/>";
        o << "<rect x=\"" << coord(cx - hw) << "\" y=\"" << coord(f.py(b.q3)) << "\" width=\""
          << coord(2 * hw) << "\" height=\"" << coord(std::max(0.5, f.py(b.q1) - f.py(b.q3)))
          << "\" fill=\"#9bbb59\" stroke=\"#333\"/>";
        o << "<line x1=\"" << coord(cx - hw) << "\" y1=\"" << coord(f.py(b.median)) << "\" x2=\""
          << coord(cx + hw) << "\" y2=\"" << coord(f.py(b.median))
          << "\" stroke=\"#000\" stroke-width=\"2\"/>";
        for (double v : b.outliers) {
          o << "<circle cx=\"" << coord(cx) << "\" cy=\"" << coord(f.py(v))
            << "\" r=\"2\" fill=\"none\" stroke=\"#333\"/>";
        }
      }
      o << "<text x=\"" << coord(cx) << "\" y=\"" << coord(f.height - f.bottom + 14)
        << "\" text-anchor=\"middle\" font-size=\"10\">" << html_escape(b.name) << " (n="
        << format_number(b.count) << ")</text>";
    }
    draw_axes(o, f, c, false);
  }
  o << "</svg>";
  return o.str();
}

}  // namespace detail

struct RenderedReport {
  std::string html;
  std::string json_twin;
};

inline RenderedReport render_report(const ReportDocument& doc) {
  using detail::html_escape;
  RenderedReport out;
  const json twin = report_json(doc);
  out.json_twin = twin.dump(2) + "\n";

  std::ostringstream o;
  o << "<!DOCTYPE html>\n<html lang=\"en\"><head><meta charset=\"utf-8\"><title>"
    << html_escape(doc.title) << "</title>\n<style>"
    << "body{font-family:sans-serif;margin:24px;color:#222}"
    << "table{border-collapse:collapse;margin:8px 0 16px}"
    << "td,th{border:1px solid #bbb;padding:3px 8px;text-align:right}"
    << "th{background:#eee}td.l,th.l{text-align:left}"
    << "figure{display:inline-block;margin:8px}"
    << "pre{background:#f6f6f6;padding:8px;white-space:pre-wrap}"
    << "</style></head><body>\n";
  o << "<h1>" << html_escape(doc.title) << "</h1>\n";
  for (const SampleSummary& s : doc.samples) {
    o << "<section class=\"sample\"><h2>" << html_escape(s.name) << "</h2>\n";
    o << "<p>Instances: " << format_number(s.instance_count) << "</p>\n";
    if (s.calibration) {
      const ScaleCalibration& c = *s.calibration;
      o << "<p class=\"calibration\">Scale bar: " << format_number(c.value) << ' '
        << html_escape(unit_symbol(c.unit)) << " over " << format_number(static_cast<std::size_t>(c.pixel_length))
        << " px, " << format_number(c.nm_per_pixel) << " nm/px</p>\n";
    } else {
      o << "<p class=\"calibration\">Scale bar: not calibrated</p>\n";
    }
    o << "<table><tr><th class=\"l\">metric</th><th class=\"l\">unit</th>"
      << "<th class=\"l\">weighting</th><th>count</th><th>min</th><th>max</th><th>mean</th>"
      << "<th>std</th><th>P10</th><th>P50</th><th>P90</th></tr>\n";
    for (const MetricSummary& m : s.metrics) {
      o << "<tr><td class=\"l\">" << html_escape(m.metric) << "</td><td class=\"l\">"
        << html_escape(m.unit) << "</td><td class=\"l\">" << json(m.weighting).get<std::string>()
        << "</td>";
      if (!m.stats) {
        o << "<td>" << format_number(std::size_t{0})
          << "</td><td colspan=\"7\" class=\"l\">empty</td></tr>\n";
        continue;
      }
      const StatsSummary& st = *m.stats;
      o << "<td>" << format_number(st.count) << "</td>";
      for (double v : {st.min, st.max, st.mean, st.std, st.p10, st.p50, st.p90}) {
        o << "<td>" << format_number(v) << "</td>";
      }
      o << "</tr>\n";
    }
    o << "</table></section>\n";
  }
  o << "<section class=\"charts\"><h2>Charts</h2>\n";
  for (const ChartData& c : doc.charts) {
    o << "<figure data-kind=\"" << to_string(c.kind) << "\">" << detail::render_chart_svg(c)
      << "<figcaption>" << html_escape(c.title) << "</figcaption></figure>\n";
  }
  o << "</section>\n<section class=\"provenance\"><h2>Provenance</h2><pre>"
    << html_escape(doc.provenance.dump(2)) << "</pre></section>\n";
  o << "</body></html>\n";
  out.html = o.str();
  return out;
}

}  // namespace micrometry
