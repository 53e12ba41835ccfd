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

// End-to-end analysis of one image: segmentation (from a flow field or a
// label map supplied directly), scale-bar recognition, metrology, filtering
// and statistics. Also the results document shared by the CLI and service.

#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "micrometry/dynamics.hpp"
#include "micrometry/flowgen.hpp"
#include "micrometry/imagecore.hpp"
#include "micrometry/json_io.hpp"
#include "micrometry/metrology.hpp"
#include "micrometry/png_io.hpp"
#include "micrometry/report.hpp"
#include "micrometry/scalebar.hpp"

namespace micrometry {

inline constexpr const char* kResultsSchema = "micrometry.results/1";
inline constexpr const char* kConfigSchema = "micrometry.config/1";

struct PipelineConfig {
  DynamicsParams dynamics;
  FlowGenParams flowgen;
  EndpointParams scalebar;
  FilterCriteria filter;
  Weighting weighting = Weighting::count;
  ReportOptions report;
  bool write_report = true;
  int threads = 0;  // 0: MICROMETRY_THREADS or hardware concurrency

  friend bool operator==(const PipelineConfig& a, const PipelineConfig& b);
};

inline void to_json(json& j, const ReportOptions& r) {
  j = json{{"bin_width", r.bin_width}, {"scatter_x", r.scatter_x}, {"scatter_y", r.scatter_y}};
}

inline void to_json(json& j, const PipelineConfig& c) {
  j = json{{"schema", kConfigSchema},
           {"dynamics", c.dynamics},
           {"flowgen", c.flowgen},
           {"scalebar", c.scalebar},
           {"filter", c.filter},
           {"weighting", c.weighting},
           {"report", {{"enabled", c.write_report},
                       {"bin_width", c.report.bin_width},
                       {"scatter_x", c.report.scatter_x},
                       {"scatter_y", c.report.scatter_y}}},
           {"threads", c.threads}};
}

inline void from_json(const json& j, PipelineConfig& c) {
  detail::check_keys(j, {"schema", "dynamics", "flowgen", "scalebar", "filter", "weighting",
                         "report", "threads"},
                     "config");
  if (j.contains("schema") && j["schema"] != kConfigSchema) {
    throw Error(ErrorCode::version_mismatch, "unsupported config schema");
  }
  if (j.contains("dynamics")) c.dynamics = j["dynamics"].get<DynamicsParams>();
  if (j.contains("flowgen")) c.flowgen = j["flowgen"].get<FlowGenParams>();
  if (j.contains("scalebar")) c.scalebar = j["scalebar"].get<EndpointParams>();
  if (j.contains("filter")) c.filter = j["filter"].get<FilterCriteria>();
  if (j.contains("weighting")) c.weighting = parse_weighting(j["weighting"]);
  if (j.contains("report")) {
    const json& r = j["report"];
    detail::check_keys(r, {"enabled", "bin_width", "scatter_x", "scatter_y"}, "report");
    detail::read_opt(r, "enabled", c.write_report);
    detail::read_opt(r, "bin_width", c.report.bin_width);
    detail::read_opt(r, "scatter_x", c.report.scatter_x);
    detail::read_opt(r, "scatter_y", c.report.scatter_y);
    if (c.report.bin_width < 0) throw Error(ErrorCode::invalid_argument, "bin_width must be >= 0");
  }
  detail::read_opt(j, "threads", c.threads);
  if (c.threads < 0) throw Error(ErrorCode::invalid_argument, "threads must be >= 0");
}

inline bool operator==(const PipelineConfig& a, const PipelineConfig& b) {
  return json(a) == json(b);
}

// ---------------------------------------------------------------------------

struct AnalysisInput {
  std::string name;
  Raster8 image;
  std::optional<FlowField> flow;
  std::optional<LabelMap> labels;
  Detections detections;
};

struct AnalysisResult {
  std::string name;
  int width = 0, height = 0;
  ScalebarRecognition scalebar;
  std::optional<ScaleCalibration> calibration;
  LabelMap labels;
  std::vector<InstanceMetrics> metrics;   // every instance, id order
  std::vector<InstanceMetrics> filtered;  // survivors of the filter
};

inline std::optional<double> nm_per_pixel(const std::optional<ScaleCalibration>& c) {
  if (!c) return std::nullopt;
  return c->nm_per_pixel;
}

// Labels from the flow field when one is given, else the supplied labels.
inline LabelMap segmentation_source(const AnalysisInput& in, const PipelineConfig& cfg) {
  if (in.flow) {
    if (in.flow->width != in.image.width() || in.flow->height != in.image.height()) {
      throw Error(ErrorCode::dimension_mismatch, "dimension mismatch");
    }
    return segment(*in.flow, cfg.dynamics, cfg.threads);
  }
  if (in.labels) {
    if (in.labels->width() != in.image.width() || in.labels->height() != in.image.height()) {
      throw Error(ErrorCode::dimension_mismatch, "dimension mismatch");
    }
    return canonicalize_labels(*in.labels);
  }
  throw Error(ErrorCode::not_found, "no segmentation source");
}

inline AnalysisResult analyze_image(const AnalysisInput& in, const PipelineConfig& cfg) {
  AnalysisResult r;
  r.name = in.name;
  r.width = in.image.width();
  r.height = in.image.height();
  r.labels = segmentation_source(in, cfg);
  r.scalebar = recognize_scalebar(in.image, in.detections.bars, in.detections.texts, cfg.scalebar);
  r.calibration = r.scalebar.calibration;
  r.metrics = measure_all(r.labels, nm_per_pixel(r.calibration), cfg.threads);
  r.filtered = filter_instances(r.metrics, cfg.filter);
  return r;
}

// Per-instance run-length masks from one raster pass; index = id.
inline std::vector<RunLengthMask> instance_rles(const LabelMap& lm) {
  const std::uint32_t k = max_label(lm);
  std::vector<RunLengthMask> out(k + 1, RunLengthMask{lm.width(), lm.height(), {}});
  const std::uint64_t n = lm.size();
  std::uint64_t i = 0;
  while (i < n) {
    const std::uint32_t v = lm[i];
    const std::uint64_t start = i;
    while (i < n && lm[i] == v) ++i;
    if (v != 0) out[v].runs.push_back({start, i - start});
  }
  return out;
}

// The results document: instances (RLE, metrics, filter verdict), scale-bar
// recognition, calibration, filter and statistics over the survivors.
inline json results_json(const std::string& name, const LabelMap& labels,
                         const std::vector<InstanceMetrics>& metrics,
                         const json& scalebar, const std::optional<ScaleCalibration>& calibration,
                         const FilterCriteria& filter, Weighting weighting,
                         std::optional<std::uint64_t> version = {}) {
  const std::vector<Rect> boxes = label_boxes(labels);
  const std::vector<RunLengthMask> rles = instance_rles(labels);
  std::vector<InstanceMetrics> survivors;
  json instances = json::array();
  for (const InstanceMetrics& m : metrics) {
    const bool ok = passes(m, filter);
    if (ok) survivors.push_back(m);
    instances.push_back(json{{"id", m.id},
                             {"bbox", boxes[m.id]},
                             {"rle", rles[m.id]},
                             {"metrics", m},
                             {"passes_filter", ok}});
  }
  json j{{"schema", kResultsSchema},
         {"name", name},
         {"width", labels.width()},
         {"height", labels.height()},
         {"scalebar", scalebar},
         {"calibration", calibration ? json(*calibration) : json(nullptr)},
         {"filter", filter},
         {"statistics", summarize_sample(name, survivors, calibration, weighting)},
         {"instances", std::move(instances)}};
  if (version) j["version"] = *version;
  return j;
}

inline json results_json(const AnalysisResult& r, const PipelineConfig& cfg) {
  return results_json(r.name, r.labels, r.metrics, scalebar_json(r.scalebar), r.calibration,
                      cfg.filter, cfg.weighting);
}

// ---------------------------------------------------------------------------
// Overlay and hashing

inline std::array<std::uint8_t, 3> instance_color(std::uint32_t id) {
  std::uint32_t h = id * 2654435761u;
  h ^= h >> 15;
  return {static_cast<std::uint8_t>(64 + (h & 0xBF)), static_cast<std::uint8_t>(64 + ((h >> 8) & 0xBF)),
          static_cast<std::uint8_t>(64 + ((h >> 16) & 0xBF))};
}

// RGB rendering with every instance tinted; instances outside `keep` (when
// given, indexed by id) are drawn dimmed.
inline Raster8 render_overlay(const Raster8& image, const LabelMap& labels,
                              const std::vector<std::uint8_t>* keep = nullptr) {
  if (image.width() != labels.width() || image.height() != labels.height()) {
    throw Error(ErrorCode::dimension_mismatch, "image and labels differ in size");
  }
  Raster8 out(image.width(), image.height(), 3);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const int g = image.channels() == 1 ? image.at(y, x) : detail::luminance(image, y, x);
      const std::uint32_t id = labels(y, x);
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = static_cast<std::uint8_t>(g);
      if (id == 0) continue;
      const bool active = !keep || (id < keep->size() && (*keep)[id]);
      const auto col = instance_color(id);
      for (int c = 0; c < 3; ++c) {
        const int tint = active ? col[c] : 128;
        out.at(y, x, c) = static_cast<std::uint8_t>((g + tint) / 2);
      }
    }
  }
  return out;
}

// FNV-1a, 64 bit; used for provenance only.
inline std::string fnv1a_hex(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// File loading for batch use. Sibling files share the image's stem.

inline std::string strip_png(const std::string& path) {
  if (path.size() > 4 && path.compare(path.size() - 4, 4, ".png") == 0) {
    return path.substr(0, path.size() - 4);
  }
  return path;
}

inline json read_json_file(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::decode, path + ": " + e.what());
  }
}

}  // namespace micrometry
