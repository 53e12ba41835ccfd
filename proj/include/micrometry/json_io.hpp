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

// JSON forms of the library's value types. Parameter blocks parse strictly:
// unknown keys are rejected, missing keys keep their defaults.

#pragma once

#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "micrometry/dynamics.hpp"
#include "micrometry/error.hpp"
#include "micrometry/evalkit.hpp"
#include "micrometry/flowgen.hpp"
#include "micrometry/imagecore.hpp"
#include "micrometry/metrology.hpp"
#include "micrometry/scalebar.hpp"
#include "micrometry/synthgen.hpp"

namespace micrometry {

using json = nlohmann::json;

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> known, const char* what) {
  if (!j.is_object()) {
    throw Error(ErrorCode::invalid_argument, std::string(what) + " must be a JSON object");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) {
      throw Error(ErrorCode::invalid_argument,
                  "unknown key '" + it.key() + "' in " + what);
    }
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& field) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    field = it->get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("bad value for '") + key + "': " + e.what());
  }
}

template <typename T>
void read_opt(const json& j, const char* key, std::optional<T>& field) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (it->is_null()) {
    field.reset();
    return;
  }
  T v{};
  read_opt(j, key, v);
  field = v;
}

template <typename T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace detail

// --- enums ----------------------------------------------------------------

NLOHMANN_JSON_SERIALIZE_ENUM(LengthUnit, {{LengthUnit::px, "px"}, {LengthUnit::nm, "nm"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Weighting, {{Weighting::count, "count"},
                                         {Weighting::area, "area"},
                                         {Weighting::volume, "volume"}})
NLOHMANN_JSON_SERIALIZE_ENUM(ParticleShape, {{ParticleShape::disk, "disk"},
                                             {ParticleShape::ellipse, "ellipse"},
                                             {ParticleShape::polygon, "polygon"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Texture, {{Texture::flat, "flat"},
                                       {Texture::noisy, "noisy"},
                                       {Texture::shaded, "shaded"}})
NLOHMANN_JSON_SERIALIZE_ENUM(BarStyle, {{BarStyle::plain, "plain"},
                                        {BarStyle::end_ticks, "end_ticks"},
                                        {BarStyle::panel, "panel"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Polarity, {{Polarity::light_on_dark, "light_on_dark"},
                                        {Polarity::dark_on_light, "dark_on_light"}})
NLOHMANN_JSON_SERIALIZE_ENUM(DetectionSource, {{DetectionSource::heuristic, "heuristic"},
                                               {DetectionSource::external, "external"}})

// Enum strings are checked strictly (the macro maps unknown strings to the
// first enumerator).
template <typename E>
E parse_enum(const json& j, std::initializer_list<std::pair<E, const char*>> names,
             const char* what) {
  if (j.is_string()) {
    for (const auto& [e, n] : names) {
      if (j.get<std::string>() == n) return e;
    }
  }
  throw Error(ErrorCode::invalid_argument, std::string("unknown ") + what + ": " + j.dump());
}

inline Weighting parse_weighting(const json& j) {
  return parse_enum<Weighting>(
      j, {{Weighting::count, "count"}, {Weighting::area, "area"}, {Weighting::volume, "volume"}},
      "weighting");
}

inline LengthUnit parse_length_unit(const json& j) {
  return parse_enum<LengthUnit>(j, {{LengthUnit::px, "px"}, {LengthUnit::nm, "nm"}}, "length unit");
}

inline void to_json(json& j, const Unit& u) { j = unit_symbol(u); }
inline void from_json(const json& j, Unit& u) {
  const auto parsed = j.is_string() ? unit_from_symbol(j.get<std::string>()) : std::nullopt;
  if (!parsed) throw Error(ErrorCode::invalid_argument, "unknown unit: " + j.dump());
  u = *parsed;
}

// --- geometry and encodings -------------------------------------------------

inline void to_json(json& j, const Rect& r) { j = json::array({r.x, r.y, r.w, r.h}); }
inline void from_json(const json& j, Rect& r) {
  if (!j.is_array() || j.size() != 4) {
    throw Error(ErrorCode::invalid_argument, "bbox must be [x, y, w, h]");
  }
  r = {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

inline void to_json(json& j, const RunLengthMask& m) {
  json runs = json::array();
  for (const Run& r : m.runs) runs.push_back(json::array({r.start, r.length}));
  j = json{{"width", m.width}, {"height", m.height}, {"runs", std::move(runs)}};
}
inline void from_json(const json& j, RunLengthMask& m) {
  m.width = j.at("width").get<int>();
  m.height = j.at("height").get<int>();
  m.runs.clear();
  for (const auto& r : j.at("runs")) m.runs.push_back({r.at(0).get<std::uint64_t>(), r.at(1).get<std::uint64_t>()});
}

// --- parameter blocks -------------------------------------------------------

inline void to_json(json& j, const DynamicsParams& p) {
  j = json{{"step_size", p.step_size},         {"max_steps", p.max_steps},
           {"convergence_eps", p.convergence_eps}, {"fg_threshold", p.fg_threshold},
           {"bin_closing_radius", p.bin_closing_radius},
           {"min_instance_area", p.min_instance_area}};
}
inline void from_json(const json& j, DynamicsParams& p) {
  detail::check_keys(j, {"step_size", "max_steps", "convergence_eps", "fg_threshold",
                         "bin_closing_radius", "min_instance_area"},
                     "dynamics");
  detail::read_opt(j, "step_size", p.step_size);
  detail::read_opt(j, "max_steps", p.max_steps);
  detail::read_opt(j, "convergence_eps", p.convergence_eps);
  detail::read_opt(j, "fg_threshold", p.fg_threshold);
  detail::read_opt(j, "bin_closing_radius", p.bin_closing_radius);
  detail::read_opt(j, "min_instance_area", p.min_instance_area);
  p.validate();
}

inline void to_json(json& j, const FlowGenParams& p) {
  j = json{{"iterations_factor", p.iterations_factor}, {"max_iterations", p.max_iterations}};
}
inline void from_json(const json& j, FlowGenParams& p) {
  detail::check_keys(j, {"iterations_factor", "max_iterations"}, "flowgen");
  detail::read_opt(j, "iterations_factor", p.iterations_factor);
  detail::read_opt(j, "max_iterations", p.max_iterations);
  p.validate();
}

inline void to_json(json& j, const EndpointParams& p) {
  j = json{{"window", p.window},
           {"offset", p.offset},
           {"margin", p.margin},
           {"min_amplitude", p.min_amplitude},
           {"min_sharpness", p.min_sharpness},
           {"neighborhood", p.neighborhood}};
}
inline void from_json(const json& j, EndpointParams& p) {
  detail::check_keys(j, {"window", "offset", "margin", "min_amplitude", "min_sharpness",
                         "neighborhood"},
                     "scalebar");
  detail::read_opt(j, "window", p.window);
  detail::read_opt(j, "offset", p.offset);
  detail::read_opt(j, "margin", p.margin);
  detail::read_opt(j, "min_amplitude", p.min_amplitude);
  detail::read_opt(j, "min_sharpness", p.min_sharpness);
  detail::read_opt(j, "neighborhood", p.neighborhood);
  if (p.window < 3 || p.window % 2 == 0) {
    throw Error(ErrorCode::invalid_argument, "scalebar window must be odd and >= 3");
  }
  if (p.margin < 0 || p.neighborhood < 1) {
    throw Error(ErrorCode::invalid_argument, "scalebar margin/neighborhood out of range");
  }
}

inline void to_json(json& j, const FilterCriteria& f) {
  j = json{{"diameter_min", detail::opt_json(f.diameter_min)},
           {"diameter_max", detail::opt_json(f.diameter_max)},
           {"unit", f.unit},
           {"exclude_edge", f.exclude_edge}};
}
inline void from_json(const json& j, FilterCriteria& f) {
  detail::check_keys(j, {"diameter_min", "diameter_max", "unit", "exclude_edge"}, "filter");
  f = {};
  detail::read_opt(j, "diameter_min", f.diameter_min);
  detail::read_opt(j, "diameter_max", f.diameter_max);
  if (j.contains("unit")) f.unit = parse_length_unit(j.at("unit"));
  detail::read_opt(j, "exclude_edge", f.exclude_edge);
  f.validate();
}

// --- results ----------------------------------------------------------------

inline void to_json(json& j, const InstanceMetrics& m) {
  j = json{{"id", m.id},
           {"area_px", m.area_px},
           {"perimeter_px", m.perimeter_px},
           {"diameter_px", m.diameter_px},
           {"diameter_nm", detail::opt_json(m.diameter_phys)},
           {"sphericity", m.sphericity},
           {"aspect_ratio", m.aspect_ratio},
           {"smoothness", m.smoothness},
           {"centroid_x", m.centroid_x},
           {"centroid_y", m.centroid_y},
           {"touches_edge", m.touches_edge}};
}
inline void from_json(const json& j, InstanceMetrics& m) {
  m.id = j.at("id").get<std::uint32_t>();
  m.area_px = j.at("area_px").get<double>();
  m.perimeter_px = j.at("perimeter_px").get<double>();
  m.diameter_px = j.at("diameter_px").get<double>();
  m.diameter_phys.reset();
  detail::read_opt(j, "diameter_nm", m.diameter_phys);
  m.sphericity = j.at("sphericity").get<double>();
  m.aspect_ratio = j.at("aspect_ratio").get<double>();
  m.smoothness = j.at("smoothness").get<double>();
  m.centroid_x = j.at("centroid_x").get<double>();
  m.centroid_y = j.at("centroid_y").get<double>();
  m.touches_edge = j.at("touches_edge").get<bool>();
}

inline void to_json(json& j, const StatsSummary& s) {
  j = json{{"count", s.count}, {"min", s.min}, {"max", s.max}, {"mean", s.mean},
           {"std", s.std},     {"p10", s.p10}, {"p50", s.p50}, {"p90", s.p90}};
}
inline void from_json(const json& j, StatsSummary& s) {
  s.count = j.at("count").get<std::size_t>();
  s.min = j.at("min").get<double>();
  s.max = j.at("max").get<double>();
  s.mean = j.at("mean").get<double>();
  s.std = j.at("std").get<double>();
  s.p10 = j.at("p10").get<double>();
  s.p50 = j.at("p50").get<double>();
  s.p90 = j.at("p90").get<double>();
}

inline void to_json(json& j, const Histogram& h) {
  j = json{{"edges", h.edges}, {"counts", h.counts}};
}
inline void from_json(const json& j, Histogram& h) {
  h.edges = j.at("edges").get<std::vector<double>>();
  h.counts = j.at("counts").get<std::vector<double>>();
}

inline void to_json(json& j, const ScaleCalibration& c) {
  j = json{{"value", c.value},
           {"unit", c.unit},
           {"pixel_length", c.pixel_length},
           {"nm_per_pixel", c.nm_per_pixel}};
}
inline void from_json(const json& j, ScaleCalibration& c) {
  c.value = j.at("value").get<double>();
  c.unit = j.at("unit").get<Unit>();
  c.pixel_length = j.at("pixel_length").get<int>();
  c.nm_per_pixel = j.at("nm_per_pixel").get<double>();
}

inline void to_json(json& j, const BarDetection& b) {
  j = json{{"bbox", b.bbox}, {"kind", "bar"}, {"confidence", b.confidence}, {"source", b.source}};
}
inline void to_json(json& j, const TextDetection& t) {
  j = json{{"bbox", t.bbox}, {"kind", "text"}, {"text", t.text}, {"confidence", t.confidence}};
}

struct Detections {
  std::vector<BarDetection> bars;
  std::vector<TextDetection> texts;
};

// External detections: a list of {bbox: [x, y, w, h], kind: "bar"|"text",
// text?, confidence}.
inline Detections parse_detections(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::invalid_argument, "detections must be a JSON array");
  Detections d;
  for (const json& e : j) {
    detail::check_keys(e, {"bbox", "kind", "text", "confidence"}, "detection");
    const std::string kind = e.at("kind").get<std::string>();
    const Rect box = e.at("bbox").get<Rect>();
    const double conf = e.value("confidence", 1.0);
    if (conf < 0 || conf > 1) throw Error(ErrorCode::invalid_argument, "confidence outside [0, 1]");
    if (kind == "bar") {
      d.bars.push_back({box, conf, DetectionSource::external});
    } else if (kind == "text") {
      d.texts.push_back({box, e.value("text", std::string()), conf});
    } else {
      throw Error(ErrorCode::invalid_argument, "detection kind must be 'bar' or 'text'");
    }
  }
  return d;
}

inline json detections_json(const Detections& d) {
  json out = json::array();
  for (const auto& b : d.bars) out.push_back(b);
  for (const auto& t : d.texts) out.push_back(t);
  return out;
}

inline json scalebar_json(const ScalebarRecognition& r) {
  json j = json::object();
  j["bar_bbox"] = r.bar ? json(r.bar->bbox) : json(nullptr);
  if (r.endpoints) {
    j["x_left"] = r.endpoints->x_left;
    j["x_right"] = r.endpoints->x_right;
    j["row"] = r.endpoints->row;
    j["pixel_length"] = r.endpoints->pixel_length;
  } else {
    j["x_left"] = j["x_right"] = j["row"] = j["pixel_length"] = nullptr;
  }
  if (r.calibration) {
    j["value"] = r.calibration->value;
    j["unit"] = r.calibration->unit;
    j["nm_per_pixel"] = r.calibration->nm_per_pixel;
  } else {
    j["value"] = j["unit"] = j["nm_per_pixel"] = nullptr;
  }
  j["text"] = r.text ? json(r.text->text) : json(nullptr);
  j["failure"] = r.failure.empty() ? json(nullptr) : json(r.failure);
  return j;
}

inline void to_json(json& j, const ImageScore& s) {
  j = json{{"name", s.name}, {"ap", s.ap}, {"pq", s.pq}, {"instance_count", s.instance_count},
           {"tp", s.tp},     {"fp", s.fp}, {"fn", s.fn}};
}

inline void to_json(json& j, const EvalReport& r) {
  j = json{{"subset", to_string(r.subset)},
           {"iou_threshold", r.threshold},
           {"metric", "AP (TP/(TP+FP+FN))"},
           {"mean_ap", r.mean_ap},
           {"mean_pq", r.mean_pq},
           {"per_image", r.per_image}};
}

inline void to_json(json& j, const ScalebarReport& r) {
  j = json{{"count", r.count},
           {"unit_accuracy", r.unit_accuracy},
           {"value_accuracy", r.value_accuracy},
           {"mae_px", r.mae_px},
           {"exact_fraction", r.exact_fraction},
           {"mean_abs_rel_error", r.mean_abs_rel_error},
           {"abs_rel_error_percentiles", {{"p50", r.p50}, {"p75", r.p75}, {"p90", r.p90}, {"p95", r.p95}}}};
}

// --- synthetic specs and truth ---------------------------------------------

inline void to_json(json& j, const SceneSpec& s) {
  j = json{{"width", s.width},
           {"height", s.height},
           {"particle_count", s.particle_count},
           {"particle_count_max", s.particle_count_max},
           {"shape", s.shape},
           {"log_mean", s.log_mean},
           {"log_sigma", s.log_sigma},
           {"diameter_min", s.diameter_min},
           {"diameter_max", s.diameter_max},
           {"max_pairwise_iou", s.max_pairwise_iou},
           {"texture", s.texture},
           {"noise_sigma", s.noise_sigma},
           {"background_gray", s.background_gray},
           {"gray_min", s.gray_min},
           {"gray_max", s.gray_max},
           {"min_visible_area", s.min_visible_area},
           {"max_attempts", s.max_attempts},
           {"seed", s.seed}};
}
inline void from_json(const json& j, SceneSpec& s) {
  detail::check_keys(j, {"width", "height", "particle_count", "particle_count_max", "shape",
                         "log_mean", "log_sigma", "diameter_min", "diameter_max",
                         "max_pairwise_iou", "texture", "noise_sigma", "background_gray",
                         "gray_min", "gray_max", "min_visible_area", "max_attempts", "seed"},
                     "scene spec");
  detail::read_opt(j, "width", s.width);
  detail::read_opt(j, "height", s.height);
  detail::read_opt(j, "particle_count", s.particle_count);
  detail::read_opt(j, "particle_count_max", s.particle_count_max);
  if (j.contains("shape")) {
    s.shape = parse_enum<ParticleShape>(j["shape"],
                                        {{ParticleShape::disk, "disk"},
                                         {ParticleShape::ellipse, "ellipse"},
                                         {ParticleShape::polygon, "polygon"}},
                                        "shape");
  }
  detail::read_opt(j, "log_mean", s.log_mean);
  detail::read_opt(j, "log_sigma", s.log_sigma);
  detail::read_opt(j, "diameter_min", s.diameter_min);
  detail::read_opt(j, "diameter_max", s.diameter_max);
  detail::read_opt(j, "max_pairwise_iou", s.max_pairwise_iou);
  if (j.contains("texture")) {
    s.texture = parse_enum<Texture>(
        j["texture"], {{Texture::flat, "flat"}, {Texture::noisy, "noisy"}, {Texture::shaded, "shaded"}},
        "texture");
  }
  detail::read_opt(j, "noise_sigma", s.noise_sigma);
  detail::read_opt(j, "background_gray", s.background_gray);
  detail::read_opt(j, "gray_min", s.gray_min);
  detail::read_opt(j, "gray_max", s.gray_max);
  detail::read_opt(j, "min_visible_area", s.min_visible_area);
  detail::read_opt(j, "max_attempts", s.max_attempts);
  detail::read_opt(j, "seed", s.seed);
  s.validate();
}

inline void to_json(json& j, const ScaleBarSpec& s) {
  j = json{{"canvas_w", s.canvas_w},
           {"canvas_h", s.canvas_h},
           {"bar_length_px", s.bar_length_px},
           {"bar_thickness", s.bar_thickness},
           {"style", s.style},
           {"polarity", s.polarity},
           {"value", s.value},
           {"unit", s.unit},
           {"font_scale", s.font_scale},
           {"scene_background", s.scene_background},
           {"space_before_unit", s.space_before_unit},
           {"clear_halo", s.clear_halo},
           {"seed", s.seed}};
}

inline void to_json(json& j, const ScaleBarTemplate& t) {
  j = json{{"canvas_w", t.canvas_w},         {"canvas_h", t.canvas_h},
           {"length_min", t.length_min},     {"length_max", t.length_max},
           {"thickness_min", t.thickness_min}, {"thickness_max", t.thickness_max},
           {"clear_halo", t.clear_halo}};
}
inline void from_json(const json& j, ScaleBarTemplate& t) {
  detail::check_keys(j, {"canvas_w", "canvas_h", "length_min", "length_max", "thickness_min",
                         "thickness_max", "clear_halo"},
                     "scale-bar template");
  detail::read_opt(j, "canvas_w", t.canvas_w);
  detail::read_opt(j, "canvas_h", t.canvas_h);
  detail::read_opt(j, "length_min", t.length_min);
  detail::read_opt(j, "length_max", t.length_max);
  detail::read_opt(j, "thickness_min", t.thickness_min);
  detail::read_opt(j, "thickness_max", t.thickness_max);
  detail::read_opt(j, "clear_halo", t.clear_halo);
  t.validate();
}

inline void to_json(json& j, const ParticleTruth& p) {
  j = json{{"id", p.id},
           {"source_index", p.source_index},
           {"center", json::array({p.center_x, p.center_y})},
           {"nominal_diameter", p.nominal_diameter},
           {"touches_edge", p.touches_edge}};
}

inline void to_json(json& j, const ScaleBarTruth& t) {
  j = json{{"bar_bbox", t.bar_bbox}, {"x_left", t.x_left},       {"x_right", t.x_right},
           {"pixel_length", t.pixel_length}, {"text", t.text}, {"text_bbox", t.text_bbox},
           {"value", t.value},       {"unit", t.unit}};
}
inline void from_json(const json& j, ScaleBarTruth& t) {
  t.bar_bbox = j.at("bar_bbox").get<Rect>();
  t.x_left = j.at("x_left").get<int>();
  t.x_right = j.at("x_right").get<int>();
  t.pixel_length = j.at("pixel_length").get<int>();
  t.text = j.at("text").get<std::string>();
  t.text_bbox = j.at("text_bbox").get<Rect>();
  t.value = j.at("value").get<double>();
  t.unit = j.at("unit").get<Unit>();
}

}  // namespace micrometry
