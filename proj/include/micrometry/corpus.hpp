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

// Writes seeded synthetic corpora to disk with a manifest.json describing
// every item. Item i uses seed base_seed + i.
//
// Manifest schema (micrometry.corpus/1):
//   {schema, kind: "scene"|"scalebar", n, base_seed, template, items: [...]}
//   scene item:    {index, seed, image, labels, requested, placed, particles}
//   scalebar item: {index, seed, image, detections, spec, truth}
// Paths are relative to the manifest's directory.

#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "micrometry/json_io.hpp"
#include "micrometry/parallel.hpp"
#include "micrometry/png_io.hpp"
#include "micrometry/synthgen.hpp"

namespace micrometry {

inline constexpr const char* kCorpusSchema = "micrometry.corpus/1";

namespace detail {

inline std::string indexed_name(const char* prefix, int i, const char* suffix) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04d%s", prefix, i, suffix);
  return buf;
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create directory " + dir + ": " + ec.message());
}

inline void write_text_file(const std::string& path, const std::string& text) {
  write_file_bytes(path, std::span<const std::uint8_t>(
                             reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace detail

// Text detection standing in for an OCR engine: the rendered string at its box.
inline TextDetection truth_text_detection(const ScaleBarTruth& t, double confidence = 0.9) {
  return {t.text_bbox, t.text, confidence};
}

inline json write_scene_corpus(const SceneSpec& tmpl, int n, std::uint64_t base_seed,
                               const std::string& dir, int threads = 0) {
  if (n < 1) throw Error(ErrorCode::invalid_argument, "corpus size must be >= 1");
  tmpl.validate();
  detail::ensure_dir(dir);
  std::vector<json> items(static_cast<std::size_t>(n));
  parallel_for(items.size(), threads, [&](std::size_t i) {
    SceneSpec spec = tmpl;
    spec.seed = base_seed + i;
    const Scene scene = gen_scene(spec);
    const std::string image = detail::indexed_name("scene", static_cast<int>(i), ".png");
    const std::string labels = detail::indexed_name("scene", static_cast<int>(i), "_labels.png");
    write_png_image(scene.image, dir + "/" + image);
    write_label_png(scene.truth.label_map, dir + "/" + labels);
    items[i] = json{{"index", i},
                    {"seed", spec.seed},
                    {"image", image},
                    {"labels", labels},
                    {"requested", scene.truth.requested},
                    {"placed", scene.truth.placed},
                    {"particles", scene.truth.particles}};
  });
  json manifest{{"schema", kCorpusSchema}, {"kind", "scene"}, {"n", n},
                {"base_seed", base_seed},  {"template", tmpl}, {"items", items}};
  detail::write_text_file(dir + "/manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

inline json write_scalebar_corpus(const ScaleBarTemplate& tmpl, int n, std::uint64_t base_seed,
                                  const std::string& dir, int threads = 0) {
  if (n < 1) throw Error(ErrorCode::invalid_argument, "corpus size must be >= 1");
  tmpl.validate();
  detail::ensure_dir(dir);
  std::vector<json> items(static_cast<std::size_t>(n));
  parallel_for(items.size(), threads, [&](std::size_t i) {
    const ScaleBarSpec spec = sample_scalebar_spec(tmpl, base_seed + i);
    const ScaleBarImage img = gen_scalebar_image(spec);
    const std::string image = detail::indexed_name("scalebar", static_cast<int>(i), ".png");
    const std::string dets =
        detail::indexed_name("scalebar", static_cast<int>(i), ".detections.json");
    write_png_image(img.image, dir + "/" + image);
    Detections d;
    d.texts.push_back(truth_text_detection(img.truth));
    detail::write_text_file(dir + "/" + dets, detections_json(d).dump(2) + "\n");
    items[i] = json{{"index", i},   {"seed", spec.seed}, {"image", image},
                    {"detections", dets}, {"spec", spec}, {"truth", img.truth}};
  });
  json manifest{{"schema", kCorpusSchema}, {"kind", "scalebar"}, {"n", n},
                {"base_seed", base_seed},  {"template", tmpl},   {"items", items}};
  detail::write_text_file(dir + "/manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

}  // namespace micrometry
