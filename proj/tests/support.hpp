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

#pragma once

// Fixtures shared by the service tests and the acceptance run.

#include <string>

#include "micrometry/corpus.hpp"
#include "micrometry/json_io.hpp"
#include "micrometry/synthgen.hpp"

namespace micrometry::testing {

inline Scene disk_scene(int size, int count, std::uint64_t seed, double log_mean = 3.0) {
  SceneSpec s;
  s.width = size;
  s.height = size;
  s.particle_count = count;
  s.log_mean = log_mean;
  s.log_sigma = 0.2;
  s.diameter_min = 8;
  s.diameter_max = 60;
  s.seed = seed;
  return gen_scene(s);
}

// Stamps a 200 px bar labelled `value_um` (5 um: 25 nm/px) and returns the
// detections file holding its label text.
inline std::string stamp_scalebar(Raster8& img, std::uint64_t seed, double value_um = 5) {
  ScaleBarSpec spec;
  spec.canvas_w = img.width();
  spec.canvas_h = img.height();
  spec.bar_length_px = 200;
  spec.value = value_um;
  spec.unit = Unit::um;
  spec.seed = seed;
  const ScaleBarTruth t = draw_scalebar(img, spec, 90);
  Detections d;
  d.texts.push_back(truth_text_detection(t));
  return detections_json(d).dump();
}

}  // namespace micrometry::testing
