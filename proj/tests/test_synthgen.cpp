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

#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "micrometry/corpus.hpp"
#include "micrometry/pipeline.hpp"
#include "micrometry/synthgen.hpp"

namespace micrometry {
namespace {

std::uint64_t fnv(std::uint64_t h, std::span<const std::uint8_t> b) {
  for (std::uint8_t v : b) h = (h ^ v) * 1099511628211ull;
  return h;
}

std::uint64_t fnv(std::uint64_t h, const std::string& s) {
  return fnv(h, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

std::string temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("micrometry_test_" + name);
  std::filesystem::remove_all(p);
  return p.string();
}

TEST(Rng, ReproducibleStreams) {
  Rng a(7), b(7), c(derive_seed(7, 1));
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  EXPECT_NE(Rng(7).next(), c.next());
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    const auto v = r.uniform_int(-3, 4);
    EXPECT_GE(v, -3);
    EXPECT_LE(v, 4);
  }
}

TEST(Scene, ZeroParticlesIsBackgroundOnly) {
  SceneSpec s;
  s.particle_count = 0;
  s.texture = Texture::flat;
  const Scene sc = gen_scene(s);
  EXPECT_EQ(max_label(sc.truth.label_map), 0u);
  for (auto v : sc.image.data()) EXPECT_EQ(v, s.background_gray);
}

TEST(Scene, HundredDisksCanonical) {
  SceneSpec s;
  s.particle_count = 100;
  s.seed = 21;
  const Scene sc = gen_scene(s);
  EXPECT_EQ(sc.truth.placed, 100);
  EXPECT_EQ(max_label(sc.truth.label_map), 100u);
  EXPECT_TRUE(is_canonical(sc.truth.label_map));
  ASSERT_EQ(sc.truth.particles.size(), 100u);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(sc.truth.particles[i].id, i + 1);
}

TEST(Scene, DenseRegimeReportsPlacedCount) {
  SceneSpec s;
  s.width = s.height = 2048;
  s.particle_count = 2400;
  s.log_mean = 2.9;
  s.seed = 5;
  const Scene sc = gen_scene(s);
  EXPECT_EQ(sc.truth.requested, 2400);
  EXPECT_LE(sc.truth.placed, 2400);
  EXPECT_GE(sc.truth.placed, 2000);
  EXPECT_EQ(max_label(sc.truth.label_map), static_cast<std::uint32_t>(sc.truth.placed));
}

TEST(Scene, DiameterBoundsRespected) {
  SceneSpec s;
  s.particle_count = 200;
  s.diameter_min = 10;
  s.diameter_max = 30;
  s.log_sigma = 1.0;
  s.seed = 9;
  for (const auto& p : gen_scene(s).truth.particles) {
    EXPECT_GE(p.nominal_diameter, 10);
    EXPECT_LE(p.nominal_diameter, 30);
  }
}

TEST(Scene, SpecValidation) {
  SceneSpec s;
  s.width = 0;
  EXPECT_THROW(gen_scene(s), Error);
  s = {};
  s.log_sigma = -1;
  EXPECT_THROW(gen_scene(s), Error);
}

TEST(Scalebar, TruthByConstruction) {
  ScaleBarSpec spec;
  spec.bar_length_px = 200;
  spec.value = 5;
  spec.unit = Unit::um;
  const ScaleBarImage img = gen_scalebar_image(spec);
  EXPECT_EQ(img.truth.pixel_length, 200);
  EXPECT_EQ(img.truth.value, 5);
  EXPECT_EQ(img.truth.unit, Unit::um);
  EXPECT_EQ(img.truth.x_right - img.truth.x_left + 1, 200);
}

TEST(Scalebar, TicksSpanOuterColumns) {
  ScaleBarSpec spec;
  spec.style = BarStyle::end_ticks;
  spec.bar_thickness = 6;
  const ScaleBarImage img = gen_scalebar_image(spec);
  EXPECT_EQ(img.truth.bar_bbox.x, img.truth.x_left);
  EXPECT_EQ(img.truth.bar_bbox.right() - 1, img.truth.x_right);
  EXPECT_GT(img.truth.bar_bbox.h, spec.bar_thickness);
}

// Hashes raw pixels and truth, not encoded PNG bytes, so the check does
// not depend on the zlib build.
std::uint64_t scalebar_corpus_hash(std::uint64_t base_seed, int n) {
  std::uint64_t h = 1469598103934665603ull;
  for (int i = 0; i < n; ++i) {
    const ScaleBarSpec spec = sample_scalebar_spec({}, base_seed + i);
    const ScaleBarImage img = gen_scalebar_image(spec);
    h = fnv(h, img.image.data());
    h = fnv(h, json(img.truth).dump());
  }
  return h;
}

TEST(Scalebar, CorpusIsDeterministic) {
  EXPECT_EQ(scalebar_corpus_hash(7, 200), scalebar_corpus_hash(7, 200));
  EXPECT_NE(scalebar_corpus_hash(7, 5), scalebar_corpus_hash(8, 5));
}

TEST(Scalebar, CorpusCoversManyValueUnitPairs) {
  std::set<std::pair<double, Unit>> combos;
  for (int i = 0; i < 200; ++i) {
    const ScaleBarSpec s = sample_scalebar_spec({}, 7 + i);
    combos.insert({s.value, s.unit});
  }
  EXPECT_GE(combos.size(), 8u);
}

TEST(Corpus, SceneFilesAndManifest) {
  const std::string dir = temp_dir("scenes");
  SceneSpec tmpl;
  tmpl.width = tmpl.height = 128;
  tmpl.particle_count = 10;
  const json a = write_scene_corpus(tmpl, 10, 3, dir, 2);
  for (int i = 0; i < 10; ++i) {
    EXPECT_TRUE(std::filesystem::exists(dir + "/" + a["items"][i]["image"].get<std::string>()));
    EXPECT_TRUE(std::filesystem::exists(dir + "/" + a["items"][i]["labels"].get<std::string>()));
  }
  EXPECT_TRUE(std::filesystem::exists(dir + "/manifest.json"));
  const json b = write_scene_corpus(tmpl, 10, 3, temp_dir("scenes2"), 1);
  EXPECT_EQ(a, b);
  const LabelMap lm = read_label_png(dir + "/scene_0004_labels.png");
  SceneSpec s4 = tmpl;
  s4.seed = 7;
  EXPECT_EQ(lm, gen_scene(s4).truth.label_map);
}

TEST(Corpus, ScalebarManifestRoundTrip) {
  const std::string dir = temp_dir("bars");
  const json m = write_scalebar_corpus({}, 4, 11, dir);
  EXPECT_EQ(m, read_json_file(dir + "/manifest.json"));
  for (const auto& it : m["items"]) {
    const ScaleBarTruth t = it["truth"].get<ScaleBarTruth>();
    EXPECT_EQ(json(t), it["truth"]);
    const Detections d = parse_detections(read_json_file(dir + "/" + it["detections"].get<std::string>()));
    ASSERT_EQ(d.texts.size(), 1u);
    EXPECT_EQ(d.texts[0].text, t.text);
  }
}

}  // namespace
}  // namespace micrometry
