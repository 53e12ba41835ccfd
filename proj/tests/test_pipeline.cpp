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

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "micrometry/pipeline.hpp"
#include "support.hpp"

namespace micrometry {
namespace {

namespace fs = std::filesystem;

std::string fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("micrometry_pipe_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

struct CliResult {
  int exit_code = -1;
  std::string out;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(MICROMETRY_CLI) + " " + args + " 2>/dev/null";
  CliResult r;
  std::FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = ::pclose(p);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Config, RoundTrip) {
  PipelineConfig c;
  c.dynamics.max_steps = 150;
  c.filter.diameter_min = 3;
  c.filter.exclude_edge = true;
  c.weighting = Weighting::volume;
  c.report.bin_width = 2.5;
  c.threads = 3;
  const json j = c;
  EXPECT_EQ(j.get<PipelineConfig>(), c);
  EXPECT_EQ(json(json::parse(j.dump()).get<PipelineConfig>()), j);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  for (const char* text :
       {R"({"dynamcis": {}})", R"({"report": {"colour": 1}})", R"({"threads": -1})",
        R"({"schema": "micrometry.config/9"})", R"({"filter": {"diameter_min": 5, "diameter_max": 1}})",
        R"({"weighting": "mass"})"}) {
    EXPECT_THROW((void)json::parse(text).get<PipelineConfig>(), Error) << text;
  }
  EXPECT_NO_THROW((void)json::parse("{}").get<PipelineConfig>());
}

TEST(Analyze, DeterministicAcrossThreadCounts) {
  Scene s = testing::disk_scene(256, 40, 6);
  const std::string dets = testing::stamp_scalebar(s.image, 1);
  AnalysisInput in;
  in.name = "x";
  in.image = s.image;
  in.flow = labels_to_flows(s.truth.label_map);
  in.detections = parse_detections(json::parse(dets));
  std::string first;
  for (int threads : {1, 2, 5}) {
    PipelineConfig cfg;
    cfg.threads = threads;
    const std::string dump = results_json(analyze_image(in, cfg), cfg).dump();
    if (first.empty()) first = dump;
    EXPECT_EQ(dump, first) << threads;
  }
  PipelineConfig cfg;
  const AnalysisResult r = analyze_image(in, cfg);
  ASSERT_TRUE(r.calibration);
  EXPECT_DOUBLE_EQ(r.calibration->nm_per_pixel, 25.0);
  EXPECT_EQ(r.metrics.size(), static_cast<std::size_t>(s.truth.placed));
}

TEST(Analyze, OverlayMarksFilteredInstancesDifferently) {
  const Scene s = testing::disk_scene(128, 6, 3);
  std::vector<std::uint8_t> keep(max_label(s.truth.label_map) + 1, 1);
  keep[1] = 0;
  const Raster8 all = render_overlay(s.image, s.truth.label_map, nullptr);
  const Raster8 some = render_overlay(s.image, s.truth.label_map, &keep);
  EXPECT_EQ(all.width(), 128);
  EXPECT_NE(fnv1a_hex(encode_png(all)), fnv1a_hex(encode_png(some)));
}

TEST(Cli, SegmentAndEvaluateRoundTrip) {
  const std::string dir = fresh_dir("evalseg");
  ASSERT_EQ(run_cli("synth scene --n 3 --seed 9 --out " + dir + "/corpus").exit_code, 0);
  fs::create_directories(dir + "/gt");
  fs::create_directories(dir + "/pred");
  for (int i = 0; i < 3; ++i) {
    const std::string stem = detail::indexed_name("scene", i, "");
    const std::string labels = dir + "/corpus/" + stem + "_labels.png";
    fs::copy_file(labels, dir + "/gt/" + stem + ".png");
    const std::string flow = dir + "/" + stem + ".uafl";
    ASSERT_EQ(run_cli("flow gen --labels " + labels + " --out " + flow).exit_code, 0);
    ASSERT_EQ(run_cli("segment --flow " + flow + " --out " + dir + "/pred/" + stem + ".png").exit_code, 0);
  }
  const CliResult r = run_cli("eval seg --pred " + dir + "/pred --gt " + dir + "/gt");
  ASSERT_EQ(r.exit_code, 0) << r.out;
  const json j = json::parse(r.out);
  EXPECT_GE(j["all"]["mean_ap"].get<double>(), 0.9);
  EXPECT_EQ(j["all"]["per_image"].size(), 3u);

  // identical directories score perfectly
  const json same = json::parse(run_cli("eval seg --pred " + dir + "/gt --gt " + dir + "/gt").out);
  EXPECT_EQ(same["all"]["mean_ap"], 1.0);
  EXPECT_EQ(same["all"]["mean_pq"], 1.0);

  // a missing prediction fails the run
  fs::remove(dir + "/pred/" + detail::indexed_name("scene", 1, ".png"));
  const CliResult partial = run_cli("eval seg --pred " + dir + "/pred --gt " + dir + "/gt");
  EXPECT_EQ(partial.exit_code, 1);
  EXPECT_EQ(json::parse(partial.out)["missing"].size(), 1u);
}

TEST(Cli, SynthIsReproducible) {
  const std::string dir = fresh_dir("synth");
  ASSERT_EQ(run_cli("synth scalebar --n 4 --seed 2 --out " + dir + "/a").exit_code, 0);
  ASSERT_EQ(run_cli("synth scalebar --n 4 --seed 2 --out " + dir + "/b --threads 1").exit_code, 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir + "/a")) {
    const std::string name = e.path().filename().string();
    EXPECT_EQ(slurp(e.path().string()), slurp(dir + "/b/" + name)) << name;
    ++files;
  }
  EXPECT_GE(files, 9u);
  const CliResult ev = run_cli("eval scalebar --corpus " + dir + "/a");
  ASSERT_EQ(ev.exit_code, 0);
  EXPECT_EQ(json::parse(ev.out)["images"].size(), 4u);
}

TEST(Cli, DumpConfigRoundTrips) {
  const std::string dir = fresh_dir("config");
  const CliResult d = run_cli("--dump-config");
  ASSERT_EQ(d.exit_code, 0);
  EXPECT_EQ(json::parse(d.out), json(PipelineConfig{}));
  detail::write_text_file(dir + "/c.json", R"({"weighting": "area", "threads": 2})");
  const json with = json::parse(run_cli("--config " + dir + "/c.json --dump-config").out);
  EXPECT_EQ(with["weighting"], "area");
  EXPECT_EQ(with["threads"], 2);
  detail::write_text_file(dir + "/bad.json", R"({"speed": 11})");
  EXPECT_EQ(run_cli("--config " + dir + "/bad.json --dump-config").exit_code, 2);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli("").exit_code, 2);
  EXPECT_EQ(run_cli("frobnicate").exit_code, 2);
  EXPECT_EQ(run_cli("segment --flow /nonexistent.uafl --out x.png").exit_code, 2);
  const std::string dir = fresh_dir("exit");
  detail::write_text_file(dir + "/broken.uafl", "garbage");
  EXPECT_EQ(run_cli("segment --flow " + dir + "/broken.uafl --out " + dir + "/o.png").exit_code, 1);
}

TEST(Cli, AnalyzeWritesResultsAndReport) {
  const std::string dir = fresh_dir("analyze");
  Scene s = testing::disk_scene(256, 30, 12);
  const std::string dets = testing::stamp_scalebar(s.image, 3);
  write_png_image(s.image, dir + "/a.png");
  write_label_png(s.truth.label_map, dir + "/a_labels.png");
  detail::write_text_file(dir + "/a.detections.json", dets);
  const CliResult r = run_cli("analyze " + dir + "/a.png --out " + dir + "/out --report " + dir + "/r.html");
  ASSERT_EQ(r.exit_code, 0) << r.out;
  const json res = read_json_file(dir + "/out/a.results.json");
  EXPECT_EQ(res["instances"].size(), static_cast<std::size_t>(s.truth.placed));
  EXPECT_DOUBLE_EQ(res["calibration"]["nm_per_pixel"].get<double>(), 25.0);
  EXPECT_TRUE(fs::exists(dir + "/r.html"));
  const json twin = read_json_file(dir + "/r.json");
  EXPECT_EQ(twin["samples"][0], res["statistics"]);

  // the report subcommand rebuilds the same twin from the results file
  ASSERT_EQ(run_cli("report " + dir + "/out/a.results.json --out " + dir + "/r2.html").exit_code, 0);
  EXPECT_EQ(read_json_file(dir + "/r2.json")["samples"], twin["samples"]);
}

}  // namespace
}  // namespace micrometry
