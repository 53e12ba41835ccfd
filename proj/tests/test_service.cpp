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
#include <unistd.h>

#include "micrometry/service.hpp"
#include "support.hpp"

namespace micrometry {
namespace {

namespace fs = std::filesystem;
using testing::disk_scene;
using testing::stamp_scalebar;

std::string fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("micrometry_svc_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p.string();
}

struct Fixture {
  Scene scene;
  std::string detections;
  TaskInputs inputs;
};

// 512x512, exactly 100 disks, a 25 nm/px scale bar, GT labels as the source.
Fixture hundred_disks() {
  Fixture f;
  f.scene = disk_scene(512, 100, 21);
  f.detections = stamp_scalebar(f.scene.image, 4);
  f.inputs.image = encode_png(f.scene.image);
  f.inputs.labels = encode_label_png(f.scene.truth.label_map);
  f.inputs.detections = f.detections;
  return f;
}

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

TEST(Service, CreateFromLabels) {
  const Fixture f = hundred_disks();
  ASSERT_EQ(f.scene.truth.placed, 100);
  TaskService svc(fresh_dir("labels"));
  const std::string id = svc.create_task(f.inputs);
  const json st = svc.status(id);
  EXPECT_EQ(st["state"], "ready");
  EXPECT_EQ(st["version"], 1);
  EXPECT_EQ(st["instance_count"], 100);
  EXPECT_EQ(st["width"], 512);
  const json r = svc.results(id);
  EXPECT_EQ(r["instances"].size(), 100u);
  ASSERT_FALSE(r["calibration"].is_null());
  EXPECT_DOUBLE_EQ(r["calibration"]["nm_per_pixel"].get<double>(), 25.0);
  EXPECT_EQ(svc.task_ids(), std::vector<std::string>{id});
}

TEST(Service, CreateFromFlowMatchesTruth) {
  const Scene s = disk_scene(256, 30, 8);
  TaskInputs in;
  in.image = encode_png(s.image);
  in.flow = encode_flow(labels_to_flows(s.truth.label_map));
  TaskService svc(fresh_dir("flow"));
  const std::string id = svc.create_task(in);
  ASSERT_EQ(svc.status(id)["state"], "ready") << svc.status(id).dump();
  EXPECT_EQ(svc.status(id)["instance_count"], s.truth.placed);
  const json r = svc.results(id);
  EXPECT_TRUE(r["calibration"].is_null());
}

TEST(Service, FailedInputs) {
  const Scene s = disk_scene(128, 5, 2);
  TaskService svc(fresh_dir("failed"));

  TaskInputs none;
  none.image = encode_png(s.image);
  const std::string a = svc.create_task(none);
  EXPECT_EQ(svc.status(a)["state"], "failed");
  EXPECT_NE(svc.status(a)["failure"].get<std::string>().find("no segmentation source"), std::string::npos);

  TaskInputs mismatch = none;
  mismatch.labels = encode_label_png(LabelMap(64, 128, 0u));
  const std::string b = svc.create_task(mismatch);
  EXPECT_EQ(svc.status(b)["state"], "failed");
  EXPECT_NE(svc.status(b)["failure"].get<std::string>().find("dimension mismatch"), std::string::npos);

  TaskInputs garbage;
  garbage.image = bytes_of("not a png");
  garbage.labels = encode_label_png(s.truth.label_map);
  EXPECT_EQ(svc.status(svc.create_task(garbage))["state"], "failed");

  TaskInputs bad_params = none;
  bad_params.labels = encode_label_png(s.truth.label_map);
  bad_params.params = R"({"unknown_key": 1})";
  EXPECT_EQ(svc.status(svc.create_task(bad_params))["state"], "failed");

  try {
    (void)svc.results(a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::not_ready);
  }
  try {
    (void)svc.status("t000000000000");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::not_found);
  }
}

TEST(Service, FilterMatchesOfflineMetrology) {
  const Fixture f = hundred_disks();
  TaskService svc(fresh_dir("filter"));
  const std::string id = svc.create_task(f.inputs);
  const json original = svc.results(id)["statistics"];

  FilterCriteria fc;
  fc.diameter_min = 400;
  fc.diameter_max = 700;
  fc.unit = LengthUnit::nm;
  fc.exclude_edge = true;
  const json out = svc.set_filter(id, fc);
  EXPECT_EQ(out["version"], 2);

  const auto offline = filter_instances(measure_all(f.scene.truth.label_map, 25.0), fc);
  const json expected = summarize_sample(id, offline, calibrate(200, 5, Unit::um), Weighting::count);
  EXPECT_EQ(out["statistics"], expected);
  EXPECT_GT(offline.size(), 0u);
  EXPECT_LT(offline.size(), 100u);
  EXPECT_EQ(svc.results(id)["statistics"], expected);

  const json cleared = svc.set_filter(id, FilterCriteria{});
  EXPECT_EQ(cleared["version"], 3);
  EXPECT_EQ(cleared["statistics"], original);
}

TEST(Service, ExcludeAllFilterEmptiesStatistics) {
  const Fixture f = hundred_disks();
  TaskService svc(fresh_dir("exclude"));
  const std::string id = svc.create_task(f.inputs);
  FilterCriteria fc;
  fc.diameter_min = 1e9;
  const json out = svc.set_filter(id, fc);
  EXPECT_EQ(out["statistics"]["instance_count"], 0);
  for (const json& m : out["statistics"]["metrics"]) EXPECT_TRUE(m["stats"].is_null()) << m.dump();
  // reports still render with nothing to plot
  EXPECT_FALSE(svc.report(id).html.empty());
}

TEST(Service, FilterValidation) {
  const Fixture f = hundred_disks();
  TaskService svc(fresh_dir("filterval"));
  const std::string id = svc.create_task(f.inputs);
  FilterCriteria bad;
  bad.diameter_min = 5;
  bad.diameter_max = 1;
  EXPECT_THROW(svc.set_filter(id, bad), Error);
  EXPECT_EQ(svc.status(id)["version"], 1);
}

TEST(Service, DeleteBumpsVersion) {
  const Fixture f = hundred_disks();
  TaskService svc(fresh_dir("delete"));
  const std::string id = svc.create_task(f.inputs);
  const json out = svc.apply_correction(id, {CorrectionKind::erase, {7}, {}, "tester", ""});
  EXPECT_EQ(out["instance_count"], 99);
  EXPECT_EQ(out["version"], 2);
  EXPECT_FALSE(out["action"]["timestamp"].get<std::string>().empty());
  const json r = svc.results(id);
  EXPECT_EQ(r["version"], 2);
  EXPECT_EQ(r["instances"].size(), 99u);
  for (const json& inst : r["instances"]) EXPECT_NE(inst["id"], 7);
  EXPECT_EQ(svc.status(id)["corrections"], 1);
}

TEST(Service, InvalidCorrectionLeavesStateAlone) {
  const Fixture f = hundred_disks();
  TaskService svc(fresh_dir("invalid"));
  const std::string id = svc.create_task(f.inputs);
  const json before = svc.results(id);
  try {
    svc.apply_correction(id, {CorrectionKind::erase, {4000}, {}, "", ""});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_action);
  }
  EXPECT_THROW(svc.apply_correction(id, {CorrectionKind::add, {}, {{1, 1}, {9, 9}, {1, 9}, {9, 1}}, "", ""}),
               Error);
  EXPECT_EQ(svc.results(id), before);
}

TEST(Service, ReportTwinIsStableAndMatchesStatistics) {
  const Fixture f = hundred_disks();
  TaskService svc(fresh_dir("report"));
  const std::string id = svc.create_task(f.inputs);
  const RenderedReport a = svc.report(id), b = svc.report(id);
  EXPECT_EQ(a.json_twin, b.json_twin);
  EXPECT_EQ(a.html, b.html);
  const json twin = json::parse(a.json_twin);
  EXPECT_EQ(twin["samples"][0], svc.results(id)["statistics"]);
  EXPECT_EQ(twin["provenance"]["task"], id);
  EXPECT_EQ(twin["provenance"]["version"], 1);
  EXPECT_EQ(report_from_json(twin), svc.report_document(id));
}

// Splits `id` with a horizontal cut through its box middle.
CorrectionAction split_across(const json& results, std::uint32_t id) {
  for (const json& inst : results["instances"]) {
    if (inst["id"] != id) continue;
    const Rect b = inst["bbox"].get<Rect>();
    const int y = b.y + b.h / 2;
    return {CorrectionKind::split, {id}, {{y, b.x - 2}, {y, b.right() + 1}}, "", "2026-01-01T00:00:00Z"};
  }
  throw Error(ErrorCode::not_found, "no such instance");
}

TEST(Service, RestartReplaysCorrections) {
  const Fixture f = hundred_disks();
  const std::string root = fresh_dir("restart");
  json results, twin;
  std::string overlay_hash, id;
  {
    TaskService svc(root);
    id = svc.create_task(f.inputs);
    svc.apply_correction(id, {CorrectionKind::erase, {3}, {}, "", ""});
    const json r = svc.results(id);
    svc.apply_correction(id, split_across(r, 10));
    EXPECT_EQ(svc.status(id)["instance_count"], 100);
    svc.apply_correction(id, {CorrectionKind::merge, {10, 101}, {}, "", ""});
    EXPECT_EQ(svc.status(id)["instance_count"], 99);
    FilterCriteria fc;
    fc.exclude_edge = true;
    svc.set_filter(id, fc);
    results = svc.results(id);
    twin = json::parse(svc.report(id).json_twin);
    overlay_hash = fnv1a_hex(svc.overlay_png(id));
  }
  TaskService again(root);
  EXPECT_EQ(again.results(id).dump(), results.dump());
  EXPECT_EQ(json::parse(again.report(id).json_twin), twin);
  EXPECT_EQ(fnv1a_hex(again.overlay_png(id)), overlay_hash);
  EXPECT_EQ(again.status(id)["version"], 5);
  // new ids continue where the live session left off
  const json out = again.apply_correction(id, split_across(results, 12));
  EXPECT_EQ(out["instance_count"], 100);
  bool has_102 = false;
  const json after = again.results(id);
  for (const json& inst : after["instances"]) has_102 = has_102 || inst["id"] == 102;
  EXPECT_TRUE(has_102);
}

TEST(Service, InterruptedTaskFailsOnRestart) {
  const Fixture f = hundred_disks();
  const std::string root = fresh_dir("interrupted");
  std::string id;
  {
    TaskService svc(root);
    id = svc.create_task(f.inputs);
  }
  // rewrite the stored state as if the process died mid-run
  const std::string meta = root + "/" + id + "/task.json";
  json j = read_json_file(meta);
  j["state"] = "processing";
  detail::write_text_file(meta, j.dump());
  TaskService again(root);
  EXPECT_EQ(again.status(id)["state"], "failed");
}

TEST(Service, BackgroundProcessing) {
  const Fixture f = hundred_disks();
  ServiceOptions opt;
  opt.async_pixel_threshold = 1000;
  TaskService svc(fresh_dir("async"), opt);
  const std::string id = svc.create_task(f.inputs);
  svc.wait_idle();
  EXPECT_EQ(svc.status(id)["state"], "ready");
  EXPECT_EQ(svc.status(id)["instance_count"], 100);
}

TEST(Service, Charts) {
  const Fixture f = hundred_disks();
  TaskService svc(fresh_dir("charts"));
  const std::string id = svc.create_task(f.inputs);
  const json h = svc.chart(id, "histogram", {{"bins", "10"}});
  EXPECT_EQ(h["kind"], "histogram");
  EXPECT_EQ(h["x_unit"], "nm");
  const json s = svc.chart(id, "scatter", {{"x", "area_px"}, {"y", "aspect_ratio"}});
  EXPECT_EQ(s["kind"], "scatter");
  const json b = svc.chart(id, "box", {});
  EXPECT_EQ(b["groups"][0]["count"], 100);
  EXPECT_THROW(svc.chart(id, "pie", {}), Error);
  EXPECT_THROW(svc.chart(id, "histogram", {{"bins", "many"}}), Error);
}

TEST(ServiceHttp, Routes) {
  const Fixture f = hundred_disks();
  TaskService svc(fresh_dir("http"));
  ServiceServer server(svc);
  httplib::Client cli("127.0.0.1", server.port());
  cli.set_read_timeout(60, 0);

  const std::string png(f.inputs.image.begin(), f.inputs.image.end());
  const std::string labels(f.inputs.labels->begin(), f.inputs.labels->end());
  httplib::MultipartFormDataItems items = {
      {"image", png, "image.png", "image/png"},
      {"labels", labels, "labels.png", "image/png"},
      {"detections", f.detections, "detections.json", "application/json"},
  };
  auto res = cli.Post("/tasks", items);
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 201) << res->body;
  const std::string id = json::parse(res->body)["id"];

  res = cli.Get("/tasks/" + id);
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["state"], "ready");

  res = cli.Get("/tasks");
  EXPECT_EQ(json::parse(res->body)["tasks"], json::array({id}));

  res = cli.Get("/tasks/t0000000000ff");
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(json::parse(res->body)["code"], "not_found");

  res = cli.Put("/tasks/" + id + "/filter", R"({"diameter_min": 10, "unit": "px"})", "application/json");
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["version"], 2);
  res = cli.Put("/tasks/" + id + "/filter", R"({"diameter_min": "ten"})", "application/json");
  EXPECT_EQ(res->status, 400);
  res = cli.Put("/tasks/" + id + "/filter", "{not json", "application/json");
  EXPECT_EQ(res->status, 400);

  res = cli.Post("/tasks/" + id + "/corrections", R"({"kind": "delete", "id": 7})", "application/json");
  EXPECT_EQ(res->status, 200) << res->body;
  EXPECT_EQ(json::parse(res->body)["instance_count"], 99);
  res = cli.Post("/tasks/" + id + "/corrections", R"({"kind": "delete", "id": 7})", "application/json");
  EXPECT_EQ(res->status, 422);
  res = cli.Post("/tasks/" + id + "/corrections", R"({"kind": "teleport"})", "application/json");
  EXPECT_EQ(res->status, 422);

  res = cli.Get("/tasks/" + id + "/results");
  EXPECT_EQ(json::parse(res->body)["version"], 3);

  res = cli.Get("/tasks/" + id + "/report");
  EXPECT_EQ(res->status, 200);
  EXPECT_NE(res->body.find("<svg"), std::string::npos);
  res = cli.Get("/tasks/" + id + "/report.json");
  const json twin = json::parse(res->body);
  EXPECT_EQ(twin["samples"][0], svc.results(id)["statistics"]);

  res = cli.Get("/tasks/" + id + "/image");
  EXPECT_EQ(res->body, png);
  res = cli.Get("/tasks/" + id + "/overlay.png");
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(decode_png_image(bytes_of(res->body)).width(), 512);

  res = cli.Get("/tasks/" + id + "/charts/histogram?metric=diameter_px&bins=5");
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["series"][1]["values"].size(), 5u);
  res = cli.Get("/tasks/" + id + "/charts/pie");
  EXPECT_EQ(res->status, 400);

  // a failed task answers 409 for its results
  httplib::MultipartFormDataItems bare = {{"image", png, "image.png", "image/png"}};
  res = cli.Post("/tasks", bare);
  ASSERT_EQ(res->status, 201);
  const std::string failed = json::parse(res->body)["id"];
  EXPECT_EQ(json::parse(res->body)["state"], "failed");
  res = cli.Get("/tasks/" + failed + "/results");
  EXPECT_EQ(res->status, 409);

  res = cli.Post("/tasks", "{}", "application/json");
  EXPECT_EQ(res->status, 400);
  server.stop();
}

}  // namespace
}  // namespace micrometry
