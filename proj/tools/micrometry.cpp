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

// micrometry: batch entry point. JSON goes to stdout, logs to stderr.
// Exit codes: 0 success, 1 partial or total failure, 2 usage error.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "micrometry/corpus.hpp"
#include "micrometry/evalkit.hpp"
#include "micrometry/pipeline.hpp"
#include "micrometry/report.hpp"
#include "micrometry/service.hpp"

namespace fs = std::filesystem;
using namespace micrometry;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void log(const std::string& msg) { std::cerr << "micrometry: " << msg << "\n"; }

void emit(const json& j) { std::cout << j.dump(2) << std::endl; }

void write_text(const std::string& path, const std::string& text) {
  if (fs::path(path).has_parent_path()) detail::ensure_dir(fs::path(path).parent_path().string());
  detail::write_text_file(path, text);
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

// Sibling inputs found next to an image: <stem>.uafl, <stem>_labels.png,
// <stem>.detections.json.
std::optional<std::string> sibling(const std::string& image, const std::string& suffix) {
  const fs::path p = fs::path(image).parent_path() / (stem_of(image) + suffix);
  if (fs::exists(p)) return p.string();
  return std::nullopt;
}

Detections load_detections(const std::string& path) {
  return parse_detections(read_json_file(path));
}

std::vector<std::string> png_files(const std::string& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string report_twin_path(const std::string& html) {
  fs::path p(html);
  p.replace_extension(".json");
  return p.string();
}

// Writes the combined report and returns its twin's sample summaries.
json write_report(const std::vector<ReportSample>& samples, const PipelineConfig& cfg,
                  json provenance, const std::string& out) {
  ReportOptions opt = cfg.report;
  opt.weighting = cfg.weighting;
  const ReportDocument doc = build_report(samples, opt, std::move(provenance));
  const RenderedReport r = render_report(doc);
  write_text(out, r.html);
  write_text(report_twin_path(out), r.json_twin);
  return json{{"html", out}, {"json", report_twin_path(out)}};
}

struct Globals {
  std::string config_path;
  bool dump_config = false;
  int threads = -1;
  std::string weighting;
  PipelineConfig cfg;
};

void resolve_config(Globals& g) {
  if (!g.config_path.empty()) {
    try {
      g.cfg = read_json_file(g.config_path).get<PipelineConfig>();
    } catch (const std::exception& e) {
      throw UsageError(std::string("bad config: ") + e.what() + "\nexpected a document like:\n" +
                       json(PipelineConfig{}).dump(2));
    }
  }
  if (g.threads >= 0) g.cfg.threads = g.threads;
  if (!g.weighting.empty()) g.cfg.weighting = parse_weighting(json(g.weighting));
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
  std::vector<std::string> images, flows, labels, detections;
  std::string out_dir, report;
};

int run_analyze(const Globals& g, const AnalyzeArgs& a) {
  auto pick = [&](const std::vector<std::string>& given, std::size_t i, const char* suffix) {
    if (!given.empty()) {
      if (given.size() != a.images.size()) {
        throw UsageError(std::string("need one ") + suffix + " input per image");
      }
      return std::optional<std::string>(given[i]);
    }
    return sibling(a.images[i], suffix);
  };
  const std::size_t n = a.images.size();
  std::vector<std::optional<std::string>> flow(n), lab(n), det(n);
  for (std::size_t i = 0; i < n; ++i) {
    flow[i] = pick(a.flows, i, ".uafl");
    lab[i] = pick(a.labels, i, "_labels.png");
    det[i] = pick(a.detections, i, ".detections.json");
  }
  if (!a.out_dir.empty()) detail::ensure_dir(a.out_dir);

  std::vector<AnalysisResult> results(n);
  std::vector<std::string> errors(n);
  const int outer = n > 1 ? resolve_threads(g.cfg.threads) : 1;
  PipelineConfig inner = g.cfg;
  if (n > 1) inner.threads = 1;
  parallel_for(n, outer, [&](std::size_t i) {
    try {
      AnalysisInput in;
      in.name = stem_of(a.images[i]);
      in.image = read_png_image(a.images[i]);
      if (flow[i]) in.flow = read_flow_file(*flow[i]);
      if (lab[i]) in.labels = read_label_png(*lab[i]);
      if (det[i]) in.detections = load_detections(*det[i]);
      results[i] = analyze_image(in, inner);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  json files = json::array();
  std::vector<ReportSample> samples;
  bool any_failed = false;
  for (std::size_t i = 0; i < n; ++i) {
    json f{{"input", a.images[i]}};
    if (!errors[i].empty()) {
      any_failed = true;
      log(a.images[i] + ": " + errors[i]);
      f["ok"] = false;
      f["error"] = errors[i];
      files.push_back(f);
      continue;
    }
    json doc = results_json(results[i], g.cfg);
    f["ok"] = true;
    f["instance_count"] = results[i].metrics.size();
    f["statistics"] = doc["statistics"];
    if (!a.out_dir.empty()) {
      const std::string path = a.out_dir + "/" + results[i].name + ".results.json";
      write_text(path, doc.dump(2) + "\n");
      f["results"] = path;
    } else {
      f["results"] = std::move(doc);
    }
    files.push_back(std::move(f));
    samples.push_back({results[i].name, &results[i].filtered, results[i].calibration});
  }
  json out{{"files", files}};
  if (!a.report.empty() && g.cfg.write_report && !samples.empty()) {
    json prov{{"software", kSoftwareVersion}, {"config", g.cfg}, {"inputs", a.images}};
    out["report"] = write_report(samples, g.cfg, std::move(prov), a.report);
  }
  emit(out);
  return any_failed ? kFailed : kOk;
}

int run_segment(const Globals& g, const std::string& flow_path, const std::string& out) {
  const FlowField f = read_flow_file(flow_path);
  const LabelMap lm = segment(f, g.cfg.dynamics, g.cfg.threads);
  write_label_png(lm, out);
  emit(json{{"labels", out}, {"width", lm.width()}, {"height", lm.height()},
            {"instance_count", max_label(lm)}});
  return kOk;
}

int run_flow_gen(const Globals& g, const std::string& labels, const std::string& out) {
  const LabelMap lm = read_label_png(labels);
  const FlowField f = labels_to_flows(canonicalize_labels(lm), g.cfg.flowgen, g.cfg.threads);
  write_flow_file(f, out);
  emit(json{{"flow", out}, {"width", f.width}, {"height", f.height}});
  return kOk;
}

int run_scalebar(const Globals& g, const std::string& image, std::string dets) {
  const Raster8 img = read_png_image(image);
  if (dets.empty()) dets = sibling(image, ".detections.json").value_or("");
  Detections d;
  if (!dets.empty()) d = load_detections(dets);
  const ScalebarRecognition r = recognize_scalebar(img, d.bars, d.texts, g.cfg.scalebar);
  emit(scalebar_json(r));
  return r.failure.empty() ? kOk : kFailed;
}

int run_eval_seg(const Globals& g, const std::string& pred, const std::string& gt, double threshold) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<std::string> missing;
  if (fs::is_directory(pred)) {
    for (const auto& name : png_files(gt)) {
      if (fs::exists(fs::path(pred) / name)) {
        pairs.push_back({(fs::path(pred) / name).string(), (fs::path(gt) / name).string()});
      } else {
        missing.push_back(name);
      }
    }
  } else {
    pairs.push_back({pred, gt});
  }
  if (pairs.empty()) throw Error(ErrorCode::empty_input, "no prediction/ground-truth pairs");
  std::vector<ImageScore> scores(pairs.size());
  parallel_for(pairs.size(), g.cfg.threads, [&](std::size_t i) {
    scores[i] = score_image(read_label_png(pairs[i].first), read_label_png(pairs[i].second),
                            threshold, fs::path(pairs[i].second).filename().string());
  });
  auto [sparse, dense] = split_sparse_dense(scores, [](const ImageScore& s) { return s.instance_count; });
  for (const auto& m : missing) log("no prediction for " + m);
  emit(json{{"all", aggregate(scores, Subset::all, threshold)},
            {"sparse", aggregate(sparse, Subset::sparse, threshold)},
            {"dense", aggregate(dense, Subset::dense, threshold)},
            {"missing", missing}});
  return missing.empty() ? kOk : kFailed;
}

int run_eval_scalebar(const Globals& g, const std::string& corpus) {
  const json manifest = read_json_file(corpus + "/manifest.json");
  if (manifest.value("kind", "") != "scalebar") {
    throw Error(ErrorCode::invalid_argument, "not a scale-bar corpus");
  }
  const json& items = manifest.at("items");
  std::vector<ScalebarResult> res(items.size());
  std::vector<json> rows(items.size());
  parallel_for(items.size(), g.cfg.threads, [&](std::size_t i) {
    const json& it = items[i];
    const ScaleBarTruth truth = it.at("truth").get<ScaleBarTruth>();
    const Raster8 img = read_png_image(corpus + "/" + it.at("image").get<std::string>());
    const Detections d = load_detections(corpus + "/" + it.at("detections").get<std::string>());
    const ScalebarRecognition r = recognize_scalebar(img, d.bars, d.texts, g.cfg.scalebar);
    ScalebarResult& e = res[i];
    e.truth_px = truth.pixel_length;
    e.recognized_px = r.endpoints ? r.endpoints->pixel_length : 0;
    e.unit_ok = r.calibration && r.calibration->unit == truth.unit;
    e.value_ok = r.calibration && r.calibration->value == truth.value;
    rows[i] = json{{"image", it.at("image")},
                   {"truth_px", e.truth_px},
                   {"recognized_px", e.recognized_px},
                   {"unit_ok", e.unit_ok},
                   {"value_ok", e.value_ok},
                   {"failure", r.failure}};
  });
  emit(json{{"summary", scalebar_report(res)}, {"images", rows}});
  return kOk;
}

int run_synth_scene(const Globals& g, int n, std::uint64_t seed, const std::string& out,
                    const std::string& spec_path) {
  SceneSpec tmpl;
  if (!spec_path.empty()) tmpl = read_json_file(spec_path).get<SceneSpec>();
  const json m = write_scene_corpus(tmpl, n, seed, out, g.cfg.threads);
  emit(json{{"corpus", out}, {"kind", "scene"}, {"n", n}, {"base_seed", seed}});
  return kOk;
}

int run_synth_scalebar(const Globals& g, int n, std::uint64_t seed, const std::string& out,
                       const std::string& tmpl_path) {
  ScaleBarTemplate tmpl;
  if (!tmpl_path.empty()) tmpl = read_json_file(tmpl_path).get<ScaleBarTemplate>();
  write_scalebar_corpus(tmpl, n, seed, out, g.cfg.threads);
  emit(json{{"corpus", out}, {"kind", "scalebar"}, {"n", n}, {"base_seed", seed}});
  return kOk;
}

// Reports from saved results documents or from a service task.
int run_report(const Globals& g, const std::vector<std::string>& results_paths,
               const std::string& task, const std::string& store, const std::string& out) {
  if (!task.empty()) {
    TaskService svc(store);
    const RenderedReport r = svc.report(task);
    write_text(out, r.html);
    write_text(report_twin_path(out), r.json_twin);
    emit(json{{"html", out}, {"json", report_twin_path(out)}});
    return kOk;
  }
  if (results_paths.empty()) throw UsageError("report needs --task or results files");
  std::vector<std::vector<InstanceMetrics>> metrics(results_paths.size());
  std::vector<ReportSample> samples;
  json inputs = json::array();
  for (std::size_t i = 0; i < results_paths.size(); ++i) {
    const json doc = read_json_file(results_paths[i]);
    const FilterCriteria fc = doc.at("filter").get<FilterCriteria>();
    for (const auto& inst : doc.at("instances")) {
      InstanceMetrics m = inst.at("metrics").get<InstanceMetrics>();
      if (passes(m, fc)) metrics[i].push_back(m);
    }
    std::optional<ScaleCalibration> calib;
    if (!doc.at("calibration").is_null()) calib = doc["calibration"].get<ScaleCalibration>();
    samples.push_back({doc.at("name").get<std::string>(), &metrics[i], calib});
    inputs.push_back(results_paths[i]);
  }
  json prov{{"software", kSoftwareVersion}, {"config", g.cfg}, {"inputs", inputs}};
  emit(write_report(samples, g.cfg, std::move(prov), out));
  return kOk;
}

int run_serve(const Globals& g, const std::string& host, int port, const std::string& store) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);  // before any thread starts

  ServiceOptions opt;
  opt.threads = g.cfg.threads;
  TaskService svc(store, opt);
  ServiceServer server(svc, host, port);
  std::cout << json{{"host", host}, {"port", server.port()}, {"store", store}}.dump() << std::endl;
  log("serving on " + host + ":" + std::to_string(server.port()));
  int sig = 0;
  sigwait(&set, &sig);
  log("stopping");
  server.stop();
  svc.wait_idle();
  return kOk;
}

int run_bench(const Globals& g, int size, int count, std::uint64_t seed, int repeats) {
  SceneSpec spec;
  spec.width = spec.height = size;
  spec.particle_count = count;
  spec.seed = seed;
  const Scene scene = gen_scene(spec);
  const FlowField f = labels_to_flows(scene.truth.label_map, g.cfg.flowgen, g.cfg.threads);
  std::vector<double> secs;
  LabelMap lm;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    lm = segment(f, g.cfg.dynamics, g.cfg.threads);
    secs.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  emit(json{{"size", size},
            {"particles", scene.truth.placed},
            {"threads", resolve_threads(g.cfg.threads)},
            {"seconds", secs},
            {"ap50", average_precision(lm, scene.truth.label_map, 0.5)}});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"micrometry: particle segmentation, scale-bar calibration and statistics"};
  app.require_subcommand(0, 1);
  app.fallthrough();  // global options may follow the subcommand
  Globals g;
  app.add_option("--config", g.config_path, "pipeline config JSON")->check(CLI::ExistingFile);
  app.add_flag("--dump-config", g.dump_config, "print the effective config and exit");
  app.add_option("--threads", g.threads, "worker threads (0: auto)")->check(CLI::NonNegativeNumber);
  app.add_option("--weighting", g.weighting, "statistics weighting")
      ->check(CLI::IsMember({"count", "area", "volume"}));

  AnalyzeArgs aa;
  auto* analyze = app.add_subcommand("analyze", "segment, calibrate and measure images");
  analyze->add_option("images", aa.images, "input images")->required()->check(CLI::ExistingFile);
  analyze->add_option("--flow", aa.flows, "flow fields, one per image");
  analyze->add_option("--labels", aa.labels, "label maps, one per image");
  analyze->add_option("--detections", aa.detections, "detections JSON, one per image");
  analyze->add_option("--out", aa.out_dir, "directory for per-image results");
  analyze->add_option("--report", aa.report, "combined HTML report path");

  std::string flow_in, labels_in, out, image_in, dets_in;
  auto* seg = app.add_subcommand("segment", "flow field to instance labels");
  seg->add_option("--flow", flow_in)->required()->check(CLI::ExistingFile);
  seg->add_option("--out", out)->required();

  auto* flow = app.add_subcommand("flow", "flow field tools");
  flow->require_subcommand(1);
  auto* flow_gen = flow->add_subcommand("gen", "label map to flow field");
  flow_gen->add_option("--labels", labels_in)->required()->check(CLI::ExistingFile);
  flow_gen->add_option("--out", out)->required();

  auto* sb = app.add_subcommand("scalebar", "recognize the scale bar of one image");
  sb->add_option("image", image_in)->required()->check(CLI::ExistingFile);
  sb->add_option("--detections", dets_in)->check(CLI::ExistingFile);

  std::string pred, gt, corpus;
  double threshold = 0.5;
  auto* eval = app.add_subcommand("eval", "evaluation");
  eval->require_subcommand(1);
  auto* eval_seg = eval->add_subcommand("seg", "AP and PQ of predicted label maps");
  eval_seg->add_option("--pred", pred)->required()->check(CLI::ExistingPath);
  eval_seg->add_option("--gt", gt)->required()->check(CLI::ExistingPath);
  eval_seg->add_option("--threshold", threshold)->check(CLI::Range(0.0, 1.0));
  auto* eval_sb = eval->add_subcommand("scalebar", "scale-bar accuracy over a corpus");
  eval_sb->add_option("--corpus", corpus)->required()->check(CLI::ExistingDirectory);

  int n = 1;
  std::uint64_t seed = 0;
  std::string spec_path;
  auto* synth = app.add_subcommand("synth", "synthetic corpora");
  synth->require_subcommand(1);
  auto* synth_scene = synth->add_subcommand("scene", "particle scenes with ground truth");
  auto* synth_sb = synth->add_subcommand("scalebar", "scale-bar images with ground truth");
  for (auto* s : {synth_scene, synth_sb}) {
    s->add_option("--n", n)->check(CLI::PositiveNumber);
    s->add_option("--seed", seed);
    s->add_option("--out", out)->required();
    s->add_option("--spec", spec_path, "template JSON")->check(CLI::ExistingFile);
  }

  std::vector<std::string> results_paths;
  std::string task, store = "micrometry-store";
  auto* rep = app.add_subcommand("report", "HTML report with a JSON twin");
  rep->add_option("results", results_paths, "results documents")->check(CLI::ExistingFile);
  rep->add_option("--task", task, "service task id");
  rep->add_option("--store", store, "service task store");
  rep->add_option("--out", out)->required();

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "HTTP service");
  serve->add_option("--host", host);
  serve->add_option("--port", port)->check(CLI::Range(0, 65535));
  serve->add_option("--store", store);

  int size = 1024, count = 200, repeats = 3;
  auto* bench = app.add_subcommand("bench", "benchmarks");
  bench->require_subcommand(1);
  auto* bench_dyn = bench->add_subcommand("dynamics", "time segmentation of a synthetic scene");
  bench_dyn->add_option("--size", size)->check(CLI::Range(16, 16384));
  bench_dyn->add_option("--count", count)->check(CLI::PositiveNumber);
  bench_dyn->add_option("--seed", seed);
  bench_dyn->add_option("--repeats", repeats)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    resolve_config(g);
    if (g.dump_config) {
      emit(json(g.cfg));
      return kOk;
    }
    if (*analyze) return run_analyze(g, aa);
    if (*seg) return run_segment(g, flow_in, out);
    if (*flow_gen) return run_flow_gen(g, labels_in, out);
    if (*sb) return run_scalebar(g, image_in, dets_in);
    if (*eval_seg) return run_eval_seg(g, pred, gt, threshold);
    if (*eval_sb) return run_eval_scalebar(g, corpus);
    if (*synth_scene) return run_synth_scene(g, n, seed, out, spec_path);
    if (*synth_sb) return run_synth_scalebar(g, n, seed, out, spec_path);
    if (*rep) return run_report(g, results_paths, task, store, out);
    if (*serve) return run_serve(g, host, port, store);
    if (*bench_dyn) return run_bench(g, size, count, seed, repeats);
    std::cerr << app.help();
    return kUsage;
  } catch (const UsageError& e) {
    log(e.what());
    return kUsage;
  } catch (const std::exception& e) {
    log(e.what());
    return kFailed;
  }
}
