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

// Analysis-task service: an on-disk task store, processing, filters and
// event-sourced corrections, plus the HTTP/JSON routes that expose them.
//
// Store layout, one directory per task:
//   task.json         metadata (state, version, config, calibration, filter)
//   image.png         uploaded image
//   flow.uafl         uploaded flow field, when given
//   labels_in.png     uploaded label map, when given
//   detections.json   uploaded detections, when given
//   labels.png        base segmentation
//   corrections.jsonl append-only correction log

#pragma once

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "micrometry/corpus.hpp"
#include "micrometry/corrections.hpp"
#include "micrometry/pipeline.hpp"
#include "micrometry/report.hpp"

namespace micrometry {

inline constexpr const char* kTaskSchema = "micrometry.task/1";

enum class TaskState { created, processing, ready, failed };

inline std::string to_string(TaskState s) {
  switch (s) {
    case TaskState::created: return "created";
    case TaskState::processing: return "processing";
    case TaskState::ready: return "ready";
    case TaskState::failed: return "failed";
  }
  return "failed";
}

inline TaskState task_state_from(const std::string& s) {
  if (s == "created") return TaskState::created;
  if (s == "processing") return TaskState::processing;
  if (s == "ready") return TaskState::ready;
  return TaskState::failed;
}

struct TaskInputs {
  std::vector<std::uint8_t> image;
  std::optional<std::vector<std::uint8_t>> flow;
  std::optional<std::vector<std::uint8_t>> labels;
  std::optional<std::string> detections;
  std::optional<std::string> params;
};

struct ServiceOptions {
  std::uint64_t async_pixel_threshold = 4096ull * 4096ull;  // larger inputs run in the background
  int threads = 0;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class TaskService {
 public:
  explicit TaskService(std::string root, ServiceOptions opt = {})
      : root_(std::move(root)), opt_(opt) {
    detail::ensure_dir(root_);
    load_existing();
  }

  ~TaskService() { wait_idle(); }

  TaskService(const TaskService&) = delete;
  TaskService& operator=(const TaskService&) = delete;

  // Persists the task and processes it: inline for desk-scale inputs, in the
  // background above the pixel threshold. Malformed inputs yield a failed
  // task, not an exception.
  std::string create_task(const TaskInputs& in) {
    auto task = std::make_shared<Task>();
    task->id = new_id();
    task->dir = root_ + "/" + task->id;
    task->created = utc_timestamp();
    detail::ensure_dir(task->dir);
    write_file_bytes(task->dir + "/image.png", in.image);
    task->hashes["image"] = fnv1a_hex(in.image);
    if (in.flow) {
      write_file_bytes(task->dir + "/flow.uafl", *in.flow);
      task->hashes["flow"] = fnv1a_hex(*in.flow);
    }
    if (in.labels) {
      write_file_bytes(task->dir + "/labels_in.png", *in.labels);
      task->hashes["labels"] = fnv1a_hex(*in.labels);
    }
    if (in.detections) {
      detail::write_text_file(task->dir + "/detections.json", *in.detections);
      task->hashes["detections"] = fnv1a_hex(std::span<const std::uint8_t>(
          reinterpret_cast<const std::uint8_t*>(in.detections->data()), in.detections->size()));
    }
    task->state = TaskState::created;
    {
      std::lock_guard lock(map_mu_);
      tasks_[task->id] = task;
    }

    // cheap validation first so oversize work can go to the background
    std::optional<AnalysisInput> input;
    try {
      if (in.params) task->config = json::parse(*in.params).get<PipelineConfig>();
      input = decode_inputs(in);
    } catch (const std::exception& e) {
      fail(*task, e.what());
      return task->id;
    }
    save_meta(*task);
    const auto pixels = static_cast<std::uint64_t>(input->image.width()) * input->image.height();
    if (pixels > opt_.async_pixel_threshold) {
      task->state = TaskState::processing;
      save_meta(*task);
      std::lock_guard lock(workers_mu_);
      workers_.emplace_back([this, task, in2 = std::move(*input)]() mutable {
        process(*task, std::move(in2));
      });
    } else {
      process(*task, std::move(*input));
    }
    return task->id;
  }

  std::vector<std::string> task_ids() const {
    std::lock_guard lock(map_mu_);
    std::vector<std::string> ids;
    for (const auto& [id, t] : tasks_) ids.push_back(id);
    return ids;
  }

  json status(const std::string& id) const {
    auto t = find(id);
    std::shared_lock lock(t->mu);
    json j{{"id", t->id},
           {"state", to_string(t->state)},
           {"version", t->version},
           {"created", t->created},
           {"failure", t->failure.empty() ? json(nullptr) : json(t->failure)}};
    if (t->state == TaskState::ready) {
      j["width"] = t->image.width();
      j["height"] = t->image.height();
      j["instance_count"] = t->metrics.size();
      j["corrections"] = t->log.size();
    }
    return j;
  }

  json results(const std::string& id) const {
    auto t = ready_task(id);
    std::shared_lock lock(t->mu);
    return results_locked(*t);
  }

  json set_filter(const std::string& id, const FilterCriteria& fc) {
    auto t = ready_task(id);
    std::unique_lock lock(t->mu);
    fc.validate();
    (void)filter_instances(t->metrics, fc);  // surfaces unit errors before committing
    t->filter = fc;
    ++t->version;
    save_meta(*t);
    return json{{"version", t->version}, {"filter", t->filter}, {"statistics", statistics_locked(*t)}};
  }

  json apply_correction(const std::string& id, CorrectionAction action) {
    auto t = ready_task(id);
    std::unique_lock lock(t->mu);
    if (action.timestamp.empty()) action.timestamp = utc_timestamp();
    try {
      apply_action(t->labels, action);  // throws, leaving the state untouched
    } catch (const Error& e) {
      // an unknown instance id is a bad action, not a missing resource
      if (e.code() == ErrorCode::not_found) throw Error(ErrorCode::invalid_action, e.what());
      throw;
    }
    t->log.push_back(action);
    append_log(*t, action);
    recompute(*t);
    ++t->version;
    save_meta(*t);
    return json{{"version", t->version},
                {"action", action},
                {"instance_count", t->metrics.size()},
                {"statistics", statistics_locked(*t)}};
  }

  RenderedReport report(const std::string& id) const {
    auto t = ready_task(id);
    std::shared_lock lock(t->mu);
    return render_report(report_document_locked(*t));
  }

  ReportDocument report_document(const std::string& id) const {
    auto t = ready_task(id);
    std::shared_lock lock(t->mu);
    return report_document_locked(*t);
  }

  std::vector<std::uint8_t> image_png(const std::string& id) const {
    auto t = find(id);
    return read_file_bytes(t->dir + "/image.png");
  }

  std::vector<std::uint8_t> overlay_png(const std::string& id) const {
    auto t = ready_task(id);
    std::shared_lock lock(t->mu);
    std::vector<std::uint8_t> keep(static_cast<std::size_t>(max_label(t->labels.labels)) + 1, 0);
    for (const auto& m : filter_instances(t->metrics, t->filter)) keep[m.id] = 1;
    return encode_png(render_overlay(t->image, t->labels.labels, &keep));
  }

  // Chart data for the current filtered instances. Keys: metric, weighting,
  // bin_width, bins (histogram); x, y (scatter); metric (box).
  json chart(const std::string& id, const std::string& kind,
             const std::map<std::string, std::string>& q) const {
    auto t = ready_task(id);
    std::shared_lock lock(t->mu);
    const auto survivors = filter_instances(t->metrics, t->filter);
    auto get = [&](const std::string& k, const std::string& def) {
      auto it = q.find(k);
      return it == q.end() ? def : it->second;
    };
    auto number = [&](const std::string& k, double def) {
      const std::string v = get(k, "");
      if (v.empty()) return def;
      try {
        return std::stod(v);
      } catch (const std::exception&) {
        throw Error(ErrorCode::invalid_argument, "bad number for " + k);
      }
    };
    const std::string dm = diameter_metric(survivors);
    if (kind == "histogram") {
      const Weighting w = parse_weighting(json(get("weighting", json(t->config.weighting).get<std::string>())));
      const double bw = number("bin_width", 0);
      const int bins = static_cast<int>(number("bins", bw > 0 ? 0 : 20));
      return build_histogram(survivors, get("metric", dm), w, bw, bins);
    }
    if (kind == "scatter") return build_scatter(survivors, get("x", dm), get("y", "sphericity"));
    if (kind == "box") {
      const std::string m = get("metric", dm);
      return build_box({{t->id, metric_values(survivors, m)}}, m, metric_unit(m));
    }
    throw Error(ErrorCode::invalid_argument, "unknown chart kind: " + kind);
  }

  // Blocks until background processing has finished.
  void wait_idle() {
    std::vector<std::jthread> done;
    {
      std::lock_guard lock(workers_mu_);
      done.swap(workers_);
    }
    done.clear();
  }

  const std::string& root() const { return root_; }

 private:
  struct Task {
    std::string id, dir, created, failure;
    TaskState state = TaskState::created;
    std::uint64_t version = 0;
    PipelineConfig config;
    json hashes = json::object();
    Raster8 image;
    json scalebar = json::object();
    std::optional<ScaleCalibration> calibration;
    LabelMap base;
    std::vector<CorrectionAction> log;
    FilterCriteria filter;
    LabelState labels;                     // base replayed through the log
    std::vector<InstanceMetrics> metrics;  // of `labels`, unfiltered
    mutable std::shared_mutex mu;
  };

  std::shared_ptr<Task> find(const std::string& id) const {
    std::lock_guard lock(map_mu_);
    auto it = tasks_.find(id);
    if (it == tasks_.end()) throw Error(ErrorCode::not_found, "unknown task " + id);
    return it->second;
  }

  std::shared_ptr<Task> ready_task(const std::string& id) const {
    auto t = find(id);
    std::shared_lock lock(t->mu);
    if (t->state != TaskState::ready) {
      throw Error(ErrorCode::not_ready, "task " + id + " is " + to_string(t->state));
    }
    return t;
  }

  std::string new_id() {
    std::lock_guard lock(map_mu_);
    while (true) {
      const auto now = std::chrono::steady_clock::now().time_since_epoch().count();
      const std::uint64_t seed = static_cast<std::uint64_t>(now) ^ (++counter_ * 0x9E3779B97F4A7C15ull);
      char buf[20];
      std::snprintf(buf, sizeof buf, "t%012llx",
                    static_cast<unsigned long long>(derive_seed(seed, 0) & 0xFFFFFFFFFFFFull));
      if (!tasks_.count(buf) && !std::filesystem::exists(root_ + "/" + buf)) return buf;
    }
  }

  AnalysisInput decode_inputs(const TaskInputs& in) const {
    AnalysisInput a;
    try {
      a.image = decode_png_image(in.image);
    } catch (const Error& e) {
      throw Error(e.code(), std::string("image: ") + e.what());
    }
    if (in.flow) a.flow = decode_flow(*in.flow);
    if (in.labels) a.labels = decode_label_png(*in.labels);
    if (in.detections) a.detections = parse_detections(json::parse(*in.detections));
    if (!a.flow && !a.labels) throw Error(ErrorCode::not_found, "no segmentation source");
    if ((a.flow && (a.flow->width != a.image.width() || a.flow->height != a.image.height())) ||
        (a.labels && (a.labels->width() != a.image.width() || a.labels->height() != a.image.height()))) {
      throw Error(ErrorCode::dimension_mismatch, "dimension mismatch");
    }
    return a;
  }

  void process(Task& t, AnalysisInput in) {
    try {
      PipelineConfig cfg = t.config;
      if (cfg.threads == 0) cfg.threads = opt_.threads;
      LabelMap base = segmentation_source(in, cfg);
      const ScalebarRecognition sb =
          recognize_scalebar(in.image, in.detections.bars, in.detections.texts, cfg.scalebar);
      write_label_png(base, t.dir + "/labels.png");
      detail::write_text_file(t.dir + "/corrections.jsonl", "");
      std::unique_lock lock(t.mu);
      t.image = std::move(in.image);
      t.scalebar = scalebar_json(sb);
      t.calibration = sb.calibration;
      t.filter = cfg.filter;
      t.base = std::move(base);
      t.labels = initial_state(t.base);
      recompute(t);
      t.state = TaskState::ready;
      t.version = 1;
      save_meta(t);
    } catch (const std::exception& e) {
      fail(t, e.what());
    }
  }

  void fail(Task& t, const std::string& reason) {
    std::unique_lock lock(t.mu);
    t.state = TaskState::failed;
    t.failure = reason;
    save_meta(t);
  }

  void recompute(Task& t) const {
    t.metrics = measure_all(t.labels.labels, nm_per_pixel(t.calibration),
                            t.config.threads ? t.config.threads : opt_.threads);
  }

  json statistics_locked(const Task& t) const {
    const auto survivors = filter_instances(t.metrics, t.filter);
    return summarize_sample(t.id, survivors, t.calibration, t.config.weighting);
  }

  json results_locked(const Task& t) const {
    json j = results_json(t.id, t.labels.labels, t.metrics, t.scalebar, t.calibration, t.filter,
                          t.config.weighting, t.version);
    j["id"] = t.id;
    return j;
  }

  ReportDocument report_document_locked(const Task& t) const {
    const auto survivors = filter_instances(t.metrics, t.filter);
    ReportOptions opt = t.config.report;
    opt.weighting = t.config.weighting;
    json prov{{"task", t.id},
              {"version", t.version},
              {"inputs", t.hashes},
              {"corrections", t.log.size()},
              {"filter", t.filter},
              {"config", t.config}};
    ReportDocument doc = build_report({{t.id, &survivors, t.calibration}}, opt, std::move(prov));
    doc.title = "Particle analysis report: " + t.id;
    return doc;
  }

  void save_meta(const Task& t) const {
    json j{{"schema", kTaskSchema},
           {"id", t.id},
           {"state", to_string(t.state)},
           {"failure", t.failure},
           {"version", t.version},
           {"created", t.created},
           {"config", t.config},
           {"inputs", t.hashes},
           {"scalebar", t.scalebar},
           {"calibration", t.calibration ? json(*t.calibration) : json(nullptr)},
           {"filter", t.filter}};
    const std::string tmp = t.dir + "/task.json.tmp";
    detail::write_text_file(tmp, j.dump(2) + "\n");
    std::filesystem::rename(tmp, t.dir + "/task.json");
  }

  void append_log(const Task& t, const CorrectionAction& a) const {
    std::FILE* f = std::fopen((t.dir + "/corrections.jsonl").c_str(), "ab");
    if (!f) throw Error(ErrorCode::io, "cannot append to the correction log");
    const std::string line = json(a).dump() + "\n";
    const bool ok = std::fwrite(line.data(), 1, line.size(), f) == line.size();
    std::fclose(f);
    if (!ok) throw Error(ErrorCode::io, "short write to the correction log");
  }

  void load_existing() {
    for (const auto& entry : std::filesystem::directory_iterator(root_)) {
      if (!entry.is_directory() || !std::filesystem::exists(entry.path() / "task.json")) continue;
      auto t = std::make_shared<Task>();
      t->dir = entry.path().string();
      try {
        const json j = read_json_file(t->dir + "/task.json");
        t->id = j.at("id").get<std::string>();
        t->state = task_state_from(j.at("state").get<std::string>());
        t->failure = j.value("failure", std::string());
        t->version = j.at("version").get<std::uint64_t>();
        t->created = j.value("created", std::string());
        t->config = j.at("config").get<PipelineConfig>();
        t->hashes = j.value("inputs", json::object());
        t->scalebar = j.value("scalebar", json::object());
        if (!j.at("calibration").is_null()) t->calibration = j["calibration"].get<ScaleCalibration>();
        t->filter = j.at("filter").get<FilterCriteria>();
        if (t->state == TaskState::ready) {
          t->image = read_png_image(t->dir + "/image.png");
          t->base = read_label_png(t->dir + "/labels.png");
          const auto bytes = read_file_bytes(t->dir + "/corrections.jsonl");
          std::string text(bytes.begin(), bytes.end());
          std::size_t pos = 0;
          while (pos < text.size()) {
            std::size_t end = text.find('\n', pos);
            if (end == std::string::npos) end = text.size();
            if (end > pos) t->log.push_back(json::parse(text.substr(pos, end - pos)).get<CorrectionAction>());
            pos = end + 1;
          }
          t->labels = replay(t->base, t->log);
          recompute(*t);
        } else if (t->state != TaskState::failed) {
          t->state = TaskState::failed;
          t->failure = "interrupted by a service restart";
          save_meta(*t);
        }
      } catch (const std::exception& e) {
        if (t->id.empty()) continue;
        t->state = TaskState::failed;
        t->failure = std::string("could not reload: ") + e.what();
      }
      tasks_[t->id] = t;
    }
  }

  std::string root_;
  ServiceOptions opt_;
  mutable std::mutex map_mu_;
  std::map<std::string, std::shared_ptr<Task>> tasks_;
  std::uint64_t counter_ = 0;
  std::mutex workers_mu_;
  std::vector<std::jthread> workers_;
};

// ---------------------------------------------------------------------------
// HTTP

inline int http_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::not_found: return 404;
    case ErrorCode::not_ready: return 409;
    case ErrorCode::invalid_action: return 422;
    case ErrorCode::io: return 500;
    default: return 400;
  }
}

inline void send_json(httplib::Response& res, const json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& code,
                       const std::string& message) {
  send_json(res, json{{"code", code}, {"message", message}}, status);
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, http_status(e.code()), std::string(to_string(e.code())), e.what());
  } catch (const json::exception& e) {
    send_error(res, 400, "invalid_argument", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal", e.what());
  }
}

inline void mount_routes(httplib::Server& srv, TaskService& svc) {
  srv.Post("/tasks", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!req.is_multipart_form_data() || !req.has_file("image")) {
        throw Error(ErrorCode::invalid_argument, "multipart field 'image' is required");
      }
      auto bytes = [&](const char* k) {
        const std::string s = req.get_file_value(k).content;
        return std::vector<std::uint8_t>(s.begin(), s.end());
      };
      TaskInputs in;
      in.image = bytes("image");
      if (req.has_file("flow")) in.flow = bytes("flow");
      if (req.has_file("labels")) in.labels = bytes("labels");
      if (req.has_file("detections")) in.detections = req.get_file_value("detections").content;
      if (req.has_file("params")) in.params = req.get_file_value("params").content;
      const std::string id = svc.create_task(in);
      json st = svc.status(id);
      send_json(res, st, st["state"] == "processing" ? 202 : 201);
    });
  });
  srv.Get("/tasks", [&svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, json{{"tasks", svc.task_ids()}}); });
  });
  srv.Get(R"(/tasks/([A-Za-z0-9_-]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, svc.status(req.matches[1])); });
  });
  srv.Get(R"(/tasks/([A-Za-z0-9_-]+)/results)",
          [&svc](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { send_json(res, svc.results(req.matches[1])); });
          });
  srv.Put(R"(/tasks/([A-Za-z0-9_-]+)/filter)",
          [&svc](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
              const FilterCriteria fc = json::parse(req.body).get<FilterCriteria>();
              send_json(res, svc.set_filter(req.matches[1], fc));
            });
          });
  srv.Post(R"(/tasks/([A-Za-z0-9_-]+)/corrections)",
           [&svc](const httplib::Request& req, httplib::Response& res) {
             guarded(res, [&] {
               const CorrectionAction a = json::parse(req.body).get<CorrectionAction>();
               send_json(res, svc.apply_correction(req.matches[1], a));
             });
           });
  srv.Get(R"(/tasks/([A-Za-z0-9_-]+)/report)",
          [&svc](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { res.set_content(svc.report(req.matches[1]).html, "text/html; charset=utf-8"); });
          });
  srv.Get(R"(/tasks/([A-Za-z0-9_-]+)/report\.json)",
          [&svc](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { res.set_content(svc.report(req.matches[1]).json_twin, "application/json"); });
          });
  srv.Get(R"(/tasks/([A-Za-z0-9_-]+)/image)",
          [&svc](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
              const auto png = svc.image_png(req.matches[1]);
              res.set_content(std::string(png.begin(), png.end()), "image/png");
            });
          });
  srv.Get(R"(/tasks/([A-Za-z0-9_-]+)/overlay\.png)",
          [&svc](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
              const auto png = svc.overlay_png(req.matches[1]);
              res.set_content(std::string(png.begin(), png.end()), "image/png");
            });
          });
  srv.Get(R"(/tasks/([A-Za-z0-9_-]+)/charts/([a-z]+))",
          [&svc](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
              std::map<std::string, std::string> q;
              for (const auto& [k, v] : req.params) q[k] = v;
              send_json(res, svc.chart(req.matches[1], req.matches[2], q));
            });
          });
}

// An HTTP server on its own thread; port 0 binds an ephemeral port.
class ServiceServer {
 public:
  ServiceServer(TaskService& svc, const std::string& host = "127.0.0.1", int port = 0) {
    server_.set_payload_max_length(std::size_t{1} << 31);
    mount_routes(server_, svc);
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ <= 0) throw Error(ErrorCode::io, "cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::jthread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~ServiceServer() { stop(); }

  int port() const { return port_; }
  void stop() {
    if (server_.is_running()) server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  httplib::Server server_;
  int port_ = -1;
  std::jthread thread_;
};

}  // namespace micrometry
