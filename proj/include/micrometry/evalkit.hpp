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

// Segmentation quality (bioimage-convention AP, PQ) and scale-bar accuracy.
// "AP" here is TP / (TP + FP + FN) at one IoU threshold, averaged over
// images; it is not the COCO precision-recall area.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "micrometry/error.hpp"
#include "micrometry/imagecore.hpp"
#include "micrometry/metrology.hpp"
#include "micrometry/parallel.hpp"

namespace micrometry {

struct IouPair {
  std::uint32_t pred = 0;
  std::uint32_t gt = 0;
  std::uint64_t intersection = 0;
  std::uint64_t uni = 0;
  double iou = 0;
  friend bool operator==(const IouPair&, const IouPair&) = default;
};

struct IouTable {
  std::vector<IouPair> pairs;   // sorted by (pred, gt)
  std::vector<std::uint32_t> pred_ids;  // every nonzero pred id present
  std::vector<std::uint32_t> gt_ids;
};

namespace detail {
inline std::vector<std::uint32_t> present_ids(const std::vector<std::uint64_t>& areas) {
  std::vector<std::uint32_t> ids;
  for (std::size_t i = 1; i < areas.size(); ++i) {
    if (areas[i] > 0) ids.push_back(static_cast<std::uint32_t>(i));
  }
  return ids;
}
}  // namespace detail

// Contingency counts from one joint pass; one entry per overlapping pair.
inline IouTable iou_pairs(const LabelMap& pred, const LabelMap& gt) {
  if (pred.width() != gt.width() || pred.height() != gt.height()) {
    throw Error(ErrorCode::dimension_mismatch, "prediction and ground truth differ in size");
  }
  const std::vector<std::uint64_t> pa = label_areas(pred);
  const std::vector<std::uint64_t> ga = label_areas(gt);
  std::unordered_map<std::uint64_t, std::uint64_t> joint;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::uint32_t p = pred[i], g = gt[i];
    if (p != 0 && g != 0) ++joint[(static_cast<std::uint64_t>(p) << 32) | g];
  }
  IouTable t;
  t.pairs.reserve(joint.size());
  for (const auto& [key, inter] : joint) {
    IouPair e;
    e.pred = static_cast<std::uint32_t>(key >> 32);
    e.gt = static_cast<std::uint32_t>(key & 0xffffffffu);
    e.intersection = inter;
    e.uni = pa[e.pred] + ga[e.gt] - inter;
    e.iou = static_cast<double>(inter) / static_cast<double>(e.uni);
    t.pairs.push_back(e);
  }
  std::sort(t.pairs.begin(), t.pairs.end(), [](const IouPair& a, const IouPair& b) {
    return a.pred != b.pred ? a.pred < b.pred : a.gt < b.gt;
  });
  t.pred_ids = detail::present_ids(pa);
  t.gt_ids = detail::present_ids(ga);
  return t;
}

struct MatchResult {
  std::vector<IouPair> pairs;
  std::vector<std::uint32_t> unmatched_pred;  // FP
  std::vector<std::uint32_t> unmatched_gt;    // FN
  double threshold = 0.5;

  std::size_t tp() const { return pairs.size(); }
  std::size_t fp() const { return unmatched_pred.size(); }
  std::size_t fn() const { return unmatched_gt.size(); }
};

// Greedy one-to-one matching over pairs with IoU > T, highest IoU first,
// ties by (pred, gt). For T >= 0.5 any valid matching is this one.
inline MatchResult match_at_threshold(const IouTable& table, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "IoU threshold must lie in (0, 1)");
  }
  std::vector<IouPair> cand;
  for (const auto& e : table.pairs) {
    if (e.iou > threshold) cand.push_back(e);
  }
  std::sort(cand.begin(), cand.end(), [](const IouPair& a, const IouPair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    return a.pred != b.pred ? a.pred < b.pred : a.gt < b.gt;
  });
  MatchResult r;
  r.threshold = threshold;
  std::unordered_map<std::uint32_t, bool> used_pred, used_gt;
  for (const auto& e : cand) {
    if (used_pred[e.pred] || used_gt[e.gt]) continue;
    used_pred[e.pred] = used_gt[e.gt] = true;
    r.pairs.push_back(e);
  }
  for (std::uint32_t id : table.pred_ids) {
    if (!used_pred[id]) r.unmatched_pred.push_back(id);
  }
  for (std::uint32_t id : table.gt_ids) {
    if (!used_gt[id]) r.unmatched_gt.push_back(id);
  }
  return r;
}

inline double average_precision(const MatchResult& m) {
  const std::size_t denom = m.tp() + m.fp() + m.fn();
  return denom == 0 ? 1.0 : static_cast<double>(m.tp()) / static_cast<double>(denom);
}

inline double average_precision(const LabelMap& pred, const LabelMap& gt, double threshold) {
  return average_precision(match_at_threshold(iou_pairs(pred, gt), threshold));
}

inline double panoptic_quality(const MatchResult& m) {
  const double denom = static_cast<double>(m.tp()) + 0.5 * static_cast<double>(m.fp()) +
                       0.5 * static_cast<double>(m.fn());
  if (denom == 0) return 1.0;
  double sum = 0;
  for (const auto& e : m.pairs) sum += e.iou;
  return sum / denom;
}

inline double panoptic_quality(const LabelMap& pred, const LabelMap& gt, double threshold = 0.5) {
  if (threshold < 0.5) {
    throw Error(ErrorCode::invalid_argument, "PQ is defined for IoU thresholds >= 0.5");
  }
  return panoptic_quality(match_at_threshold(iou_pairs(pred, gt), threshold));
}

inline double mean_matched_iou(const MatchResult& m) {
  if (m.pairs.empty()) return 0.0;
  double s = 0;
  for (const auto& e : m.pairs) s += e.iou;
  return s / static_cast<double>(m.pairs.size());
}

// ---------------------------------------------------------------------------
// Dataset-level evaluation

enum class Subset { all, sparse, dense };

inline std::string to_string(Subset s) {
  switch (s) {
    case Subset::all: return "all";
    case Subset::sparse: return "sparse";
    case Subset::dense: return "dense";
  }
  return "all";
}

struct ImageScore {
  std::string name;
  double ap = 0;
  double pq = 0;
  std::size_t instance_count = 0;  // ground-truth instances
  std::size_t tp = 0, fp = 0, fn = 0;
};

struct EvalReport {
  Subset subset = Subset::all;
  double threshold = 0.5;
  std::vector<ImageScore> per_image;
  double mean_ap = 0;
  double mean_pq = 0;
};

// Images with fewer than 100 ground-truth instances are sparse; 100 and
// above are dense.
inline constexpr std::size_t kDenseInstanceCount = 100;

inline bool is_dense(std::size_t gt_instances) { return gt_instances >= kDenseInstanceCount; }

template <typename Item, typename CountFn>
std::pair<std::vector<Item>, std::vector<Item>> split_sparse_dense(const std::vector<Item>& items,
                                                                   CountFn&& count) {
  std::pair<std::vector<Item>, std::vector<Item>> out;
  for (const auto& it : items) {
    (is_dense(count(it)) ? out.second : out.first).push_back(it);
  }
  return out;
}

inline ImageScore score_image(const LabelMap& pred, const LabelMap& gt, double threshold,
                              std::string name = {}) {
  const IouTable table = iou_pairs(pred, gt);
  const MatchResult m = match_at_threshold(table, threshold);
  ImageScore s;
  s.name = std::move(name);
  s.ap = average_precision(m);
  s.pq = threshold >= 0.5 ? panoptic_quality(m) : 0.0;
  s.instance_count = table.gt_ids.size();
  s.tp = m.tp();
  s.fp = m.fp();
  s.fn = m.fn();
  return s;
}

inline EvalReport aggregate(std::vector<ImageScore> scores, Subset subset, double threshold) {
  EvalReport r;
  r.subset = subset;
  r.threshold = threshold;
  r.per_image = std::move(scores);
  if (!r.per_image.empty()) {
    double ap = 0, pq = 0;
    for (const auto& s : r.per_image) {
      ap += s.ap;
      pq += s.pq;
    }
    r.mean_ap = ap / static_cast<double>(r.per_image.size());
    r.mean_pq = pq / static_cast<double>(r.per_image.size());
  }
  return r;
}

struct LabeledPair {
  const LabelMap* pred = nullptr;
  const LabelMap* gt = nullptr;
  std::string name;
};

inline double mean_ap(const std::vector<LabeledPair>& dataset, double threshold, int threads = 1) {
  if (dataset.empty()) throw Error(ErrorCode::empty_input, "mean AP of an empty dataset");
  std::vector<double> ap(dataset.size());
  parallel_for(dataset.size(), threads, [&](std::size_t i) {
    ap[i] = average_precision(*dataset[i].pred, *dataset[i].gt, threshold);
  });
  double s = 0;
  for (double v : ap) s += v;
  return s / static_cast<double>(ap.size());
}

// ---------------------------------------------------------------------------
// Scale-bar accuracy

inline double length_error(double recognized, double truth) {
  if (truth == 0) throw Error(ErrorCode::invalid_argument, "ground-truth length is zero");
  return (recognized - truth) / truth;
}

struct ScalebarResult {
  double recognized_px = 0;
  double truth_px = 0;
  bool unit_ok = false;
  bool value_ok = false;
};

struct ScalebarReport {
  std::size_t count = 0;
  double unit_accuracy = 0;
  double value_accuracy = 0;
  double mae_px = 0;
  double exact_fraction = 0;       // share of images with zero length error
  double mean_abs_rel_error = 0;
  double p50 = 0, p75 = 0, p90 = 0, p95 = 0;  // of |relative error|
};

inline ScalebarReport scalebar_report(const std::vector<ScalebarResult>& results) {
  if (results.empty()) throw Error(ErrorCode::empty_input, "no scale-bar results");
  ScalebarReport r;
  r.count = results.size();
  std::vector<double> rel;
  double unit_ok = 0, value_ok = 0, abs_px = 0, exact = 0, rel_sum = 0;
  for (const auto& e : results) {
    unit_ok += e.unit_ok;
    value_ok += e.value_ok;
    abs_px += std::abs(e.recognized_px - e.truth_px);
    exact += e.recognized_px == e.truth_px;
    const double a = std::abs(length_error(e.recognized_px, e.truth_px));
    rel.push_back(a);
    rel_sum += a;
  }
  const double n = static_cast<double>(results.size());
  r.unit_accuracy = unit_ok / n;
  r.value_accuracy = value_ok / n;
  r.mae_px = abs_px / n;
  r.exact_fraction = exact / n;
  r.mean_abs_rel_error = rel_sum / n;
  const WeightedSamples s = merge_samples(rel, std::vector<double>(rel.size(), 1.0));
  r.p50 = weighted_percentile(s, 0.50);
  r.p75 = weighted_percentile(s, 0.75);
  r.p90 = weighted_percentile(s, 0.90);
  r.p95 = weighted_percentile(s, 0.95);
  return r;
}

}  // namespace micrometry
