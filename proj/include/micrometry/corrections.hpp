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

// Human correction actions on a label map and their deterministic replay.
// Ids stay stable across edits: deletions leave gaps, merges keep the
// smallest id, and new regions take ids from a counter that never reuses.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <string>
#include <vector>

#include "micrometry/error.hpp"
#include "micrometry/imagecore.hpp"
#include "micrometry/json_io.hpp"

namespace micrometry {

enum class CorrectionKind { erase, merge, split, add };

struct CorrectionAction {
  CorrectionKind kind = CorrectionKind::erase;
  std::vector<std::uint32_t> ids;  // erase: 1, merge: >= 2, split: 1
  std::vector<Pixel> points;       // split polyline or add polygon
  std::string author;
  std::string timestamp;
  friend bool operator==(const CorrectionAction&, const CorrectionAction&) = default;
};

struct LabelState {
  LabelMap labels;
  std::uint32_t next_id = 1;
  friend bool operator==(const LabelState&, const LabelState&) = default;
};

inline LabelState initial_state(LabelMap base) {
  LabelState s;
  s.next_id = max_label(base) + 1;
  s.labels = std::move(base);
  return s;
}

namespace detail {

inline bool id_present(const LabelMap& lm, std::uint32_t id) {
  if (id == 0) return false;
  for (std::uint32_t v : lm.data()) {
    if (v == id) return true;
  }
  return false;
}

// 4-connectivity of the pixels satisfying `in` inside `box`.
template <typename In>
bool region_connected(const Rect& box, In&& in) {
  Grid<std::uint8_t> seen(box.w, box.h, 0);
  std::vector<Pixel> stack;
  std::size_t total = 0, reached = 0;
  for (int y = 0; y < box.h; ++y) {
    for (int x = 0; x < box.w; ++x) {
      if (!in(box.y + y, box.x + x)) continue;
      ++total;
      if (stack.empty() && reached == 0) {
        stack.push_back({y, x});
        seen(y, x) = 1;
        reached = 1;
      }
    }
  }
  while (!stack.empty()) {
    const Pixel p = stack.back();
    stack.pop_back();
    const Pixel nb[4] = {{p.y - 1, p.x}, {p.y + 1, p.x}, {p.y, p.x - 1}, {p.y, p.x + 1}};
    for (const Pixel& q : nb) {
      if (q.y < 0 || q.x < 0 || q.y >= box.h || q.x >= box.w || seen(q.y, q.x)) continue;
      if (!in(box.y + q.y, box.x + q.x)) continue;
      seen(q.y, q.x) = 1;
      ++reached;
      stack.push_back(q);
    }
  }
  return total > 0 && reached == total;
}

inline Rect box_of(const LabelMap& lm, const std::vector<std::uint32_t>& ids) {
  int x0 = lm.width(), y0 = lm.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < lm.height(); ++y) {
    for (int x = 0; x < lm.width(); ++x) {
      if (std::find(ids.begin(), ids.end(), lm(y, x)) == ids.end()) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return {};
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

// 8-connected Bresenham segment, both ends included.
inline void bresenham(Pixel a, Pixel b, std::vector<Pixel>& out) {
  int x = a.x, y = a.y;
  const int dx = std::abs(b.x - a.x), dy = -std::abs(b.y - a.y);
  const int sx = a.x < b.x ? 1 : -1, sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  while (true) {
    out.push_back({y, x});
    if (x == b.x && y == b.y) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
}

inline bool on_boundary_or_outside(const LabelMap& lm, Pixel p, std::uint32_t id) {
  if (!lm.in_bounds(p.y, p.x) || lm(p.y, p.x) != id) return true;
  const Pixel nb[4] = {{p.y - 1, p.x}, {p.y + 1, p.x}, {p.y, p.x - 1}, {p.y, p.x + 1}};
  for (const Pixel& q : nb) {
    if (!lm.in_bounds(q.y, q.x) || lm(q.y, q.x) != id) return true;
  }
  return false;
}

inline long long cross(Pixel o, Pixel a, Pixel b) {
  return static_cast<long long>(a.x - o.x) * (b.y - o.y) -
         static_cast<long long>(a.y - o.y) * (b.x - o.x);
}

inline bool on_segment(Pixel a, Pixel b, Pixel p) {
  return cross(a, b, p) == 0 && std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

inline bool segments_intersect(Pixel a, Pixel b, Pixel c, Pixel d) {
  const long long d1 = cross(c, d, a), d2 = cross(c, d, b);
  const long long d3 = cross(a, b, c), d4 = cross(a, b, d);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return true;
  }
  return on_segment(c, d, a) || on_segment(c, d, b) || on_segment(a, b, c) || on_segment(a, b, d);
}

inline bool polygon_simple(const std::vector<Pixel>& poly) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (poly[i] == poly[(i + 1) % n]) return false;
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return false;
    }
  }
  return true;
}

// Pixel centers on the outline count as inside.
inline bool inside_polygon(const std::vector<Pixel>& poly, Pixel p) {
  const std::size_t n = poly.size();
  bool in = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Pixel a = poly[j], b = poly[i];
    if (on_segment(a, b, p)) return true;
    if ((a.y > p.y) != (b.y > p.y)) {
      // x coordinate of the edge at row p.y compared without division
      const long long lhs = static_cast<long long>(p.x - a.x) * (b.y - a.y);
      const long long rhs = static_cast<long long>(b.x - a.x) * (p.y - a.y);
      if ((b.y > a.y) ? lhs < rhs : lhs > rhs) in = !in;
    }
  }
  return in;
}

inline void apply_erase(LabelState& s, const CorrectionAction& a) {
  if (a.ids.size() != 1) throw Error(ErrorCode::invalid_action, "delete takes exactly one id");
  const std::uint32_t id = a.ids[0];
  if (!id_present(s.labels, id)) throw Error(ErrorCode::not_found, "unknown instance id " + std::to_string(id));
  for (auto& v : s.labels.data()) {
    if (v == id) v = 0;
  }
}

inline void apply_merge(LabelState& s, const CorrectionAction& a) {
  std::vector<std::uint32_t> ids = a.ids;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() < 2) throw Error(ErrorCode::invalid_action, "merge needs two or more distinct ids");
  for (std::uint32_t id : ids) {
    if (!id_present(s.labels, id)) {
      throw Error(ErrorCode::not_found, "unknown instance id " + std::to_string(id));
    }
  }
  const Rect box = box_of(s.labels, ids);
  const LabelMap& lm = s.labels;
  const bool connected = region_connected(box, [&](int y, int x) {
    return std::binary_search(ids.begin(), ids.end(), lm(y, x));
  });
  if (!connected) throw Error(ErrorCode::invalid_action, "merged region is not connected");
  for (auto& v : s.labels.data()) {
    if (v != 0 && std::binary_search(ids.begin(), ids.end(), v)) v = ids.front();
  }
}

inline void apply_split(LabelState& s, const CorrectionAction& a) {
  if (a.ids.size() != 1) throw Error(ErrorCode::invalid_action, "split takes exactly one id");
  const std::uint32_t id = a.ids[0];
  if (!id_present(s.labels, id)) throw Error(ErrorCode::not_found, "unknown instance id " + std::to_string(id));
  if (a.points.size() < 2) throw Error(ErrorCode::invalid_action, "split polyline needs two points");
  LabelMap& lm = s.labels;
  if (!on_boundary_or_outside(lm, a.points.front(), id) ||
      !on_boundary_or_outside(lm, a.points.back(), id)) {
    throw Error(ErrorCode::invalid_action, "split polyline must start and end on the instance boundary");
  }
  std::vector<Pixel> line;
  for (std::size_t i = 0; i + 1 < a.points.size(); ++i) bresenham(a.points[i], a.points[i + 1], line);

  const Rect box = box_of(lm, {id});
  Grid<std::uint8_t> cut(box.w, box.h, 0);
  std::vector<Pixel> cut_pixels;
  for (const Pixel& p : line) {
    if (!box.contains(p.y, p.x) || lm(p.y, p.x) != id) continue;
    if (cut(p.y - box.y, p.x - box.x)) continue;
    cut(p.y - box.y, p.x - box.x) = 1;
    cut_pixels.push_back(p);
  }
  // components of the instance minus the cut, numbered in raster order
  LabelMap comp(box.w, box.h, 0u);
  std::uint32_t ncomp = 0;
  for (int y = 0; y < box.h; ++y) {
    for (int x = 0; x < box.w; ++x) {
      if (comp(y, x) || cut(y, x) || lm(box.y + y, box.x + x) != id) continue;
      ++ncomp;
      std::vector<Pixel> stack{{y, x}};
      comp(y, x) = ncomp;
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        const Pixel nb[4] = {{p.y - 1, p.x}, {p.y + 1, p.x}, {p.y, p.x - 1}, {p.y, p.x + 1}};
        for (const Pixel& q : nb) {
          if (!comp.in_bounds(q.y, q.x) || comp(q.y, q.x) || cut(q.y, q.x)) continue;
          if (lm(box.y + q.y, box.x + q.x) != id) continue;
          comp(q.y, q.x) = ncomp;
          stack.push_back(q);
        }
      }
    }
  }
  if (ncomp < 2) throw Error(ErrorCode::invalid_action, "split does not separate the instance");

  // cut pixels join the nearest component (squared Euclidean distance to
  // its boundary pixels; lowest component on ties)
  std::vector<Pixel> boundary;
  std::vector<std::uint32_t> boundary_comp;
  for (int y = 0; y < box.h; ++y) {
    for (int x = 0; x < box.w; ++x) {
      const std::uint32_t c = comp(y, x);
      if (!c) continue;
      const Pixel nb[4] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
      bool edge = false;
      for (const Pixel& q : nb) edge = edge || !comp.in_bounds(q.y, q.x) || comp(q.y, q.x) != c;
      if (edge) {
        boundary.push_back({y, x});
        boundary_comp.push_back(c);
      }
    }
  }
  std::vector<std::uint32_t> cut_owner(cut_pixels.size(), 0);
  for (std::size_t i = 0; i < cut_pixels.size(); ++i) {
    const int py = cut_pixels[i].y - box.y, px = cut_pixels[i].x - box.x;
    long long best = std::numeric_limits<long long>::max();
    std::uint32_t owner = 0;
    for (std::size_t b = 0; b < boundary.size(); ++b) {
      const long long dy = boundary[b].y - py, dx = boundary[b].x - px;
      const long long d = dy * dy + dx * dx;
      if (d < best || (d == best && boundary_comp[b] < owner)) {
        best = d;
        owner = boundary_comp[b];
      }
    }
    cut_owner[i] = owner;
  }
  for (std::size_t i = 0; i < cut_pixels.size(); ++i) {
    comp(cut_pixels[i].y - box.y, cut_pixels[i].x - box.x) = cut_owner[i];
  }
  std::vector<std::uint32_t> new_id(ncomp + 1, id);
  for (std::uint32_t c = 2; c <= ncomp; ++c) new_id[c] = s.next_id++;
  for (int y = 0; y < box.h; ++y) {
    for (int x = 0; x < box.w; ++x) {
      if (comp(y, x)) lm(box.y + y, box.x + x) = new_id[comp(y, x)];
    }
  }
}

inline void apply_add(LabelState& s, const CorrectionAction& a) {
  if (a.points.size() < 3) throw Error(ErrorCode::invalid_action, "polygon needs three vertices");
  if (!polygon_simple(a.points)) throw Error(ErrorCode::invalid_action, "polygon is self-intersecting");
  LabelMap& lm = s.labels;
  int x0 = a.points[0].x, x1 = x0, y0 = a.points[0].y, y1 = y0;
  for (const Pixel& p : a.points) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, lm.width() - 1);
  y1 = std::min(y1, lm.height() - 1);
  if (x1 < x0 || y1 < y0) throw Error(ErrorCode::invalid_action, "polygon lies outside the image");
  const Rect box{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
  auto in = [&](int y, int x) { return lm(y, x) == 0 && inside_polygon(a.points, {y, x}); };
  bool any = false;
  for (int y = box.y; y < box.bottom() && !any; ++y) {
    for (int x = box.x; x < box.right() && !any; ++x) any = in(y, x);
  }
  if (!any) throw Error(ErrorCode::invalid_action, "polygon covers no background pixel");
  if (!region_connected(box, in)) throw Error(ErrorCode::invalid_action, "added region is not connected");
  const std::uint32_t id = s.next_id++;
  std::vector<Pixel> fill;
  for (int y = box.y; y < box.bottom(); ++y) {
    for (int x = box.x; x < box.right(); ++x) {
      if (in(y, x)) fill.push_back({y, x});
    }
  }
  for (const Pixel& p : fill) lm(p.y, p.x) = id;
}

}  // namespace detail

// Applies one action in place; on error the state is left unchanged.
inline void apply_action(LabelState& state, const CorrectionAction& a) {
  LabelState next = state;
  switch (a.kind) {
    case CorrectionKind::erase: detail::apply_erase(next, a); break;
    case CorrectionKind::merge: detail::apply_merge(next, a); break;
    case CorrectionKind::split: detail::apply_split(next, a); break;
    case CorrectionKind::add: detail::apply_add(next, a); break;
  }
  if (next.next_id > 65536) throw Error(ErrorCode::invalid_action, "instance ids exhausted");
  state = std::move(next);
}

inline LabelState replay(const LabelMap& base, const std::vector<CorrectionAction>& log) {
  LabelState s = initial_state(base);
  for (const auto& a : log) apply_action(s, a);
  return s;
}

// --- JSON -------------------------------------------------------------------
// {"kind": "delete", "id": 7}
// {"kind": "merge", "ids": [3, 4]}
// {"kind": "split", "id": 5, "polyline": [[x, y], ...]}
// {"kind": "add", "polygon": [[x, y], ...]}
// plus optional "author" and "timestamp" strings.

inline std::string to_string(CorrectionKind k) {
  switch (k) {
    case CorrectionKind::erase: return "delete";
    case CorrectionKind::merge: return "merge";
    case CorrectionKind::split: return "split";
    case CorrectionKind::add: return "add";
  }
  return "delete";
}

inline void to_json(json& j, const CorrectionAction& a) {
  j = json{{"kind", to_string(a.kind)}};
  if (a.kind == CorrectionKind::merge) {
    j["ids"] = a.ids;
  } else if (a.kind != CorrectionKind::add) {
    j["id"] = a.ids.empty() ? 0u : a.ids[0];
  }
  if (a.kind == CorrectionKind::split || a.kind == CorrectionKind::add) {
    json pts = json::array();
    for (const Pixel& p : a.points) pts.push_back(json::array({p.x, p.y}));
    j[a.kind == CorrectionKind::split ? "polyline" : "polygon"] = std::move(pts);
  }
  j["author"] = a.author;
  j["timestamp"] = a.timestamp;
}

inline void from_json(const json& j, CorrectionAction& a) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    throw Error(ErrorCode::invalid_action, "correction needs a kind");
  }
  const std::string kind = j["kind"].get<std::string>();
  a = {};
  auto points = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_array()) {
      throw Error(ErrorCode::invalid_action, std::string("missing ") + key);
    }
    for (const json& p : j[key]) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer()) {
        throw Error(ErrorCode::invalid_action, "points must be integer [x, y] pairs");
      }
      a.points.push_back({p[1].get<int>(), p[0].get<int>()});
    }
  };
  auto keys = [&](std::initializer_list<const char*> known, const char* what) {
    try {
      detail::check_keys(j, known, what);
    } catch (const Error& e) {
      throw Error(ErrorCode::invalid_action, e.what());
    }
  };
  auto one_id = [&]() {
    if (!j.contains("id") || !j["id"].is_number_unsigned()) {
      throw Error(ErrorCode::invalid_action, "missing instance id");
    }
    a.ids = {j["id"].get<std::uint32_t>()};
  };
  if (kind == "delete") {
    keys({"kind", "id", "author", "timestamp"}, "delete");
    a.kind = CorrectionKind::erase;
    one_id();
  } else if (kind == "merge") {
    keys({"kind", "ids", "author", "timestamp"}, "merge");
    a.kind = CorrectionKind::merge;
    try {
      a.ids = j.at("ids").get<std::vector<std::uint32_t>>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::invalid_action, "merge needs an id list");
    }
  } else if (kind == "split") {
    keys({"kind", "id", "polyline", "author", "timestamp"}, "split");
    a.kind = CorrectionKind::split;
    one_id();
    points("polyline");
  } else if (kind == "add") {
    keys({"kind", "polygon", "author", "timestamp"}, "add");
    a.kind = CorrectionKind::add;
    points("polygon");
  } else {
    throw Error(ErrorCode::invalid_action, "unknown correction kind: " + kind);
  }
  a.author = j.value("author", std::string());
  a.timestamp = j.value("timestamp", std::string());
}

}  // namespace micrometry
