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

#include <random>

#include "micrometry/corrections.hpp"

namespace micrometry {
namespace {

// Two 9x9 squares joined by a 3-pixel-high bridge, all with one id.
LabelMap dumbbell(std::uint32_t id) {
  LabelMap lm(40, 20, 0u);
  for (int y = 5; y < 14; ++y) {
    for (int x = 4; x < 13; ++x) lm(y, x) = id;
    for (int x = 25; x < 34; ++x) lm(y, x) = id;
  }
  for (int y = 8; y < 11; ++y) {
    for (int x = 13; x < 25; ++x) lm(y, x) = id;
  }
  return lm;
}

std::uint64_t count_id(const LabelMap& lm, std::uint32_t id) {
  std::uint64_t n = 0;
  for (auto v : lm.data()) n += v == id;
  return n;
}

CorrectionAction erase(std::uint32_t id) { return {CorrectionKind::erase, {id}, {}, "", ""}; }

TEST(Corrections, SplitDumbbellKeepsArea) {
  LabelState s = initial_state(dumbbell(1));
  const auto before = count_id(s.labels, 1);
  apply_action(s, {CorrectionKind::split, {1}, {{2, 19}, {17, 19}}, "a", ""});
  EXPECT_EQ(s.next_id, 3u);
  const auto left = count_id(s.labels, 1), right = count_id(s.labels, 2);
  EXPECT_GT(left, 0u);
  EXPECT_GT(right, 0u);
  EXPECT_EQ(left + right, before);
  // the left square keeps the original id
  EXPECT_EQ(s.labels(9, 5), 1u);
  EXPECT_EQ(s.labels(9, 30), 2u);
}

TEST(Corrections, SplitThatDoesNotSeparateIsRejected) {
  LabelState s = initial_state(dumbbell(1));
  const LabelState before = s;
  // touches the left square only from above, never crossing it
  CorrectionAction a{CorrectionKind::split, {1}, {{2, 8}, {5, 8}}, "", ""};
  try {
    apply_action(s, a);
    FAIL() << "expected invalid_action";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_action);
  }
  EXPECT_EQ(s, before);
}

TEST(Corrections, SplitEndpointsInsideAreRejected) {
  LabelState s = initial_state(dumbbell(1));
  CorrectionAction a{CorrectionKind::split, {1}, {{9, 8}, {9, 30}}, "", ""};
  EXPECT_THROW(apply_action(s, a), Error);
}

TEST(Corrections, MergeTouchingHalves) {
  LabelMap lm(10, 6, 0u);
  for (int y = 1; y < 5; ++y) {
    for (int x = 1; x < 5; ++x) lm(y, x) = 4;
    for (int x = 5; x < 9; ++x) lm(y, x) = 2;
  }
  LabelState s = initial_state(lm);
  apply_action(s, {CorrectionKind::merge, {4, 2}, {}, "", ""});
  EXPECT_EQ(count_id(s.labels, 2), 32u);
  EXPECT_EQ(count_id(s.labels, 4), 0u);
  EXPECT_EQ(s.next_id, 5u);
}

TEST(Corrections, MergeDisjointIsRejected) {
  LabelMap lm(10, 3, 0u);
  lm(1, 1) = 1;
  lm(1, 8) = 2;
  LabelState s = initial_state(lm);
  try {
    apply_action(s, {CorrectionKind::merge, {1, 2}, {}, "", ""});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_action);
  }
  EXPECT_THROW(apply_action(s, {CorrectionKind::merge, {1, 1}, {}, "", ""}), Error);
}

TEST(Corrections, DeleteAndUnknownId) {
  LabelState s = initial_state(dumbbell(3));
  apply_action(s, erase(3));
  EXPECT_EQ(count_id(s.labels, 3), 0u);
  try {
    apply_action(s, erase(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::not_found);
  }
  EXPECT_THROW(apply_action(s, erase(0)), Error);
}

TEST(Corrections, AddPolygon) {
  LabelState s = initial_state(LabelMap(20, 20, 0u));
  s.labels(0, 0) = 1;
  s.next_id = 2;
  // axis-aligned square with corners (2,2) and (6,6): 25 pixel centers
  apply_action(s, {CorrectionKind::add, {}, {{2, 2}, {2, 6}, {6, 6}, {6, 2}}, "", ""});
  EXPECT_EQ(count_id(s.labels, 2), 25u);
  EXPECT_EQ(s.next_id, 3u);
  // overlapping polygon only claims background
  apply_action(s, {CorrectionKind::add, {}, {{4, 4}, {4, 9}, {9, 9}, {9, 4}}, "", ""});
  EXPECT_EQ(count_id(s.labels, 2), 25u);
  EXPECT_EQ(count_id(s.labels, 3), 36u - 9u);
}

TEST(Corrections, AddInvalidPolygons) {
  LabelState s = initial_state(LabelMap(20, 20, 0u));
  const LabelState before = s;
  // bow tie
  CorrectionAction bow{CorrectionKind::add, {}, {{2, 2}, {8, 8}, {2, 8}, {8, 2}}, "", ""};
  try {
    apply_action(s, bow);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_action);
  }
  EXPECT_THROW(apply_action(s, {CorrectionKind::add, {}, {{1, 1}, {2, 2}}, "", ""}), Error);
  EXPECT_THROW(apply_action(s, {CorrectionKind::add, {}, {{40, 40}, {40, 50}, {50, 50}}, "", ""}),
               Error);
  EXPECT_EQ(s, before);
}

TEST(Corrections, IdCapIsEnforced) {
  LabelMap lm(4, 4, 0u);
  lm(0, 0) = 65534;
  LabelState s = initial_state(lm);
  apply_action(s, {CorrectionKind::add, {}, {{2, 2}, {2, 3}, {3, 3}}, "", ""});
  EXPECT_EQ(s.labels(2, 2), 65535u);
  EXPECT_THROW(apply_action(s, {CorrectionKind::add, {}, {{0, 2}, {0, 3}, {1, 3}}, "", ""}), Error);
}

TEST(Corrections, ReplayIsDeterministic) {
  const LabelMap base = dumbbell(1);
  std::vector<CorrectionAction> log = {
      {CorrectionKind::split, {1}, {{2, 19}, {17, 19}}, "a", "t0"},
      {CorrectionKind::add, {}, {{15, 36}, {15, 39}, {19, 39}, {19, 36}}, "b", "t1"},
      {CorrectionKind::merge, {1, 2}, {}, "c", "t2"},
      {CorrectionKind::erase, {3}, {}, "d", "t3"},
  };
  LabelState live = initial_state(base);
  for (const auto& a : log) apply_action(live, a);
  EXPECT_EQ(replay(base, log), live);
  EXPECT_EQ(count_id(live.labels, 1), count_id(base, 1));
  EXPECT_EQ(live.next_id, 4u);
}

TEST(Corrections, JsonRoundTrip) {
  const std::vector<CorrectionAction> acts = {
      {CorrectionKind::erase, {7}, {}, "x", "2026-01-01T00:00:00Z"},
      {CorrectionKind::merge, {3, 4, 9}, {}, "", ""},
      {CorrectionKind::split, {5}, {{1, 2}, {3, 4}, {5, 6}}, "y", ""},
      {CorrectionKind::add, {}, {{0, 0}, {0, 5}, {5, 5}}, "", "z"},
  };
  for (const auto& a : acts) {
    const json j = a;
    EXPECT_EQ(j.get<CorrectionAction>(), a);
    EXPECT_EQ(json::parse(j.dump()).get<CorrectionAction>(), a);
  }
  const json split = acts[2];
  EXPECT_EQ(split["polyline"][0], json::array({2, 1}));
  EXPECT_EQ(split["kind"], "split");
}

TEST(Corrections, JsonRejectsMalformed) {
  for (const char* text : {R"({"kind":"explode","id":1})", R"({"id":1})", R"({"kind":"delete"})",
                           R"({"kind":"delete","id":-3})", R"({"kind":"merge","ids":"1,2"})",
                           R"({"kind":"add","polygon":[[1,2,3]]})", R"({"kind":"delete","id":1,"x":0})",
                           R"([1,2])"}) {
    try {
      (void)json::parse(text).get<CorrectionAction>();
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::invalid_action) << text;
    }
  }
}

TEST(Corrections, RandomActionsLeaveStateValidOrUnchanged) {
  std::mt19937 rng(5);
  LabelMap base(48, 48, 0u);
  for (int k = 0; k < 6; ++k) {
    const int cy = 6 + 7 * k, cx = 8 + 5 * k;
    for (int y = cy - 3; y <= cy + 3; ++y) {
      for (int x = cx - 3; x <= cx + 3; ++x) {
        if (base.in_bounds(y, x)) base(y, x) = static_cast<std::uint32_t>(k + 1);
      }
    }
  }
  LabelState s = initial_state(base);
  std::vector<CorrectionAction> accepted;
  std::uniform_int_distribution<int> coord(-2, 49), idd(0, 12), kind(0, 3);
  for (int it = 0; it < 300; ++it) {
    CorrectionAction a;
    a.kind = static_cast<CorrectionKind>(kind(rng));
    const int np = a.kind == CorrectionKind::add ? 3 + it % 3 : 2;
    if (a.kind != CorrectionKind::add) a.ids.push_back(static_cast<std::uint32_t>(idd(rng)));
    if (a.kind == CorrectionKind::merge) a.ids.push_back(static_cast<std::uint32_t>(idd(rng)));
    if (a.kind == CorrectionKind::split || a.kind == CorrectionKind::add) {
      for (int p = 0; p < np; ++p) a.points.push_back({coord(rng), coord(rng)});
    }
    const LabelState before = s;
    try {
      apply_action(s, a);
      accepted.push_back(a);
    } catch (const Error&) {
      EXPECT_EQ(s, before);
    }
  }
  EXPECT_FALSE(accepted.empty());
  EXPECT_EQ(replay(base, accepted), s);
}

}  // namespace
}  // namespace micrometry
