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

#include <cstring>
#include <random>

#include "micrometry/imagecore.hpp"
#include "micrometry/png_io.hpp"

namespace micrometry {
namespace {

// Connected components by repeated union over 4-neighbors; slow on purpose.
std::size_t brute_component_count(const LabelMap& lm) {
  const int w = lm.width(), h = lm.height();
  std::vector<int> parent(lm.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a];
    return a;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = y * w + x;
      if (lm[i] == 0) continue;
      if (x + 1 < w && lm[i + 1] == lm[i]) parent[find(i)] = find(i + 1);
      if (y + 1 < h && lm[i + w] == lm[i]) parent[find(i)] = find(i + w);
    }
  }
  std::size_t roots = 0;
  for (std::size_t i = 0; i < lm.size(); ++i) {
    if (lm[i] != 0 && find(static_cast<int>(i)) == static_cast<int>(i)) ++roots;
  }
  return roots;
}

TEST(Canonicalize, AllZeroStaysEmpty) {
  LabelMap lm(6, 4, 0u);
  EXPECT_EQ(canonicalize_labels(lm), lm);
  EXPECT_EQ(max_label(canonicalize_labels(lm)), 0u);
}

TEST(Canonicalize, RenumbersByFirstRasterOccurrence) {
  LabelMap lm(4, 3, 0u);
  lm(0, 3) = 9;
  lm(2, 0) = 5;
  lm(2, 1) = 5;
  const LabelMap c = canonicalize_labels(lm);
  EXPECT_EQ(c(0, 3), 1u);
  EXPECT_EQ(c(2, 0), 2u);
  EXPECT_EQ(c(2, 1), 2u);
  EXPECT_TRUE(is_canonical(c));
}

TEST(Canonicalize, SplitsDisjointBlobsOfOneId) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    LabelMap lm(8, 8, 0u);
    for (auto& v : lm.storage()) v = rng() % 3;  // ids 1 and 2 scattered
    const LabelMap c = canonicalize_labels(lm);
    EXPECT_EQ(max_label(c), brute_component_count(lm));
    EXPECT_EQ(brute_component_count(c), max_label(c));
    for (std::size_t i = 0; i < lm.size(); ++i) EXPECT_EQ(lm[i] == 0, c[i] == 0);
  }
}

TEST(LabelBoxes, TightBoundingBoxes) {
  LabelMap lm(10, 10, 0u);
  for (int y = 2; y < 5; ++y)
    for (int x = 3; x < 8; ++x) lm(y, x) = 1;
  lm(9, 9) = 2;
  const auto boxes = label_boxes(lm);
  ASSERT_EQ(boxes.size(), 3u);
  EXPECT_EQ(boxes[1], (Rect{3, 2, 5, 3}));
  EXPECT_EQ(boxes[2], (Rect{9, 9, 1, 1}));
}

TEST(FlowFile, RoundTripsKnownFloats) {
  FlowField f(2, 2);
  f.dy = {0.5f, -1.0f, 0.0f, 1e-7f};
  f.dx = {-0.25f, 3.0f, -0.0f, 7.5f};
  f.fg = {1.0f, 0.0f, 0.5f, 0.999f};
  const auto bytes = encode_flow(f);
  const FlowField g = decode_flow(bytes);
  EXPECT_EQ(g.width, 2);
  EXPECT_EQ(g.height, 2);
  EXPECT_EQ(std::memcmp(g.dy.data(), f.dy.data(), 16), 0);
  EXPECT_EQ(std::memcmp(g.dx.data(), f.dx.data(), 16), 0);
  EXPECT_EQ(std::memcmp(g.fg.data(), f.fg.data(), 16), 0);
}

TEST(FlowFile, ByteLengthFollowsFormat) {
  const FlowField f(512, 512);
  EXPECT_EQ(encode_flow(f).size(), 16u + 3u * 512u * 512u * 4u);
}

TEST(FlowFile, RejectsBadMagicVersionAndTruncation) {
  auto bytes = encode_flow(FlowField(3, 2));
  auto bad = bytes;
  std::memcpy(bad.data(), "XXXX", 4);
  try {
    decode_flow(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::bad_magic);
  }
  bad = bytes;
  bad[4] = 2;
  try {
    decode_flow(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::version_mismatch);
  }
  bad = bytes;
  bad.pop_back();
  try {
    decode_flow(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::truncated);
  }
}

// Random byte strings, prefixes and single-byte corruptions must either
// decode or raise a micrometry::Error; nothing else may escape.
TEST(FlowFile, FuzzedInputsFailCleanly) {
  std::mt19937 rng(17);
  FlowField f(5, 4);
  for (std::size_t i = 0; i < f.pixel_count(); ++i) f.fg[i] = static_cast<float>(i);
  const auto good = encode_flow(f);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<std::uint8_t> b;
    switch (trial % 3) {
      case 0:
        b.resize(rng() % 64);
        for (auto& v : b) v = static_cast<std::uint8_t>(rng());
        if (b.size() >= 4 && trial % 2) std::memcpy(b.data(), "UAFL", 4);
        break;
      case 1:
        b.assign(good.begin(), good.begin() + static_cast<long>(rng() % good.size()));
        break;
      default:
        b = good;
        b[rng() % 16] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    }
    try {
      const FlowField g = decode_flow(b);
      EXPECT_NO_THROW(g.validate());
    } catch (const Error&) {
    }
  }
}

TEST(Rle, EmptyAndFullMasks) {
  const Mask empty(7, 5, 0);
  EXPECT_TRUE(encode_rle(empty).runs.empty());
  const Mask full(7, 5, 1);
  const auto rle = encode_rle(full);
  ASSERT_EQ(rle.runs.size(), 1u);
  EXPECT_EQ(rle.runs[0].start, 0u);
  EXPECT_EQ(rle.runs[0].length, 35u);
}

TEST(Rle, RandomMasksRoundTrip) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    Mask m(64, 64, 0);
    const unsigned density = 1 + rng() % 9;
    for (auto& v : m.storage()) v = (rng() % 10) < density;
    EXPECT_EQ(decode_rle(encode_rle(m)), m);
  }
}

TEST(Png, ImageAndLabelRoundTrip) {
  Raster8 rgb(9, 7, 3);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 9; ++x)
      for (int c = 0; c < 3; ++c) rgb.at(y, x, c) = static_cast<std::uint8_t>(y * 31 + x * 7 + c);
  EXPECT_EQ(decode_png_image(encode_png(rgb)), rgb);

  LabelMap lm(6, 6, 0u);
  lm(1, 1) = 1;
  lm(5, 5) = 65535;
  EXPECT_EQ(decode_label_png(encode_label_png(lm)), lm);
  lm(0, 0) = 65536;
  EXPECT_THROW(encode_label_png(lm), Error);
}

TEST(Png, GarbageFailsWithDecodeError) {
  std::mt19937 rng(9);
  const auto good = encode_png(Raster8(8, 8, 1, 100));
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::uint8_t> b = good;
    if (trial % 2) {
      b.resize(rng() % good.size());
    } else {
      for (int k = 0; k < 4; ++k) b[rng() % b.size()] ^= 0x5a;
    }
    try {
      (void)decode_png_image(b);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::decode);
    }
  }
}

}  // namespace
}  // namespace micrometry
