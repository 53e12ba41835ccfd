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

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "micrometry/metrology.hpp"
#include "micrometry/synthgen.hpp"

namespace micrometry {
namespace {

// Percentile by scanning the cumulative weight function directly: expand
// each distinct value into its share of the normalized mass, take the mass
// midpoint as its plotting position, and interpolate linearly.
double brute_percentile(std::vector<std::pair<double, double>> vw, double q) {
  std::sort(vw.begin(), vw.end());
  std::vector<double> v, w;
  for (const auto& [value, weight] : vw) {
    if (!v.empty() && v.back() == value) {
      w.back() += weight;
    } else {
      v.push_back(value);
      w.push_back(weight);
    }
  }
  const std::size_t n = v.size();
  if (n == 1) return v[0];
  double total = 0;
  for (double x : w) total += x;
  std::vector<double> pos(n);
  double cum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double mid = (cum + w[i] / 2) / total;
    pos[i] = (mid - 0.5 / n) * n / (n - 1.0);
    cum += w[i];
  }
  if (q <= pos[0]) return v[0];
  if (q >= pos[n - 1]) return v[n - 1];
  std::size_t k = 1;
  while (pos[k] < q) ++k;
  return v[k - 1] + (q - pos[k - 1]) / (pos[k] - pos[k - 1]) * (v[k] - v[k - 1]);
}

LabelMap single(const std::function<bool(int, int)>& in, int w, int h) {
  LabelMap lm(w, h, 0u);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) lm(y, x) = in(y, x) ? 1u : 0u;
  return lm;
}

TEST(Measure, RadiusThirtyTwoDisk) {
  const auto lm = single([](int y, int x) { return (y - 50) * (y - 50) + (x - 50) * (x - 50) <= 32 * 32; }, 101, 101);
  const auto m = measure_all(lm);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_NEAR(m[0].diameter_px, 64.0, 0.64);
  EXPECT_GE(m[0].sphericity, 0.95);
  EXPECT_LE(m[0].aspect_ratio, 1.05);
  EXPECT_FALSE(m[0].touches_edge);
}

TEST(Measure, SquareSphericityNearQuarterPi) {
  for (int a : {50, 80, 120}) {
    const auto lm = single([a](int y, int x) { return y >= 5 && y < 5 + a && x >= 5 && x < 5 + a; }, a + 10, a + 10);
    const auto m = measure_all(lm);
    EXPECT_NEAR(m[0].sphericity, std::numbers::pi / 4, 0.05 * std::numbers::pi / 4) << a;
  }
}

TEST(Measure, TenToOneRectangleAspect) {
  const auto lm = single([](int y, int x) { return y >= 10 && y < 20 && x >= 10 && x < 110; }, 120, 30);
  EXPECT_NEAR(measure_all(lm)[0].aspect_ratio, 10.0, 0.5);
}

TEST(Measure, ClippedDiskTouchesEdge) {
  const auto lm = single([](int y, int x) { return y * y + (x - 20) * (x - 20) <= 100; }, 40, 40);
  EXPECT_TRUE(measure_all(lm)[0].touches_edge);
}

TEST(Measure, CalibrationFillsPhysicalDiameter) {
  const auto lm = single([](int y, int x) { return (y - 20) * (y - 20) + (x - 20) * (x - 20) <= 100; }, 40, 40);
  const auto m = measure_all(lm, 25.0);
  ASSERT_TRUE(m[0].diameter_phys);
  EXPECT_DOUBLE_EQ(*m[0].diameter_phys, m[0].diameter_px * 25.0);
}

TEST(Filter, MicronRangeKeepsOnlyInRange) {
  std::vector<InstanceMetrics> ms;
  for (double d_um : {2.0, 5.0, 9.0, 15.0, 15.5, 30.0}) {
    InstanceMetrics m;
    m.id = static_cast<std::uint32_t>(ms.size() + 1);
    m.diameter_phys = d_um * 1000.0;
    m.diameter_px = d_um * 40;
    ms.push_back(m);
  }
  ms[2].touches_edge = true;
  FilterCriteria fc;
  fc.unit = LengthUnit::nm;
  fc.diameter_min = 5000;
  fc.diameter_max = 15000;
  auto out = filter_instances(ms, fc);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].id, 2u);
  EXPECT_EQ(out[2].id, 4u);
  fc.exclude_edge = true;
  EXPECT_EQ(filter_instances(ms, fc).size(), 2u);
  EXPECT_EQ(filter_instances(ms, FilterCriteria{}), ms);
}

TEST(Filter, ExcludeEdgeDropsExactlyBorderContacts) {
  SceneSpec spec;
  spec.particle_count = 120;
  spec.seed = 4;
  const Scene s = gen_scene(spec);
  std::size_t k = 0;
  for (const auto& p : s.truth.particles) k += p.touches_edge;
  ASSERT_GT(k, 0u);
  const auto all = measure_all(s.truth.label_map);
  FilterCriteria fc;
  fc.exclude_edge = true;
  EXPECT_EQ(all.size() - filter_instances(all, fc).size(), k);
}

TEST(Filter, NanometreBoundsWithoutCalibrationFail) {
  std::vector<InstanceMetrics> ms(1);
  FilterCriteria fc;
  fc.unit = LengthUnit::nm;
  fc.diameter_min = 1;
  try {
    filter_instances(ms, fc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unit_mismatch);
  }
  fc = {};
  fc.diameter_min = 5;
  fc.diameter_max = 1;
  EXPECT_THROW(fc.validate(), Error);
}

TEST(Summarize, OneToHundred) {
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  const StatsSummary s = summarize(v);
  EXPECT_NEAR(s.p50, 50.5, 1e-12);
  EXPECT_NEAR(s.p10, 10.9, 1e-12);
  EXPECT_NEAR(s.p90, 90.1, 1e-12);
  EXPECT_DOUBLE_EQ(s.mean, 50.5);
}

TEST(Summarize, SingleValue) {
  const StatsSummary s = summarize({3.25});
  EXPECT_EQ(s.min, 3.25);
  EXPECT_EQ(s.max, 3.25);
  EXPECT_EQ(s.mean, 3.25);
  EXPECT_EQ(s.p10, 3.25);
  EXPECT_EQ(s.p50, 3.25);
  EXPECT_EQ(s.p90, 3.25);
  EXPECT_EQ(s.std, 0.0);
}

TEST(Summarize, WeightedMean) { EXPECT_DOUBLE_EQ(summarize({1, 2}, {1, 3}).mean, 1.75); }

TEST(Summarize, EmptyInputRejected) { EXPECT_THROW(summarize({}), Error); }

TEST(Percentile, MatchesCumulativeScanOracle) {
  std::mt19937_64 rng(2026);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 40);
    std::vector<double> v(n), w(n);
    std::vector<std::pair<double, double>> vw;
    for (int i = 0; i < n; ++i) {
      v[i] = static_cast<double>(rng() % 25) * 0.5;  // ties on purpose
      w[i] = 0.1 + static_cast<double>(rng() % 1000) / 100.0;
      vw.push_back({v[i], w[i]});
    }
    const double q = static_cast<double>(rng() % 1001) / 1000.0;
    EXPECT_NEAR(weighted_percentile(v, w, q), brute_percentile(vw, q), 1e-9);
  }
}

TEST(Diameters, MonodisperseAndVolumeSkew) {
  std::vector<InstanceMetrics> ms(5);
  for (auto& m : ms) m.diameter_px = 7;
  const auto p = diameter_percentiles(ms);
  EXPECT_EQ(p.d10, 7);
  EXPECT_EQ(p.d50, 7);
  EXPECT_EQ(p.d90, 7);

  std::vector<InstanceMetrics> two(10);
  for (int i = 0; i < 10; ++i) two[i].diameter_px = i < 5 ? 1.0 : 2.0;
  const auto vol = diameter_percentiles(two, Weighting::volume);
  const auto cnt = diameter_percentiles(two, Weighting::count);
  // size-1 population carries 1/9 of the volume
  std::vector<std::pair<double, double>> vw{{1.0, 5.0}, {2.0, 40.0}};
  EXPECT_NEAR(vol.d50, brute_percentile(vw, 0.5), 1e-12);
  EXPECT_GT(vol.d50, cnt.d50);
  EXPECT_DOUBLE_EQ(cnt.d50, 1.5);
}

TEST(Histogram, FixedWidthBins) {
  const Histogram h = histogram({0, 1, 2, 3}, {1, 1, 1, 1}, 2.0);
  ASSERT_EQ(h.counts.size(), 2u);
  EXPECT_EQ(h.edges, (std::vector<double>{0, 2, 3}));
  EXPECT_EQ(h.counts, (std::vector<double>{2, 2}));
}

TEST(Histogram, SingleValueOneBin) {
  const Histogram h = histogram({4.5}, {1}, 1.0);
  ASSERT_EQ(h.counts.size(), 1u);
  EXPECT_EQ(h.counts[0], 1);
}

TEST(Histogram, ConservesTotalWeight) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0, 100), wu(0.1, 5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + rng() % 300), w(v.size());
    double total = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = u(rng);
      w[i] = wu(rng);
      total += w[i];
    }
    const Histogram h = trial % 2 ? histogram(v, w, 3.7) : histogram(v, w, 0, 13);
    double sum = 0;
    for (double c : h.counts) sum += c;
    EXPECT_NEAR(sum, total, 1e-9 * total);
  }
}

}  // namespace
}  // namespace micrometry
