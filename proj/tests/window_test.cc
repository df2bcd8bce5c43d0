/* Copyright 2026 The Shardir Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Windowed-op partitioning: halo exchange planning against a brute-force
// model of which input elements each shard actually reads, plus end-to-end
// equivalence for the dilated convolution lowerings.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>

#include "doctest.h"
#include "shardir/corpus.h"
#include "shardir/graph.h"
#include "shardir/partitioner.h"
#include "shardir/propagation.h"
#include "shardir/verify.h"

namespace shardir {
namespace {

int64_t CeilDiv(int64_t a, int64_t b) { return (a + b - 1) / b; }

int64_t WindowedOutputExtent(int64_t n, const WindowDimConfig& w) {
  int64_t dilated_in = (n - 1) * w.base_dilation + 1;
  int64_t dilated_win = (w.size - 1) * w.window_dilation + 1;
  int64_t padded = dilated_in + w.padding_low + w.padding_high;
  if (padded < dilated_win) return 0;
  return (padded - dilated_win) / w.stride + 1;
}

TEST_CASE("halo plan for a size 3 stride 2 padded window split 4 ways") {
  // Input 12, window 3, stride 2, padding 1+1: output 6, so each of the 4
  // shards owns 2 windows and 3 input elements. Worked by hand:
  //   shard p's first window starts at 4p - 1, spans 5 input elements,
  //   so it lacks 1-p elements on the left and p+1 on the right.
  WindowDimConfig w;
  w.size = 3;
  w.stride = 2;
  w.padding_low = 1;
  w.padding_high = 1;
  REQUIRE(WindowedOutputExtent(12, w) == 6);
  HaloExchangeSpec spec = PlanHaloExchange(12, 6, 4, 0, w);
  CHECK(spec.dim == 0);
  CHECK(spec.base_span == 5);
  for (int64_t p = 0; p < 4; ++p) {
    CAPTURE(p);
    CHECK(spec.base_start.At(p) == 4 * p - 1);
    CHECK(spec.left_halo.At(p) == 1 - p);
    CHECK(spec.right_halo.At(p) == p + 1);
  }
  CHECK(spec.max_left == 1);
  CHECK(spec.max_right == 4);
}

TEST_CASE("single-shard plans need no halo") {
  WindowDimConfig w;
  w.size = 3;
  w.stride = 1;
  w.padding_low = 1;
  w.padding_high = 1;
  HaloExchangeSpec spec = PlanHaloExchange(10, 10, 1, 0, w);
  CHECK(spec.max_left <= 1);   // only padding, never neighbor data
  CHECK(spec.max_right <= 1);
  CHECK(spec.base_start.At(0) == -1);
  CHECK(spec.base_span == 12);
}

TEST_CASE("base dilation limit index matches its closed form") {
  // floor((stride*count*i + size - low_pad + dilation - 1) / dilation).
  CHECK(BaseDilationLimitIndex(1, 2, 1, 3, 1, 2) == 2);
  CHECK(BaseDilationLimitIndex(1, 2, 2, 3, 1, 2) == 3);
  CHECK(BaseDilationLimitIndex(2, 2, 1, 3, 0, 3) == 3);
  CHECK(BaseDilationLimitIndex(1, 1, 0, 1, 0, 1) == 1);
}

TEST_CASE("planned ranges cover every element a shard actually reads") {
  std::mt19937 rng(20260825);
  auto pick = [&](int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(rng() % (hi - lo + 1));
  };
  int checked = 0;
  while (checked < 100) {
    int64_t n = pick(4, 20);
    WindowDimConfig w;
    w.size = pick(1, 5);
    w.stride = pick(1, 3);
    w.padding_low = pick(0, w.size);
    w.padding_high = pick(0, w.size);
    w.base_dilation = pick(1, 3);
    w.window_dilation = pick(1, 3);
    int64_t parts = pick(2, 6);
    int64_t out = WindowedOutputExtent(n, w);
    if (out <= 0) continue;
    ++checked;
    CAPTURE(n);
    CAPTURE(w.size);
    CAPTURE(w.stride);
    CAPTURE(w.padding_low);
    CAPTURE(w.padding_high);
    CAPTURE(w.base_dilation);
    CAPTURE(w.window_dilation);
    CAPTURE(parts);
    HaloExchangeSpec spec = PlanHaloExchange(n, out, parts, 0, w);
    int64_t oc = CeilDiv(out, parts);
    int64_t dilated_extent = (n - 1) * w.base_dilation + 1;
    for (int64_t p = 0; p < parts; ++p) {
      CAPTURE(p);
      // Brute force: which base elements do shard p's real windows touch?
      int64_t lo = -1, hi = -1;
      for (int64_t o = p * oc; o < std::min((p + 1) * oc, out); ++o) {
        for (int64_t k = 0; k < w.size; ++k) {
          int64_t coord = o * w.stride - w.padding_low + k * w.window_dilation;
          if (coord < 0 || coord >= dilated_extent) continue;
          if (coord % w.base_dilation != 0) continue;
          int64_t b = coord / w.base_dilation;
          if (lo < 0) lo = b;
          lo = std::min(lo, b);
          hi = std::max(hi, b);
        }
      }
      if (lo < 0) continue;  // this shard reads only padding
      CHECK(spec.base_start.At(p) <= lo);
      CHECK(spec.base_start.At(p) + spec.base_span >= hi + 1);
    }
  }
}

TEST_CASE("convolution lowerings are exact for every dilation layout") {
  for (const char* name :
       {"conv_halo", "conv_base_dilation_1", "conv_base_dilation_2",
        "conv_base_dilation_3", "conv_window_dilation"}) {
    CAPTURE(name);
    CorpusEntry e = BuildCorpusEntry(name, 4);
    VerifyResult r = VerifyPartitioning(e.graph, 4, 101, e.options);
    CHECK(r.max_rel_error <= 1e-5);
    // Halo exchange moves neighbor slices point to point; nothing here
    // needs a gather or reduction.
    int64_t cp = r.collective_counts.count("collective_permute")
                     ? r.collective_counts.at("collective_permute")
                     : 0;
    int64_t total = 0;
    for (const auto& [op, c] : r.collective_counts) total += c;
    CHECK(cp >= 1);
    CHECK(total == cp);
  }
}

TEST_CASE("a padded strided convolution reassembles exactly") {
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{12}});
  int64_t k = AddParameter(g, "k", Shape{{3}});
  g.node(x).sharding = Sharding::SplitDim(1, 0, 4);
  g.node(k).sharding = Sharding::Replicated();
  WindowDimConfig w;
  w.size = 3;
  w.stride = 2;
  w.padding_low = 1;
  w.padding_high = 1;
  int64_t c = AddConvolution(g, x, k, {w});
  g.node(c).name = "out";
  VerifyResult r = VerifyPartitioning(g, 4, 103);
  CHECK(r.max_rel_error == 0.0);
  CHECK(r.collective_counts.at("collective_permute") >= 1);
}

TEST_CASE("kernels sharded on a window-dilated dim are rejected") {
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{16}});
  int64_t k = AddParameter(g, "k", Shape{{4}});
  g.node(x).sharding = Sharding::Replicated();
  g.node(k).sharding = Sharding::SplitDim(1, 0, 4);
  WindowDimConfig w;
  w.size = 4;
  w.window_dilation = 2;
  int64_t c = AddConvolution(g, x, k, {w});
  g.node(c).name = "out";
  Propagate(g, 4);
  CHECK_THROWS_AS(PartitionGraph(g, 4), UnsupportedWindowConfig);
}

}  // namespace
}  // namespace shardir
