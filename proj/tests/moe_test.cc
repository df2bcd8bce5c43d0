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

// Mixture-of-experts layer: routing invariants of the top-2 gate, the
// auxiliary load-balance loss against an independent recompute, and the
// three-way equivalence of the numeric, graph, and partitioned forward pass.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include "doctest.h"
#include "shardir/common.h"
#include "shardir/interpreter.h"
#include "shardir/moe.h"
#include "shardir/propagation.h"
#include "shardir/verify.h"

namespace shardir {
namespace {

TensorValue Logits(int64_t groups, int64_t group_size, int64_t experts,
                   std::vector<float> rows) {
  TensorValue t(Shape{{groups, group_size, experts}});
  REQUIRE(rows.size() == t.data.size());
  t.data = std::move(rows);
  return t;
}

// The loss the gate is defined to produce: per group, softmax the logits,
// count each token toward its argmax expert (ties to the lower index,
// capacity ignored), and average (count fraction) * (mean gate) over experts.
double RecomputeAux(const TensorValue& logits, int64_t experts) {
  int64_t groups = logits.shape.dims[0];
  int64_t group_size = logits.shape.dims[1];
  double aux = 0.0;
  for (int64_t g = 0; g < groups; ++g) {
    std::vector<double> mean(experts, 0.0);
    std::vector<int64_t> counts(experts, 0);
    for (int64_t s = 0; s < group_size; ++s) {
      const float* row = &logits.data[(g * group_size + s) * experts];
      float max_v = row[0];
      for (int64_t e = 1; e < experts; ++e) max_v = std::max(max_v, row[e]);
      std::vector<float> gate(experts);
      float denom = 0.0f;
      for (int64_t e = 0; e < experts; ++e) {
        gate[e] = std::exp(row[e] - max_v);
        denom += gate[e];
      }
      int64_t best = 0;
      for (int64_t e = 0; e < experts; ++e) {
        gate[e] /= denom;
        mean[e] += gate[e];
        if (gate[e] > gate[best]) best = e;
      }
      ++counts[best];
    }
    double term = 0.0;
    for (int64_t e = 0; e < experts; ++e) {
      term += (static_cast<double>(counts[e]) / group_size) *
              (mean[e] / group_size);
    }
    aux += term / experts;
  }
  return aux / groups;
}

TEST_CASE("a full expert drops later tokens but still counts their demand") {
  MoEConfig config(1, 3, 2, 4, 8, 0.01, /*capacity=*/1);
  TensorValue logits =
      Logits(1, 3, 2, {10, -10, 10, -10, 10, -10});
  GatingOutput out = Top2Gating(logits, config, /*force_rnd_one=*/true);
  // All three tokens pick expert 0; only token 0 fits its single slot.
  // [S=3, E=2, C=1] layout.
  CHECK(out.combine_weights.data[0] == doctest::Approx(1.0).epsilon(1e-6));
  for (int64_t s = 1; s < 3; ++s) {
    for (int64_t ec = 0; ec < 2; ++ec) {
      CHECK(out.combine_weights.data[s * 2 + ec] == 0.0f);
      CHECK(out.dispatch_mask.data[s * 2 + ec] == 0.0f);
    }
  }
  // Demand was 3 tokens for expert 0: counts/S = 1, mean gate ~= 1.
  CHECK(out.aux_loss == doctest::Approx(0.5).epsilon(1e-5));
}

TEST_CASE("a single expert takes every token at weight one") {
  MoEConfig config(1, 2, 1, 4, 8, 0.01, /*capacity=*/2);
  TensorValue logits = Logits(1, 2, 1, {0.3f, -0.7f});
  GatingOutput out = Top2Gating(logits, config, true);
  // [S=2, E=1, C=2]: token s lands in slot s.
  CHECK(out.combine_weights.data == std::vector<float>{1, 0, 0, 1});
  CHECK(out.dispatch_mask.data == std::vector<float>{1, 0, 0, 1});
  CHECK(out.aux_loss == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("routing everything to one of two experts costs 1/E") {
  MoEConfig config(2, 4, 2, 4, 8, 0.01, /*capacity=*/4);
  std::vector<float> rows;
  for (int i = 0; i < 8; ++i) {
    rows.push_back(40.0f);
    rows.push_back(-40.0f);
  }
  GatingOutput out = Top2Gating(Logits(2, 4, 2, std::move(rows)), config, true);
  CHECK(out.aux_loss == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("tied logits break toward the lower expert at weight one half") {
  MoEConfig config(1, 1, 2, 4, 8, 0.01, /*capacity=*/1);
  GatingOutput out = Top2Gating(Logits(1, 1, 2, {0, 0}), config, true);
  // g1 = g2 = 0.5; with the draw pinned to 1.0, 2*g2 > rnd fails, so only
  // expert 0 receives the token, at the normalized weight g1/(g1+g2).
  CHECK(out.combine_weights.data == std::vector<float>{0.5f, 0.0f});
  CHECK(out.dispatch_mask.data == std::vector<float>{1.0f, 0.0f});
}

TEST_CASE("gating is invariant to a constant logit shift") {
  MoEConfig config(2, 5, 3, 4, 8, 0.01, 4, /*seed=*/3);
  TensorValue a = SeededInput(Shape{{2, 5, 3}}, "l", 5);
  TensorValue b = a;
  for (float& v : b.data) v += 5.0f;
  GatingOutput ga = Top2Gating(a, config, true);
  GatingOutput gb = Top2Gating(b, config, true);
  CHECK(ga.dispatch_mask.data == gb.dispatch_mask.data);
  for (size_t i = 0; i < ga.combine_weights.data.size(); ++i) {
    CHECK(ga.combine_weights.data[i] ==
          doctest::Approx(gb.combine_weights.data[i]).epsilon(1e-6));
  }
}

TEST_CASE("pinning the random draw makes gating seed independent") {
  TensorValue logits = SeededInput(Shape{{2, 6, 4}}, "l", 21);
  MoEConfig c1(2, 6, 4, 4, 8, 0.01, 3, /*seed=*/1);
  MoEConfig c2(2, 6, 4, 4, 8, 0.01, 3, /*seed=*/999);
  GatingOutput a = Top2Gating(logits, c1, true);
  GatingOutput b = Top2Gating(logits, c2, true);
  CHECK(a.combine_weights.data == b.combine_weights.data);
  CHECK(a.dispatch_mask.data == b.dispatch_mask.data);
  CHECK(a.aux_loss == b.aux_loss);
}

TEST_CASE("gating randoms are deterministic uniform draws") {
  MoEConfig config(3, 5, 2, 4, 8, 0.01, 3, /*seed=*/42);
  TensorValue a = GatingRandoms(config);
  TensorValue b = GatingRandoms(config);
  CHECK(a.shape.dims == std::vector<int64_t>{3, 5});
  CHECK(a.data == b.data);
  for (float v : a.data) {
    CHECK(v >= 0.0f);
    CHECK(v < 1.0f);
  }
  MoEConfig other(3, 5, 2, 4, 8, 0.01, 3, /*seed=*/43);
  CHECK(GatingRandoms(other).data != a.data);
}

TEST_CASE("capacity must be positive") {
  MoEConfig config(1, 2, 2, 4, 8, 0.01, /*capacity=*/0);
  TensorValue logits = Logits(1, 2, 2, {1, 0, 0, 1});
  CHECK_THROWS_AS(Top2Gating(logits, config, true), CapacityNonPositive);
}

TEST_CASE("capacity defaults to twice the per-expert token share") {
  MoEConfig config(1, 6, 4, 2, 2, 0.0);
  CHECK(config.capacity == 3);  // ceil(2*6/4)
  CHECK(MoEConfig(1, 8, 2, 2, 2, 0.0).capacity == 8);
}

TEST_CASE("routing invariants hold over randomized configurations") {
  std::mt19937 rng(912);
  auto pick = [&](int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(rng() % (hi - lo + 1));
  };
  for (int iter = 0; iter < 200; ++iter) {
    int64_t G = pick(1, 3);
    int64_t S = pick(2, 8);
    int64_t E = pick(2, 6);
    int64_t C = pick(1, (2 * S + E - 1) / E);
    MoEConfig config(G, S, E, 4, 8, 0.01, C, /*seed=*/iter);
    TensorValue logits =
        SeededInput(Shape{{G, S, E}}, "logits", 1000 + iter);
    bool pin = (iter % 2) == 0;
    GatingOutput out = Top2Gating(logits, config, pin);
    CAPTURE(iter);
    CAPTURE(G);
    CAPTURE(S);
    CAPTURE(E);
    CAPTURE(C);

    auto at = [&](const TensorValue& t, int64_t g, int64_t s, int64_t e,
                  int64_t c) {
      return t.data[((g * S + s) * E + e) * C + c];
    };
    for (int64_t g = 0; g < G; ++g) {
      // One token per buffer cell.
      for (int64_t e = 0; e < E; ++e) {
        int64_t used = 0;
        for (int64_t c = 0; c < C; ++c) {
          int64_t owners = 0;
          for (int64_t s = 0; s < S; ++s) {
            owners += at(out.dispatch_mask, g, s, e, c) != 0.0f;
          }
          CHECK(owners <= 1);
          used += owners;
        }
        CHECK(used <= C);
      }
      for (int64_t s = 0; s < S; ++s) {
        int64_t experts_hit = 0;
        double weight_sum = 0.0;
        for (int64_t e = 0; e < E; ++e) {
          int64_t cells = 0;
          for (int64_t c = 0; c < C; ++c) {
            float m = at(out.dispatch_mask, g, s, e, c);
            float w = at(out.combine_weights, g, s, e, c);
            CHECK((m == 0.0f || m == 1.0f));
            // Mask and weights agree: a cell is dispatched exactly when it
            // carries weight.
            CHECK((m == 1.0f) == (w > 0.0f));
            CHECK(w >= 0.0f);
            CHECK(w <= 1.0f);
            cells += m != 0.0f;
            weight_sum += w;
          }
          CHECK(cells <= 1);  // at most one slot per (token, expert)
          experts_hit += cells;
        }
        CHECK(experts_hit <= 2);
        CHECK(weight_sum <= 1.0 + 1e-6);
        if (experts_hit == 2) {
          CHECK(weight_sum == doctest::Approx(1.0).epsilon(1e-6));
        }
      }
    }
    CHECK(std::abs(out.aux_loss - RecomputeAux(logits, E)) <= 1e-6);
  }
}

TEST_CASE("numeric, graph, and partitioned forward passes agree bit for bit") {
  MoEConfig config(4, 8, 4, 6, 12, 0.01, 4, /*seed=*/9);
  Graph graph = BuildMoeGraph(config, /*num_devices=*/4);

  std::map<std::string, TensorValue> inputs;
  inputs["inputs"] = SeededInput(Shape{{4, 8, 6}}, "inputs", 2024);
  inputs["wg"] = SeededInput(Shape{{6, 4}}, "wg", 2025);
  inputs["wi"] = SeededInput(Shape{{4, 6, 12}}, "wi", 2026);
  inputs["wo"] = SeededInput(Shape{{4, 12, 6}}, "wo", 2027);
  inputs["rnd"] = GatingRandoms(config);

  auto [numeric_out, numeric_aux] = MoeForwardNumeric(
      inputs.at("inputs"),
      ExpertWeights{inputs.at("wg"), inputs.at("wi"), inputs.at("wo")},
      config);

  std::map<std::string, TensorValue> evaluated = Evaluate(graph, inputs);
  CHECK(evaluated.at("moe_out").data == numeric_out.data);
  CHECK(evaluated.at("aux_loss").data[0] == numeric_aux);

  VerifyResult r = VerifyPartitioningWithInputs(graph, 4, inputs);
  CHECK(r.max_rel_error == 0.0);
  // Dispatch and combine each cross the group/expert boundary once; the
  // auxiliary loss needs one reduction.
  CHECK(r.collective_counts.at("all_to_all") == 2);
  CHECK(r.collective_counts.at("all_reduce") == 1);
}

TEST_CASE("flop counts follow the closed forms and split evenly") {
  MoEConfig config(4, 32, 4, 8, 16, 0.01, 16);
  MoeFlopCounts f = CountFlops(config, 4);
  CHECK(f.softmax == 4 * 32 * 8 * 4);
  CHECK(f.gating == 4 * 32 * 4 * 16);
  CHECK(f.dispatch_combine == 2LL * 4 * 32 * 8 * 4 * 16);
  CHECK(f.ffn == 2LL * 4 * 4 * 16 * 16 * 8);
  CHECK(f.per_device_softmax == f.softmax / 4);
  CHECK(f.per_device_gating == f.gating / 4);
  CHECK(f.per_device_dispatch_combine == f.dispatch_combine / 4);
  CHECK(f.per_device_ffn == f.ffn / 4);
}

}  // namespace
}  // namespace shardir
