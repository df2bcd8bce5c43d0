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

#include "shardir/moe.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "shardir/common.h"
#include "shardir/rng.h"
#include "shardir/shape.h"
#include "shardir/sharding.h"

namespace shardir {

MoEConfig::MoEConfig(int64_t groups, int64_t group_size, int64_t experts,
                     int64_t model_dim, int64_t hidden_dim, double aux_weight,
                     std::optional<int64_t> capacity, uint64_t seed)
    : groups(groups),
      group_size(group_size),
      experts(experts),
      model_dim(model_dim),
      hidden_dim(hidden_dim),
      aux_weight(aux_weight),
      capacity(capacity.has_value() ? *capacity
                                    : CeilDiv(2 * group_size, experts)),
      seed(seed) {}

TensorValue GatingRandoms(const MoEConfig& config) {
  TensorValue rnd(Shape{{config.groups, config.group_size}});
  for (int64_t g = 0; g < config.groups; ++g) {
    for (int64_t s = 0; s < config.group_size; ++s) {
      rnd.data[g * config.group_size + s] =
          static_cast<float>(UniformDouble(config.seed, static_cast<uint64_t>(g),
                                           static_cast<uint64_t>(s)));
    }
  }
  return rnd;
}

GatingOutput Top2Gating(const TensorValue& logits, const MoEConfig& config,
                        bool force_rnd_one) {
  const int64_t G = config.groups;
  const int64_t S = config.group_size;
  const int64_t E = config.experts;
  const int64_t C = config.capacity;
  if (C < 1) {
    throw CapacityNonPositive("expert capacity must be at least 1, got " +
                              std::to_string(C));
  }
  const Shape want{{G, S, E}};
  if (logits.shape.dims != want.dims) {
    throw ShapeMismatch("gating logits must have shape " + want.ToString() +
                        ", got " + logits.shape.ToString());
  }

  GatingOutput out;
  out.combine_weights = TensorValue(Shape{{G, S, E, C}});
  out.dispatch_mask = TensorValue(Shape{{G, S, E, C}});

  // Scale factors mirror the graph's multiply-by-reciprocal constants so the
  // two paths round identically.
  const float inv_s = 1.0f / static_cast<float>(S);
  const float inv_e = 1.0f / static_cast<float>(E);
  const float inv_g = 1.0f / static_cast<float>(G);
  float aux_acc = 0.0f;

  std::vector<float> gates(S * E);
  std::vector<float> mean_gate(E);
  std::vector<int64_t> counts(E);
  std::vector<int64_t> second_expert(S);
  std::vector<float> second_gate(S);
  std::vector<float> second_weight(S);

  auto combine_at = [&](int64_t g, int64_t s, int64_t e, int64_t c) -> float& {
    return out.combine_weights.data[((g * S + s) * E + e) * C + c];
  };

  for (int64_t g = 0; g < G; ++g) {
    const float* group_logits = &logits.data[g * S * E];
    // Softmax over experts, float-for-float the interpreter's ordering.
    for (int64_t s = 0; s < S; ++s) {
      const float* in = group_logits + s * E;
      float* row = &gates[s * E];
      float max_v = -std::numeric_limits<float>::infinity();
      for (int64_t e = 0; e < E; ++e) max_v = std::max(max_v, in[e]);
      float denom = 0.0f;
      for (int64_t e = 0; e < E; ++e) {
        float ex = std::exp(in[e] - max_v);
        row[e] = ex;
        denom += ex;
      }
      for (int64_t e = 0; e < E; ++e) row[e] /= denom;
    }

    // Mean gate per expert: sum tokens in order, then scale.
    std::fill(mean_gate.begin(), mean_gate.end(), 0.0f);
    for (int64_t s = 0; s < S; ++s) {
      for (int64_t e = 0; e < E; ++e) mean_gate[e] += gates[s * E + e];
    }
    for (int64_t e = 0; e < E; ++e) mean_gate[e] *= inv_s;

    // First pass: assign each token to its top expert. The slot counter
    // advances even past capacity so the auxiliary loss sees true demand;
    // overflowed tokens simply keep weight zero.
    std::fill(counts.begin(), counts.end(), 0);
    for (int64_t s = 0; s < S; ++s) {
      const float* row = &gates[s * E];
      int64_t e1 = 0;
      for (int64_t e = 1; e < E; ++e) {
        if (row[e] > row[e1]) e1 = e;
      }
      int64_t e2 = -1;
      float g2 = 0.0f;
      for (int64_t e = 0; e < E; ++e) {
        if (e == e1) continue;
        if (e2 < 0 || row[e] > g2) {
          e2 = e;
          g2 = row[e];
        }
      }
      float g1 = row[e1];
      float denom = g1 + g2;  // E == 1 leaves g2 = 0 and the ratio at 1.
      second_expert[s] = e2;
      second_gate[s] = g2;
      second_weight[s] = g2 / denom;
      if (counts[e1] < C) combine_at(g, s, e1, counts[e1]) = g1 / denom;
      ++counts[e1];
    }

    // Auxiliary loss from the uncapped first-pass counts.
    float group_aux = 0.0f;
    for (int64_t e = 0; e < E; ++e) {
      group_aux += (static_cast<float>(counts[e]) * inv_s) * mean_gate[e];
    }
    aux_acc += group_aux * inv_e;

    // Second pass: the runner-up expert takes the token when it still has a
    // free slot and 2*g2 beats the token's uniform draw.
    if (E > 1) {
      for (int64_t s = 0; s < S; ++s) {
        float rnd = force_rnd_one
                        ? 1.0f
                        : static_cast<float>(
                              UniformDouble(config.seed, static_cast<uint64_t>(g),
                                            static_cast<uint64_t>(s)));
        int64_t e2 = second_expert[s];
        if (counts[e2] < C && 2.0f * second_gate[s] > rnd) {
          combine_at(g, s, e2, counts[e2]) = second_weight[s];
          ++counts[e2];
        }
      }
    }
  }
  out.aux_loss = aux_acc * inv_g;

  for (size_t i = 0; i < out.combine_weights.data.size(); ++i) {
    out.dispatch_mask.data[i] = out.combine_weights.data[i] != 0.0f ? 1.0f : 0.0f;
  }
  return out;
}

namespace {

// x * factor via a broadcast scalar constant, shaped like x.
int64_t Scale(Graph& graph, int64_t x, float factor) {
  int64_t c = AddScalarConstant(graph, factor);
  int64_t b = AddBroadcast(graph, graph.node(x).out_shapes[0], c);
  return AddElementwise(graph, ElementwiseKind::kMul, {x, b});
}

}  // namespace

Graph BuildMoeGraph(const MoEConfig& config, int64_t num_devices) {
  const int64_t G = config.groups;
  const int64_t S = config.group_size;
  const int64_t E = config.experts;
  const int64_t M = config.model_dim;
  const int64_t H = config.hidden_dim;
  const int64_t C = config.capacity;
  if (C < 1) {
    throw CapacityNonPositive("expert capacity must be at least 1, got " +
                              std::to_string(C));
  }
  const int64_t devices = num_devices > 0 ? num_devices : E;

  Graph graph;
  auto split0 = [&](int64_t rank) {
    return Sharding::SplitDim(rank, 0, devices);
  };

  int64_t inputs = AddParameter(graph, "inputs", Shape{{G, S, M}});
  graph.node(inputs).sharding = split0(3);
  int64_t wg = AddParameter(graph, "wg", Shape{{M, E}});
  graph.node(wg).sharding = Sharding::Replicated();
  int64_t wi = AddParameter(graph, "wi", Shape{{E, M, H}});
  graph.node(wi).sharding = Sharding::Replicated();
  int64_t wo = AddParameter(graph, "wo", Shape{{E, H, M}});
  graph.node(wo).sharding = Sharding::Replicated();
  int64_t rnd = AddParameter(graph, "rnd", Shape{{G, S}});
  graph.node(rnd).sharding = split0(2);

  int64_t logits = AddEinsum(graph, "GSM,ME->GSE", inputs, wg);
  int64_t gates = AddSoftmax(graph, 2, logits);
  graph.node(gates).sharding = split0(3);

  // Top expert per token as a one-hot mask, and its gate value.
  int64_t top1 = AddTopK(graph, 1, 2, gates);
  int64_t idx1 = AddReshape(graph, Shape{{G, S}}, AddGetOutput(graph, top1, 1));
  int64_t mask1 = AddOneHot(graph, E, 2, idx1);                      // [G,S,E]
  int64_t gate1 = AddReduce(graph, ReduceKind::kMax, {2}, gates);    // [G,S]

  // Runner-up: zero the winner's lane and take the max again.
  int64_t ones_gse =
      AddBroadcast(graph, Shape{{G, S, E}}, AddScalarConstant(graph, 1.0f));
  int64_t not1 = AddElementwise(graph, ElementwiseKind::kSub, {ones_gse, mask1});
  int64_t gates2 = AddElementwise(graph, ElementwiseKind::kMul, {gates, not1});
  int64_t top2 = AddTopK(graph, 1, 2, gates2);
  int64_t idx2 = AddReshape(graph, Shape{{G, S}}, AddGetOutput(graph, top2, 1));
  int64_t mask2 = AddOneHot(graph, E, 2, idx2);
  int64_t gate2 = AddReduce(graph, ReduceKind::kMax, {2}, gates2);   // [G,S]

  int64_t denom = AddElementwise(graph, ElementwiseKind::kAdd, {gate1, gate2});
  int64_t w1 = AddElementwise(graph, ElementwiseKind::kDiv, {gate1, denom});
  int64_t w2 = AddElementwise(graph, ElementwiseKind::kDiv, {gate2, denom});

  // Buffer positions come from exclusive cumulative sums of the selection
  // masks along the token dim; one_hot past capacity yields a zero row, which
  // is exactly the overflow rule.
  int64_t pos1 = AddCumsum(graph, 1, true, mask1);                    // [G,S,E]
  int64_t pos1_own = AddEinsum(graph, "GSE,GSE->GS", mask1, pos1);
  int64_t slot1 = AddOneHot(graph, C, 2, pos1_own);                   // [G,S,C]
  int64_t w1_lane = AddEinsum(graph, "GS,GSE->GSE", w1, mask1);
  int64_t term1 = AddEinsum(graph, "GSE,GSC->GSEC", w1_lane, slot1);

  // Second-expert dispatch is gated by 2*g2 > rnd; tokens that fail keep a
  // zero mask and therefore a zero combine weight.
  int64_t two_b =
      AddBroadcast(graph, Shape{{G, S}}, AddScalarConstant(graph, 2.0f));
  int64_t two_g2 = AddElementwise(graph, ElementwiseKind::kMul, {gate2, two_b});
  int64_t pass = AddCompare(graph, CompareKind::kGt, two_g2, rnd);    // [G,S]
  int64_t mask2_kept = AddEinsum(graph, "GS,GSE->GSE", pass, mask2);
  int64_t count1 = AddReduce(graph, ReduceKind::kAdd, {1}, mask1);    // [G,E]
  int64_t ones_gs =
      AddBroadcast(graph, Shape{{G, S}}, AddScalarConstant(graph, 1.0f));
  int64_t base2 = AddEinsum(graph, "GE,GS->GSE", count1, ones_gs);
  int64_t steps2 = AddCumsum(graph, 1, true, mask2_kept);
  int64_t pos2 = AddElementwise(graph, ElementwiseKind::kAdd, {base2, steps2});
  int64_t pos2_own = AddEinsum(graph, "GSE,GSE->GS", mask2_kept, pos2);
  int64_t slot2 = AddOneHot(graph, C, 2, pos2_own);
  int64_t w2_lane = AddEinsum(graph, "GS,GSE->GSE", w2, mask2_kept);
  int64_t term2 = AddEinsum(graph, "GSE,GSC->GSEC", w2_lane, slot2);

  int64_t combine = AddElementwise(graph, ElementwiseKind::kAdd, {term1, term2});
  graph.node(combine).sharding = split0(4);
  int64_t zero_gsec =
      AddBroadcast(graph, Shape{{G, S, E, C}}, AddScalarConstant(graph, 0.0f));
  int64_t dispatch = AddCompare(graph, CompareKind::kNe, combine, zero_gsec);

  // Dispatch to expert-major layout, run the two-layer FFN with the expert
  // dim sharded, then return to group-major and combine.
  int64_t dispatched = AddEinsum(graph, "GSEC,GSM->EGCM", dispatch, inputs);
  graph.node(dispatched).sharding = Sharding::SplitDim(4, 0, devices);
  int64_t h_pre = AddEinsum(graph, "EGCM,EMH->EGCH", dispatched, wi);
  int64_t h = AddElementwise(graph, ElementwiseKind::kRelu, {h_pre});
  graph.node(h).sharding = Sharding::SplitDim(4, 0, devices);
  int64_t expert_out = AddEinsum(graph, "EGCH,EHM->GECM", h, wo);
  graph.node(expert_out).sharding = split0(4);
  int64_t moe_out = AddEinsum(graph, "GSEC,GECM->GSM", combine, expert_out);
  graph.node(moe_out).sharding = split0(3);
  graph.node(moe_out).name = "moe_out";

  // Auxiliary load-balance loss: mean over groups of
  // (1/E) * sum_e (count_e/S) * mean_gate_e, using uncapped counts.
  const float inv_s = 1.0f / static_cast<float>(S);
  int64_t me = Scale(graph, AddReduce(graph, ReduceKind::kAdd, {1}, gates),
                     inv_s);                                          // [G,E]
  int64_t cf = Scale(graph, count1, inv_s);
  int64_t prod = AddElementwise(graph, ElementwiseKind::kMul, {cf, me});
  int64_t per_group = Scale(graph, AddReduce(graph, ReduceKind::kAdd, {1}, prod),
                            1.0f / static_cast<float>(E));            // [G]
  int64_t aux = Scale(graph, AddReduce(graph, ReduceKind::kAdd, {0}, per_group),
                      1.0f / static_cast<float>(G));
  graph.node(aux).name = "aux_loss";
  return graph;
}

std::pair<TensorValue, float> MoeForwardNumeric(const TensorValue& inputs,
                                                const ExpertWeights& weights,
                                                const MoEConfig& config) {
  const int64_t G = config.groups;
  const int64_t S = config.group_size;
  const int64_t E = config.experts;
  const int64_t M = config.model_dim;
  const int64_t H = config.hidden_dim;
  const int64_t C = config.capacity;

  auto check = [](const TensorValue& t, const Shape& want, const char* what) {
    if (t.shape.dims != want.dims) {
      throw ShapeMismatch(std::string(what) + " must have shape " +
                          want.ToString() + ", got " + t.shape.ToString());
    }
  };
  check(inputs, Shape{{G, S, M}}, "inputs");
  check(weights.wg, Shape{{M, E}}, "wg");
  check(weights.wi, Shape{{E, M, H}}, "wi");
  check(weights.wo, Shape{{E, H, M}}, "wo");

  // Gate logits, accumulated in the reference einsum's order (m ascending).
  TensorValue logits(Shape{{G, S, E}});
  for (int64_t g = 0; g < G; ++g) {
    for (int64_t s = 0; s < S; ++s) {
      for (int64_t e = 0; e < E; ++e) {
        float acc = 0.0f;
        for (int64_t m = 0; m < M; ++m) {
          acc += inputs.data[(g * S + s) * M + m] * weights.wg.data[m * E + e];
        }
        logits.data[(g * S + s) * E + e] = acc;
      }
    }
  }

  GatingOutput gating = Top2Gating(logits, config);
  const TensorValue& dispatch = gating.dispatch_mask;

  // dispatched[e,g,c,m] = sum_s dispatch[g,s,e,c] * inputs[g,s,m]
  TensorValue buf(Shape{{E, G, C, M}});
  for (int64_t e = 0; e < E; ++e) {
    for (int64_t g = 0; g < G; ++g) {
      for (int64_t c = 0; c < C; ++c) {
        for (int64_t m = 0; m < M; ++m) {
          float acc = 0.0f;
          for (int64_t s = 0; s < S; ++s) {
            acc += dispatch.data[((g * S + s) * E + e) * C + c] *
                   inputs.data[(g * S + s) * M + m];
          }
          buf.data[((e * G + g) * C + c) * M + m] = acc;
        }
      }
    }
  }

  // hidden[e,g,c,h] = relu(sum_m dispatched * wi[e,m,h])
  TensorValue hidden(Shape{{E, G, C, H}});
  for (int64_t e = 0; e < E; ++e) {
    for (int64_t g = 0; g < G; ++g) {
      for (int64_t c = 0; c < C; ++c) {
        for (int64_t h = 0; h < H; ++h) {
          float acc = 0.0f;
          for (int64_t m = 0; m < M; ++m) {
            acc += buf.data[((e * G + g) * C + c) * M + m] *
                   weights.wi.data[(e * M + m) * H + h];
          }
          hidden.data[((e * G + g) * C + c) * H + h] = std::max(0.0f, acc);
        }
      }
    }
  }

  // expert_out[g,e,c,m] = sum_h hidden * wo[e,h,m]
  TensorValue expert_out(Shape{{G, E, C, M}});
  for (int64_t g = 0; g < G; ++g) {
    for (int64_t e = 0; e < E; ++e) {
      for (int64_t c = 0; c < C; ++c) {
        for (int64_t m = 0; m < M; ++m) {
          float acc = 0.0f;
          for (int64_t h = 0; h < H; ++h) {
            acc += hidden.data[((e * G + g) * C + c) * H + h] *
                   weights.wo.data[(e * H + h) * M + m];
          }
          expert_out.data[((g * E + e) * C + c) * M + m] = acc;
        }
      }
    }
  }

  // out[g,s,m] = sum_e sum_c combine[g,s,e,c] * expert_out[g,e,c,m]
  TensorValue out(Shape{{G, S, M}});
  for (int64_t g = 0; g < G; ++g) {
    for (int64_t s = 0; s < S; ++s) {
      for (int64_t m = 0; m < M; ++m) {
        float acc = 0.0f;
        for (int64_t e = 0; e < E; ++e) {
          for (int64_t c = 0; c < C; ++c) {
            acc += gating.combine_weights.data[((g * S + s) * E + e) * C + c] *
                   expert_out.data[((g * E + e) * C + c) * M + m];
          }
        }
        out.data[(g * S + s) * M + m] = acc;
      }
    }
  }
  return {std::move(out), gating.aux_loss};
}

MoeFlopCounts CountFlops(const MoEConfig& config, int64_t num_devices) {
  const int64_t d = std::max<int64_t>(1, num_devices);
  const int64_t G = config.groups;
  const int64_t S = config.group_size;
  const int64_t E = config.experts;
  const int64_t M = config.model_dim;
  const int64_t H = config.hidden_dim;
  const int64_t C = config.capacity;

  MoeFlopCounts counts;
  counts.softmax = G * S * M * E;
  counts.gating = G * S * E * C;
  counts.dispatch_combine = 2 * G * S * M * E * C;
  counts.ffn = 2 * E * G * C * H * M;
  counts.per_device_softmax = counts.softmax / d;
  counts.per_device_gating = counts.gating / d;
  counts.per_device_dispatch_combine = counts.dispatch_combine / d;
  counts.per_device_ffn = counts.ffn / d;
  return counts;
}

}  // namespace shardir
