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

#ifndef SHARDIR_MOE_H_
#define SHARDIR_MOE_H_

#include <cstdint>
#include <optional>
#include <utility>

#include "shardir/graph.h"
#include "shardir/tensor.h"

namespace shardir {

// Mixture-of-experts layer configuration. aux_weight (the auxiliary loss
// multiplier) has no sensible default and must always be given; capacity
// defaults to ceil(2 * group_size / experts) when omitted.
struct MoEConfig {
  MoEConfig(int64_t groups, int64_t group_size, int64_t experts,
            int64_t model_dim, int64_t hidden_dim, double aux_weight,
            std::optional<int64_t> capacity = std::nullopt, uint64_t seed = 0);

  int64_t groups;      // G: independent routing groups
  int64_t group_size;  // S: tokens per group
  int64_t experts;     // E
  int64_t model_dim;   // M
  int64_t hidden_dim;  // H
  double aux_weight;   // multiplier on the auxiliary load-balance loss
  int64_t capacity;    // C: buffer slots per (group, expert)
  uint64_t seed;       // drives the second-expert random dispatch
};

struct GatingOutput {
  TensorValue combine_weights;  // [G, S, E, C]
  TensorValue dispatch_mask;    // [G, S, E, C]; 1 where combine != 0
  float aux_loss = 0.0f;
};

struct ExpertWeights {
  TensorValue wg;  // [M, E] gate projection
  TensorValue wi;  // [E, M, H] expert input layer
  TensorValue wo;  // [E, H, M] expert output layer
};

// Per-token uniform draws in [0, 1) for the second-expert dispatch, keyed by
// (seed, group, position) so results are evaluation-order independent.
TensorValue GatingRandoms(const MoEConfig& config);

// Group-level top-2 token routing with an auxiliary load-balance loss.
// Per group: softmax over experts; every token goes to its top expert if a
// buffer slot is free (the slot counter advances regardless, so overflowed
// tokens still shape the auxiliary loss); the runner-up expert receives the
// token only when its slot counter is below capacity and 2*g2 > rnd. Weights
// are normalized to g1/(g1+g2) and g2/(g1+g2); overflowed assignments get
// weight zero. With force_rnd_one the random draw is pinned to 1.0, which
// makes the result seed-independent.
GatingOutput Top2Gating(const TensorValue& logits, const MoEConfig& config,
                        bool force_rnd_one = false);

// The annotated forward graph: a vectorized gating subgraph (softmax, topk,
// one_hot, exclusive cumsum) followed by the dispatch, expert FFN, and
// combine einsums. Parameters: inputs [G,S,M], wg [M,E], wi [E,M,H],
// wo [E,H,M], rnd [G,S] (feed GatingRandoms(config)). Roots: moe_out [G,S,M]
// and the scalar aux_loss. Annotations tile the group dim on the token side
// and the expert dim on the expert side across num_devices devices
// (default: one device per expert). Run Propagate before partitioning.
Graph BuildMoeGraph(const MoEConfig& config, int64_t num_devices = 0);

// Direct numeric forward pass; matches the graph's routing decisions
// bit-for-bit. Returns the layer output [G,S,M] and the auxiliary loss.
std::pair<TensorValue, float> MoeForwardNumeric(const TensorValue& inputs,
                                                const ExpertWeights& weights,
                                                const MoEConfig& config);

// Flop counts of the four dominant terms, plus each term's per-device share
// when groups and experts are spread over num_devices devices.
struct MoeFlopCounts {
  int64_t softmax = 0;           // gate projection + softmax: G*S*M*E
  int64_t gating = 0;            // per-token routing work: G*S*E*C
  int64_t dispatch_combine = 0;  // dispatch + combine einsums: 2*G*S*M*E*C
  int64_t ffn = 0;               // both expert layers: 2*E*G*C*H*M
  int64_t per_device_softmax = 0;
  int64_t per_device_gating = 0;
  int64_t per_device_dispatch_combine = 0;
  int64_t per_device_ffn = 0;
};

MoeFlopCounts CountFlops(const MoEConfig& config, int64_t num_devices);

}  // namespace shardir

#endif  // SHARDIR_MOE_H_
