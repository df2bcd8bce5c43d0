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

#ifndef SHARDIR_COST_MODEL_H_
#define SHARDIR_COST_MODEL_H_

#include <cstdint>
#include <string>

#include "shardir/moe.h"
#include "shardir/simulator.h"

namespace shardir {

// Scaling-class estimate for one partitioned operator. Units are abstract
// (element counts and bytes over unit link bandwidth); only how the numbers
// grow with the device count is meaningful.
struct CostEstimate {
  double compute_units = 0.0;  // per-partition flops
  double comm_time_units = 0.0;
  std::string dominant_primitive = "none";
};

struct CostModelOptions {
  // Payloads below this many bytes are latency bound: their time stops
  // shrinking with the payload and follows the hop count instead.
  double latency_bound_bytes = 0.0;
};

// Abstract time for one collective over num_devices devices arranged as an
// idealized square torus with unit link bandwidth. kind is the op name:
// all_reduce, all_gather, all_to_all, or collective_permute.
//
// all_to_all moves total data O(D) over O(sqrt(D)) hops across O(D) links,
// so its time is bytes*sqrt(D); all_gather's output is D times its input, so
// bytes*D; all_reduce makes a device-count-independent fixed number of passes
// over the payload; collective_permute is point to point, so just bytes.
double CollectiveCost(const std::string& kind, double bytes_per_device,
                      int64_t num_devices, const DeviceMesh& mesh,
                      const CostModelOptions& options = CostModelOptions());

// Per-partition compute and communication scaling class for an operator
// signature such as "Matmul(AB,BC->AC)" with sharded_letters naming the dims
// split across devices (here e.g. "B"). Supported patterns: identically
// sharded elementwise Add; the four matmul sharding layouts; reduce keeping
// or dropping the sharded dim; the token-dispatch einsum
// "Einsum(GSEC,GSM->EGCM)" sharded on the group and expert dims; and the
// spatially sharded convolution "Convolution(BIXY,xyIO->BOXY)". Letters are
// matched structurally, so any names work. For the mismatched-sharding
// matmuls, prefer_loop selects the rotate-in-a-loop strategy (communication
// via collective_permute) over replicating one operand (all_gather).
CostEstimate OpScalability(const std::string& op_signature,
                           const std::string& sharded_letters,
                           int64_t num_devices, bool prefer_loop = false);

// Per-category costs of one mixture-of-experts layer on num_devices devices.
// Compute categories are per-device flop counts; the communication category
// is all_to_all time for the dispatch and combine reshards.
struct MoeCostBreakdown {
  double ffn_compute = 0.0;                // flat as devices scale
  double gate_einsum_compute = 0.0;        // gate projection + one-hot einsums
  double gating_sequential_compute = 0.0;  // cumsum-style sequential work, O(D)
  double dispatch_combine_comm = 0.0;      // O(sqrt(D)); zero when D == 1
};

MoeCostBreakdown MoeLayerCost(const MoEConfig& config, int64_t num_devices,
                              const DeviceMesh& mesh,
                              const CostModelOptions& options =
                                  CostModelOptions());

}  // namespace shardir

#endif  // SHARDIR_COST_MODEL_H_
