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

#ifndef SHARDIR_PARTITIONER_H_
#define SHARDIR_PARTITIONER_H_

#include <cstdint>

#include "shardir/graph.h"
#include "shardir/spmd.h"

namespace shardir {

struct PartitionOptions {
  // Einsum strategy threshold: when both operands are partitioned on distinct
  // non-contracting dims, an operand whose full tensor fits in this budget is
  // AllGathered; larger operands go through the rotating sharded loop, which
  // never materializes a full tensor.
  int64_t memory_budget_bytes = 64ll * 1024 * 1024;
};

// f(p) = floor((mul*p + add) / div), div >= 1, with true floor for negative
// numerators. div == 1 is the plain affine case a*p + b.
struct RationalAffine {
  int64_t mul = 0;
  int64_t add = 0;
  int64_t div = 1;

  int64_t At(int64_t p) const;
};

// Per-partition data requirements for one windowed dim that is split into
// `parts` equal (ceil-divided) shards. base_start/base_span describe the
// input range each partition must hold before running its local window op;
// left/right halo are the element counts needed beyond the owned shard
// (negative values mean the shard over-covers; clamp at 0 when sizing
// transfers). max_left/max_right bound the clamped values over all
// partitions.
struct HaloExchangeSpec {
  int64_t dim = 0;
  RationalAffine base_start;
  int64_t base_span = 0;
  RationalAffine left_halo;
  RationalAffine right_halo;
  int64_t max_left = 0;
  int64_t max_right = 0;
};

// Plans the halo exchange for one dim of a windowed op: `input_extent` and
// `output_extent` are the full (unpartitioned) extents, `parts` the number of
// shards. Handles base dilation conservatively: the planned range always
// covers the exact requirement.
HaloExchangeSpec PlanHaloExchange(int64_t input_extent, int64_t output_extent,
                                  int64_t parts, int64_t dim,
                                  const WindowDimConfig& w);

// Limit (one past last) of the base elements required by shard `i` (1-based)
// of a base-dilated windowed dim:
// floor((stride*per_shard_window_count*i + window_size - low_pad + dilation
//        - 1) / dilation).
int64_t BaseDilationLimitIndex(int64_t stride, int64_t per_shard_window_count,
                               int64_t i, int64_t window_size, int64_t low_pad,
                               int64_t dilation);

// Lowers a fully annotated graph to one per-device program over shard-shaped
// values, partition_id arithmetic and collectives. The node count of the
// result does not depend on num_devices for a fixed graph whose shardings
// keep the same structure.
//
// Requires every node to carry a sharding (run Propagate first) and every
// tiled sharding to use exactly num_devices partitions.
SpmdProgram PartitionGraph(const Graph& annotated, int64_t num_devices,
                           const PartitionOptions& options = PartitionOptions());

}  // namespace shardir

#endif  // SHARDIR_PARTITIONER_H_
