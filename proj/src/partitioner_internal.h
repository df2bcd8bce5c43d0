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

#ifndef SHARDIR_SRC_PARTITIONER_INTERNAL_H_
#define SHARDIR_SRC_PARTITIONER_INTERNAL_H_

#include <cstdint>
#include <vector>

#include "shardir/graph.h"
#include "shardir/partitioner.h"
#include "shardir/sharding.h"

namespace shardir {
namespace internal {

// Shared state of one PartitionGraph run. `mapped`/`cur` are indexed by
// source node id; `cur` is the sharding the emitted value actually has,
// normally equal to the annotation after each node finishes.
struct PartitionContext {
  const Graph* src = nullptr;
  int64_t num_devices = 1;
  PartitionOptions options;
  Graph out;
  std::vector<int64_t> mapped;
  std::vector<Sharding> cur;
  std::vector<Sharding> ann;
};

// --- Scalar partition-id arithmetic, emitted into `g` -----------------------

int64_t EmitConst(Graph& g, double v);
int64_t EmitBin(Graph& g, ElementwiseKind k, int64_t a, int64_t b);
int64_t EmitPid(Graph& g);
// x*mul + add on a scalar node. Identity factors are still emitted: the op
// sequence must not depend on coefficient values.
int64_t EmitAffine(Graph& g, int64_t x, int64_t mul, int64_t add);
// floor(x / div); exact for the small magnitudes used here.
int64_t EmitFloorDiv(Graph& g, int64_t x, int64_t div);
// x - floor(x/m)*m, the non-negative remainder.
int64_t EmitMod(Graph& g, int64_t x, int64_t m);
int64_t EmitRational(Graph& g, int64_t p, const RationalAffine& ra);

// --- Shard-level helpers -----------------------------------------------------

// True when `s` tiles exactly one dim with devices 0..D-1 in natural order.
bool IsNaturalOneDim(const Sharding& s, int64_t num_devices);
// The single tiled dim of a 1-D tiling.
int64_t TiledDim(const Sharding& s);

// Scalar node holding this device's grid coordinate along assignment dim d.
int64_t EmitGridCoord(PartitionContext& ctx, const Sharding& s, int64_t d);

// Replaces elements whose global index along `dim` (local index + `offset`,
// a scalar node) falls outside [0, valid_extent) with `identity`.
int64_t EmitMask(Graph& g, int64_t value, int64_t dim, int64_t offset,
                 int64_t valid_extent, float identity);

// Converts `value` (sharded as `from` over full logical shape `full`) to
// sharding `to`. Emits collectives as needed; returns `value` unchanged when
// from == to.
int64_t EmitReshard(PartitionContext& ctx, int64_t value, const Sharding& from,
                    const Sharding& to, const Shape& full);

// Fetches, for every device, the source range [start(p), start(p)+span) along
// `dim` from a tensor tiled in `chunk`-sized shards on that dim. Out-of-range
// positions read 0. When `mask_fetched` is false the caller guarantees the
// selected range never touches positions >= valid_extent.
int64_t EmitGatherRange(PartitionContext& ctx, int64_t value, int64_t dim,
                        int64_t chunk, const RationalAffine& start,
                        int64_t span, int64_t valid_extent, bool mask_fetched);

// --- Per-op lowering (defined across the partitioner translation units) -----

void PartitionEinsumNode(PartitionContext& ctx, const Node& n);
void PartitionConvolutionNode(PartitionContext& ctx, const Node& n);
void PartitionDataFormattingNode(PartitionContext& ctx, const Node& n);

// Emitted value of source operand `src_op`, resharded to `want`.
int64_t OperandAs(PartitionContext& ctx, int64_t src_op, const Sharding& want);

// Finishes a node: reshards `value` (currently sharded `cur_sharding`) to the
// node's annotation and records mapped/cur.
void Finish(PartitionContext& ctx, const Node& n, int64_t value,
            const Sharding& cur_sharding);

}  // namespace internal
}  // namespace shardir

#endif  // SHARDIR_SRC_PARTITIONER_INTERNAL_H_
