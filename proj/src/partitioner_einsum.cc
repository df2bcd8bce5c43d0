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

// Einsum lowering. Strategy, in order of preference:
//   - both operands sharded on the same batch letter: purely local;
//   - same contracting letter: local partial products + all_reduce;
//   - sharded on an operand-exclusive output letter: local, output tiled;
//   - mismatched letters: re-tile one operand with an all_to_all onto a
//     shared (batch, then contracting) letter;
//   - exclusive x exclusive: replicate the smaller operand if it fits the
//     memory budget, else run a cyclic loop that rotates the right operand
//     with collective_permute and fills one output column block per trip;
//   - anything else: replicate.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "shardir/common.h"
#include "shardir/graph.h"
#include "shardir/partitioner.h"
#include "shardir/shape.h"
#include "shardir/sharding.h"
#include "partitioner_internal.h"

namespace shardir {
namespace internal {
namespace {

enum class LetterClass {
  kBatch,
  kContracting,
  kLhsOnly,
  kRhsOnly,
  kLhsReduced,
  kRhsReduced,
};

LetterClass Classify(const EinsumSpec& spec, char c) {
  if (spec.batch.find(c) != std::string::npos) return LetterClass::kBatch;
  if (spec.contracting.find(c) != std::string::npos) {
    return LetterClass::kContracting;
  }
  if (spec.lhs_only.find(c) != std::string::npos) return LetterClass::kLhsOnly;
  if (spec.rhs_only.find(c) != std::string::npos) return LetterClass::kRhsOnly;
  if (spec.lhs_reduced.find(c) != std::string::npos) {
    return LetterClass::kLhsReduced;
  }
  return LetterClass::kRhsReduced;
}

struct Val {
  int64_t id;
  Sharding s;
};

int64_t DimOf(const std::string& term, char c) {
  return static_cast<int64_t>(term.find(c));
}

// Zeroes the padded tail of a natural 1-D shard along `dim`; no-op when the
// extent divides evenly.
int64_t MaskShardTail(PartitionContext& ctx, int64_t value, int64_t dim,
                      int64_t full_extent) {
  Graph& g = ctx.out;
  int64_t c = CeilDiv(full_extent, ctx.num_devices);
  if (c * ctx.num_devices == full_extent) return value;
  return EmitMask(g, value, dim, EmitAffine(g, EmitPid(g), c, 0), full_extent,
                  0.0f);
}

// Cyclic product for lhs tiled on an lhs-exclusive output letter and rhs
// tiled on an rhs-exclusive one. Every trip multiplies the local lhs shard
// with the currently held rhs shard, writes the matching output column block,
// and passes the rhs shard to the left neighbor. Peak memory stays at one
// shard per operand.
void EmitCyclicEinsum(PartitionContext& ctx, const Node& n,
                      const EinsumSpec& spec, const Val& l, const Val& r,
                      char lt, char rt, const Shape& rfull) {
  Graph& g = ctx.out;
  const int64_t num_devices = ctx.num_devices;
  const int64_t rdim = DimOf(spec.rhs, rt);
  const int64_t lout = DimOf(spec.out, lt);
  const int64_t rout = DimOf(spec.out, rt);
  const int64_t rc = CeilDiv(rfull.dims[rdim], num_devices);

  Shape acc_shape = n.shape();
  acc_shape.dims[lout] = CeilDiv(n.shape().dims[lout], num_devices);
  acc_shape.dims[rout] = num_devices * rc;
  int64_t acc0 = AddBroadcast(g, acc_shape, EmitConst(g, 0));

  auto body = std::make_shared<Graph>();
  int64_t b_acc = AddLoopParam(*body, 0, acc_shape);
  int64_t b_rhs = AddLoopParam(*body, 1, g.node(r.id).shape());
  int64_t b_lhs = AddLoopParam(*body, 2, g.node(l.id).shape());
  int64_t partial = AddEinsum(*body, n.einsum_spec, b_lhs, b_rhs);
  // Trip k holds the rhs shard of device pid+k; its columns land at block
  // (pid+k) mod num_devices.
  int64_t turn = EmitBin(*body, ElementwiseKind::kAdd, EmitPid(*body),
                         AddLoopIndex(*body));
  int64_t col = EmitAffine(*body, EmitMod(*body, turn, num_devices), rc, 0);
  std::vector<int64_t> starts(acc_shape.rank());
  for (int64_t i = 0; i < acc_shape.rank(); ++i) starts[i] = EmitConst(*body, 0);
  starts[rout] = col;
  int64_t acc1 = AddDynamicUpdateSlice(*body, b_acc, partial, std::move(starts));
  std::vector<std::pair<int64_t, int64_t>> rotate;
  rotate.reserve(num_devices);
  for (int64_t i = 0; i < num_devices; ++i) {
    rotate.emplace_back(i, (i + num_devices - 1) % num_devices);
  }
  int64_t rhs1 = AddCollectivePermute(*body, b_rhs, std::move(rotate));
  AddYield(*body, {acc1, rhs1, b_lhs});

  int64_t loop =
      AddShardedLoop(g, {acc0, r.id, l.id}, num_devices, std::move(body));
  int64_t v = AddGetOutput(g, loop, 0);
  if (num_devices * rc != n.shape().dims[rout]) {
    const Shape& sh = g.node(v).shape();
    std::vector<int64_t> sstarts(sh.rank(), 0), strides(sh.rank(), 1);
    std::vector<int64_t> limits = sh.dims;
    limits[rout] = n.shape().dims[rout];
    v = AddSlice(g, v, std::move(sstarts), std::move(limits),
                 std::move(strides));
  }
  Finish(ctx, n, v,
         Sharding::SplitDim(n.shape().rank(), lout, num_devices));
}

}  // namespace

void PartitionEinsumNode(PartitionContext& ctx, const Node& n) {
  Graph& g = ctx.out;
  const int64_t num_devices = ctx.num_devices;
  const EinsumSpec spec = ParseEinsumSpec(n.einsum_spec);
  const int64_t lop = n.operands[0], rop = n.operands[1];
  const Shape& lfull = ctx.src->node(lop).shape();
  const Shape& rfull = ctx.src->node(rop).shape();
  Val l{ctx.mapped.at(lop), ctx.cur.at(lop)};
  Val r{ctx.mapped.at(rop), ctx.cur.at(rop)};
  auto reshard = [&](Val& v, const Shape& full, const Sharding& to) {
    v.id = EmitReshard(ctx, v.id, v.s, to, full);
    v.s = to;
  };
  // Strategies below assume natural 1-D tilings; reduce everything else.
  auto canonicalize = [&](Val& v, const Shape& full) {
    if (v.s.replicated) return;
    if (v.s.tiled_dims().size() == 1) {
      if (!IsNaturalOneDim(v.s, num_devices)) {
        reshard(v, full,
                Sharding::SplitDim(full.rank(), TiledDim(v.s), num_devices));
      }
    } else {
      reshard(v, full, Sharding::Replicated());
    }
  };
  canonicalize(l, lfull);
  canonicalize(r, rfull);

  char lt = l.s.replicated ? 0 : spec.lhs[TiledDim(l.s)];
  char rt = r.s.replicated ? 0 : spec.rhs[TiledDim(r.s)];

  if (lt && rt && lt != rt) {
    // Re-tile one operand onto a letter the other already uses; prefer batch
    // (fully local afterwards) over contracting (needs an all_reduce).
    if (Classify(spec, lt) == LetterClass::kBatch) {
      reshard(r, rfull,
              Sharding::SplitDim(rfull.rank(), DimOf(spec.rhs, lt),
                                 num_devices));
      rt = lt;
    } else if (Classify(spec, rt) == LetterClass::kBatch) {
      reshard(l, lfull,
              Sharding::SplitDim(lfull.rank(), DimOf(spec.lhs, rt),
                                 num_devices));
      lt = rt;
    } else if (Classify(spec, lt) == LetterClass::kContracting) {
      reshard(r, rfull,
              Sharding::SplitDim(rfull.rank(), DimOf(spec.rhs, lt),
                                 num_devices));
      rt = lt;
    } else if (Classify(spec, rt) == LetterClass::kContracting) {
      reshard(l, lfull,
              Sharding::SplitDim(lfull.rank(), DimOf(spec.lhs, rt),
                                 num_devices));
      lt = rt;
    } else if (Classify(spec, lt) == LetterClass::kLhsOnly &&
               Classify(spec, rt) == LetterClass::kRhsOnly) {
      int64_t lbytes = lfull.num_elements() * 4;
      int64_t rbytes = rfull.num_elements() * 4;
      int64_t budget = ctx.options.memory_budget_bytes;
      if (std::min(lbytes, rbytes) > budget) {
        EmitCyclicEinsum(ctx, n, spec, l, r, lt, rt, rfull);
        return;
      }
      if (rbytes <= lbytes) {
        reshard(r, rfull, Sharding::Replicated());
        rt = 0;
      } else {
        reshard(l, lfull, Sharding::Replicated());
        lt = 0;
      }
    } else {
      reshard(l, lfull, Sharding::Replicated());
      reshard(r, rfull, Sharding::Replicated());
      lt = rt = 0;
    }
  }

  // One side tiled on a shared letter: split the replicated side in place
  // (a local slice, no communication).
  if (lt && !rt && r.s.replicated) {
    LetterClass c = Classify(spec, lt);
    if (c == LetterClass::kBatch || c == LetterClass::kContracting) {
      reshard(r, rfull,
              Sharding::SplitDim(rfull.rank(), DimOf(spec.rhs, lt),
                                 num_devices));
      rt = lt;
    }
  } else if (rt && !lt && l.s.replicated) {
    LetterClass c = Classify(spec, rt);
    if (c == LetterClass::kBatch || c == LetterClass::kContracting) {
      reshard(l, lfull,
              Sharding::SplitDim(lfull.rank(), DimOf(spec.lhs, rt),
                                 num_devices));
      lt = rt;
    }
  }

  if (!lt && !rt) {
    int64_t v = AddEinsum(g, n.einsum_spec, l.id, r.id);
    Finish(ctx, n, v, Sharding::Replicated());
    return;
  }
  if (lt && rt) {
    // Same letter on both sides.
    if (Classify(spec, lt) == LetterClass::kBatch) {
      int64_t v = AddEinsum(g, n.einsum_spec, l.id, r.id);
      Finish(ctx, n, v,
             Sharding::SplitDim(n.shape().rank(), DimOf(spec.out, lt),
                                num_devices));
      return;
    }
    // Contracting: padded tails must not contribute to the partial sums.
    int64_t ext = lfull.dims[DimOf(spec.lhs, lt)];
    int64_t lid = MaskShardTail(ctx, l.id, DimOf(spec.lhs, lt), ext);
    int64_t rid = MaskShardTail(ctx, r.id, DimOf(spec.rhs, lt), ext);
    int64_t v = AddEinsum(g, n.einsum_spec, lid, rid);
    v = AddAllReduce(g, ReduceKind::kAdd, v);
    Finish(ctx, n, v, Sharding::Replicated());
    return;
  }
  // Exactly one side tiled, on a letter the other side does not have.
  const bool on_lhs = lt != 0;
  char c = on_lhs ? lt : rt;
  LetterClass k = Classify(spec, c);
  if (k == LetterClass::kLhsOnly || k == LetterClass::kRhsOnly) {
    int64_t v = AddEinsum(g, n.einsum_spec, l.id, r.id);
    Finish(ctx, n, v,
           Sharding::SplitDim(n.shape().rank(), DimOf(spec.out, c),
                              num_devices));
    return;
  }
  // Reduced letter: partial sums over the shard, then combine.
  const std::string& term = on_lhs ? spec.lhs : spec.rhs;
  const Shape& full = on_lhs ? lfull : rfull;
  int64_t dim = DimOf(term, c);
  int64_t masked = MaskShardTail(ctx, on_lhs ? l.id : r.id, dim,
                                 full.dims[dim]);
  int64_t v = AddEinsum(g, n.einsum_spec, on_lhs ? masked : l.id,
                        on_lhs ? r.id : masked);
  v = AddAllReduce(g, ReduceKind::kAdd, v);
  Finish(ctx, n, v, Sharding::Replicated());
}

}  // namespace internal
}  // namespace shardir
