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

#include "shardir/partitioner.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "shardir/common.h"
#include "shardir/graph.h"
#include "shardir/shape.h"
#include "shardir/sharding.h"
#include "shardir/spmd.h"
#include "partitioner_internal.h"

namespace shardir {

int64_t RationalAffine::At(int64_t p) const {
  return FloorDiv(mul * p + add, div);
}

namespace internal {

// Every call emits a fresh node. Deduplicating by value would make the node
// structure depend on which coefficients happen to collide at a given device
// count; emission must be value-blind so that program shape is a function of
// the operator structure alone.
int64_t EmitConst(Graph& g, double v) {
  return AddScalarConstant(g, static_cast<float>(v));
}

int64_t EmitBin(Graph& g, ElementwiseKind k, int64_t a, int64_t b) {
  return AddElementwise(g, k, {a, b});
}

int64_t EmitPid(Graph& g) {
  for (const Node& n : g.nodes) {
    if (n.op == OpKind::kPartitionId) return n.id;
  }
  return AddPartitionId(g);
}

// No identity shortcuts (mul == 1, add == 0): coefficients vary with the
// device count while the emitted op sequence must not.
int64_t EmitAffine(Graph& g, int64_t x, int64_t mul, int64_t add) {
  int64_t v = EmitBin(g, ElementwiseKind::kMul, x, EmitConst(g, mul));
  return EmitBin(g, ElementwiseKind::kAdd, v, EmitConst(g, add));
}

// Values here stay far below 2^20, where float division is exact enough for
// Floor to recover the true integer quotient. Emitted even for div == 1 so
// the op sequence stays value-blind.
int64_t EmitFloorDiv(Graph& g, int64_t x, int64_t div) {
  int64_t q = EmitBin(g, ElementwiseKind::kDiv, x, EmitConst(g, div));
  return AddElementwise(g, ElementwiseKind::kFloor, {q});
}

int64_t EmitMod(Graph& g, int64_t x, int64_t m) {
  int64_t q = EmitFloorDiv(g, x, m);
  return EmitBin(g, ElementwiseKind::kSub, x,
                 EmitBin(g, ElementwiseKind::kMul, q, EmitConst(g, m)));
}

int64_t EmitRational(Graph& g, int64_t p, const RationalAffine& ra) {
  return EmitFloorDiv(g, EmitAffine(g, p, ra.mul, ra.add), ra.div);
}

bool IsNaturalOneDim(const Sharding& s, int64_t num_devices) {
  if (s.replicated) return false;
  if (s.tiled_dims().size() != 1) return false;
  if (s.total_partitions() != num_devices) return false;
  for (int64_t i = 0; i < num_devices; ++i) {
    if (s.assignment.device_ids[i] != i) return false;
  }
  return true;
}

int64_t TiledDim(const Sharding& s) { return s.tiled_dims().at(0); }

int64_t EmitGridCoord(PartitionContext& ctx, const Sharding& s, int64_t d) {
  Graph& g = ctx.out;
  if (s.replicated || s.assignment.dims.at(d) == 1) return EmitConst(g, 0);
  if (IsNaturalOneDim(s, ctx.num_devices)) return EmitPid(g);
  // General device orders: look the coordinate up in a device-indexed table.
  std::vector<float> table(ctx.num_devices, 0.0f);
  for (int64_t dev = 0; dev < ctx.num_devices; ++dev) {
    table[dev] = static_cast<float>(DeviceGridPosition(s.assignment, dev)[d]);
  }
  int64_t tbl = AddConstant(g, Shape{{ctx.num_devices}}, std::move(table));
  int64_t ds = AddDynamicSlice(g, tbl, {EmitPid(g)}, {1});
  return AddReshape(g, Shape{}, ds);
}

int64_t EmitMask(Graph& g, int64_t value, int64_t dim, int64_t offset,
                 int64_t valid_extent, float identity) {
  const Shape sh = g.node(value).shape();
  int64_t iota = AddIota(g, sh, dim);
  int64_t gidx = EmitBin(g, ElementwiseKind::kAdd, iota,
                         AddBroadcast(g, sh, offset));
  int64_t ge = AddCompare(g, CompareKind::kGe, gidx,
                          AddBroadcast(g, sh, EmitConst(g, 0)));
  int64_t lt = AddCompare(g, CompareKind::kLt, gidx,
                          AddBroadcast(g, sh, EmitConst(g, valid_extent)));
  int64_t keep = EmitBin(g, ElementwiseKind::kMul, ge, lt);
  int64_t ident = AddBroadcast(g, sh, EmitConst(g, identity));
  return AddElementwise(g, ElementwiseKind::kSelect, {keep, value, ident});
}

namespace {

// Per-dim gather groups: one group per position of the other grid dims, each
// listing the devices along `d` in grid order.
std::vector<std::vector<int64_t>> GatherGroups(const DeviceAssignment& a,
                                               int64_t d) {
  int64_t before = 1, after = 1;
  for (int64_t i = 0; i < d; ++i) before *= a.dims[i];
  for (size_t i = d + 1; i < a.dims.size(); ++i) after *= a.dims[i];
  int64_t nd = a.dims[d];
  std::vector<std::vector<int64_t>> groups;
  groups.reserve(before * after);
  for (int64_t pre = 0; pre < before; ++pre) {
    for (int64_t post = 0; post < after; ++post) {
      std::vector<int64_t> grp;
      grp.reserve(nd);
      for (int64_t j = 0; j < nd; ++j) {
        grp.push_back(a.device_ids[(pre * nd + j) * after + post]);
      }
      groups.push_back(std::move(grp));
    }
  }
  return groups;
}

bool IsIdentityGroups(const std::vector<std::vector<int64_t>>& groups,
                      int64_t num_devices) {
  if (groups.size() != 1) return false;
  if (static_cast<int64_t>(groups[0].size()) != num_devices) return false;
  for (int64_t i = 0; i < num_devices; ++i) {
    if (groups[0][i] != i) return false;
  }
  return true;
}

}  // namespace

int64_t EmitReshard(PartitionContext& ctx, int64_t value, const Sharding& from,
                    const Sharding& to, const Shape& full) {
  if (from == to) return value;
  Graph& g = ctx.out;
  const int64_t rank = full.rank();
  if (to.replicated) {
    // Gather every tiled grid dim back, then trim the padded tail.
    PartitionShape ps = PartitionShapeOf(full, from);
    int64_t v = value;
    for (int64_t d = 0; d < rank; ++d) {
      int64_t parts = from.assignment.dims.at(d);
      if (parts == 1) continue;
      auto groups = GatherGroups(from.assignment, d);
      if (IsIdentityGroups(groups, ctx.num_devices)) groups.clear();
      v = AddAllGather(g, v, d, parts, std::move(groups));
    }
    if (ps.has_padding) {
      std::vector<int64_t> starts(rank, 0), strides(rank, 1);
      v = AddSlice(g, v, starts, full.dims, strides);
    }
    return v;
  }
  if (from.replicated) {
    // Pad to a multiple of the shard size, then every device slices its own
    // piece at grid_coord * shard_extent.
    PartitionShape ps = PartitionShapeOf(full, to);
    int64_t v = value;
    if (ps.has_padding) {
      std::vector<int64_t> lo(rank, 0), hi(rank, 0), ip(rank, 0);
      for (int64_t d = 0; d < rank; ++d) {
        hi[d] = ps.padded_full.dims[d] - full.dims[d];
      }
      v = AddPad(g, v, lo, hi, ip);
    }
    std::vector<int64_t> starts(rank);
    for (int64_t d = 0; d < rank; ++d) {
      if (to.assignment.dims[d] == 1) {
        starts[d] = EmitConst(g, 0);
      } else {
        starts[d] = EmitAffine(g, EmitGridCoord(ctx, to, d),
                               ps.per_device.dims[d], 0);
      }
    }
    return AddDynamicSlice(g, v, starts, ps.per_device.dims);
  }
  // Both tiled.
  if (from.assignment.dims == to.assignment.dims) {
    // Same grid shape, different device order: route each shard directly.
    std::vector<std::pair<int64_t, int64_t>> pairs;
    int64_t total = from.total_partitions();
    pairs.reserve(total);
    for (int64_t i = 0; i < total; ++i) {
      pairs.emplace_back(from.assignment.device_ids[i],
                         to.assignment.device_ids[i]);
    }
    return AddCollectivePermute(g, value, pairs);
  }
  if (IsNaturalOneDim(from, ctx.num_devices) &&
      IsNaturalOneDim(to, ctx.num_devices)) {
    // Move the tiled dim from i to j with one all_to_all; resharding in place
    // beats gathering the full tensor.
    int64_t i = TiledDim(from), j = TiledDim(to);
    int64_t d = ctx.num_devices;
    int64_t cj = CeilDiv(full.dims[j], d);
    int64_t v = value;
    if (cj * d != full.dims[j]) {
      std::vector<int64_t> lo(rank, 0), hi(rank, 0), ip(rank, 0);
      hi[j] = cj * d - full.dims[j];
      v = AddPad(g, v, lo, hi, ip);
    }
    v = AddAllToAll(g, v, /*split_dim=*/j, /*concat_dim=*/i, d);
    int64_t ci = CeilDiv(full.dims[i], d);
    if (ci * d != full.dims[i]) {
      const Shape& sh = g.node(v).shape();
      std::vector<int64_t> starts(rank, 0), strides(rank, 1);
      std::vector<int64_t> limits = sh.dims;
      limits[i] = full.dims[i];
      v = AddSlice(g, v, starts, limits, strides);
    }
    return v;
  }
  // Remaining combinations go through a replicated intermediate.
  int64_t rep = EmitReshard(ctx, value, from, Sharding::Replicated(), full);
  return EmitReshard(ctx, rep, Sharding::Replicated(), to, full);
}

int64_t EmitGatherRange(PartitionContext& ctx, int64_t value, int64_t dim,
                        int64_t chunk, const RationalAffine& start,
                        int64_t span, int64_t valid_extent, bool mask_fetched) {
  Graph& g = ctx.out;
  const int64_t d = ctx.num_devices;
  const Shape sh = g.node(value).shape();
  bool aligned = (span == chunk);
  int64_t width = 1;
  for (int64_t p = 0; p < d; ++p) {
    int64_t st = start.At(p);
    if (st != p * chunk) aligned = false;
    int64_t qlo = FloorDiv(st, chunk);
    int64_t qhi = FloorDiv(st + span - 1, chunk);
    width = std::max(width, qhi - qlo + 1);
  }
  if (aligned) {
    if (!mask_fetched || chunk * d == valid_extent) return value;
    return EmitMask(g, value, dim, EmitAffine(g, EmitPid(g), chunk, 0),
                    valid_extent, 0.0f);
  }
  // Collect the `width` chunks covering [start, start+span) into one buffer;
  // chunk offset k arrives from device floor(start/chunk)+k in a single
  // collective_permute. Missing neighbors leave zeros.
  Shape buf_shape = sh;
  buf_shape.dims[dim] = width * chunk;
  int64_t buffer = AddBroadcast(g, buf_shape, EmitConst(g, 0));
  for (int64_t k = 0; k < width; ++k) {
    std::vector<std::pair<int64_t, int64_t>> pairs;
    for (int64_t p = 0; p < d; ++p) {
      int64_t src = FloorDiv(start.At(p), chunk) + k;
      if (src >= 0 && src < d) pairs.emplace_back(src, p);
    }
    // Emitted even when no device needs this offset: receivers get zeros,
    // matching the zero-initialized buffer, and the op sequence stays the
    // same for every device count.
    int64_t cp = AddCollectivePermute(g, value, std::move(pairs));
    std::vector<int64_t> starts(sh.rank());
    for (int64_t r = 0; r < sh.rank(); ++r) starts[r] = EmitConst(g, 0);
    starts[dim] = EmitConst(g, k * chunk);
    buffer = AddDynamicUpdateSlice(g, buffer, cp, starts);
  }
  // Buffer position 0 holds global index floor(start/chunk)*chunk.
  int64_t qlo_node = EmitRational(
      g, EmitPid(g), RationalAffine{start.mul, start.add, start.div * chunk});
  int64_t base = EmitAffine(g, qlo_node, chunk, 0);
  int64_t out = buffer;
  if (mask_fetched) out = EmitMask(g, out, dim, base, valid_extent, 0.0f);
  int64_t st_node = EmitRational(g, EmitPid(g), start);
  int64_t off = EmitBin(g, ElementwiseKind::kSub, st_node, base);
  std::vector<int64_t> starts(sh.rank());
  for (int64_t r = 0; r < sh.rank(); ++r) starts[r] = EmitConst(g, 0);
  starts[dim] = off;
  std::vector<int64_t> sizes = sh.dims;
  sizes[dim] = span;
  return AddDynamicSlice(g, out, starts, sizes);
}

int64_t OperandAs(PartitionContext& ctx, int64_t src_op, const Sharding& want) {
  return EmitReshard(ctx, ctx.mapped.at(src_op), ctx.cur.at(src_op), want,
                     ctx.src->node(src_op).shape());
}

void Finish(PartitionContext& ctx, const Node& n, int64_t value,
            const Sharding& cur_sharding) {
  const Sharding& want = ctx.ann.at(n.id);
  int64_t v = EmitReshard(ctx, value, cur_sharding, want, n.shape());
  ctx.mapped.at(n.id) = v;
  ctx.cur.at(n.id) = want;
}

namespace {

float ReduceIdentity(ReduceKind k) {
  switch (k) {
    case ReduceKind::kAdd:
      return 0.0f;
    case ReduceKind::kMax:
      return -std::numeric_limits<float>::infinity();
    case ReduceKind::kMin:
      return std::numeric_limits<float>::infinity();
  }
  return 0.0f;
}

void EmitParameterNode(PartitionContext& ctx, const Node& n) {
  const Sharding& ann = ctx.ann[n.id];
  Shape per = PartitionShapeOf(n.shape(), ann).per_device;
  int64_t v = AddParameter(ctx.out, n.name, std::move(per));
  ctx.mapped[n.id] = v;
  ctx.cur[n.id] = ann;
}

void EmitConstantNode(PartitionContext& ctx, const Node& n) {
  int64_t v = AddConstant(ctx.out, n.shape(), n.literal);
  Finish(ctx, n, v, Sharding::Replicated());
}

void EmitIotaNode(PartitionContext& ctx, const Node& n) {
  Graph& g = ctx.out;
  const Sharding& ann = ctx.ann[n.id];
  Shape per = PartitionShapeOf(n.shape(), ann).per_device;
  int64_t v = AddIota(g, per, n.dim);
  if (!ann.replicated && ann.assignment.dims.at(n.dim) > 1) {
    // Shift each shard by its global starting index. The padded tail gets
    // values >= the true extent, which downstream masking treats as invalid.
    int64_t c = per.dims[n.dim];
    int64_t off = EmitAffine(g, EmitGridCoord(ctx, ann, n.dim), c, 0);
    v = EmitBin(g, ElementwiseKind::kAdd, v, AddBroadcast(g, per, off));
  }
  ctx.mapped[n.id] = v;
  ctx.cur[n.id] = ann;
}

void EmitElementwiseNode(PartitionContext& ctx, const Node& n) {
  const Sharding& ann = ctx.ann[n.id];
  std::vector<int64_t> ops;
  ops.reserve(n.operands.size());
  for (int64_t o : n.operands) ops.push_back(OperandAs(ctx, o, ann));
  int64_t v;
  if (n.elem_kind == ElementwiseKind::kCompare) {
    v = AddCompare(ctx.out, n.cmp_kind, ops[0], ops[1]);
  } else {
    v = AddElementwise(ctx.out, n.elem_kind, std::move(ops));
  }
  ctx.mapped[n.id] = v;
  ctx.cur[n.id] = ann;
}

void EmitBroadcastNode(PartitionContext& ctx, const Node& n) {
  const Sharding& ann = ctx.ann[n.id];
  int64_t in = OperandAs(ctx, n.operands[0], Sharding::Replicated());
  Shape per = PartitionShapeOf(n.shape(), ann).per_device;
  int64_t v = AddBroadcast(ctx.out, std::move(per), in);
  ctx.mapped[n.id] = v;
  ctx.cur[n.id] = ann;
}

void EmitReduceNode(PartitionContext& ctx, const Node& n) {
  Graph& g = ctx.out;
  int64_t op = n.operands[0];
  const Shape& in_full = ctx.src->node(op).shape();
  const Sharding sin = ctx.cur[op];
  const int64_t rank = in_full.rank();
  std::vector<bool> reduced(rank, false);
  for (int64_t d : n.dims) reduced[d] = true;
  if (!sin.replicated) {
    bool all_in_reduced = true, all_in_survive = true;
    for (int64_t d = 0; d < rank; ++d) {
      if (sin.assignment.dims[d] > 1) {
        (reduced[d] ? all_in_survive : all_in_reduced) = false;
      }
    }
    if (all_in_reduced) {
      // Local partial reduce + cross-device combine. Padded tails must first
      // take the reduction identity so they cannot contribute.
      int64_t v = ctx.mapped[op];
      for (int64_t d = 0; d < rank; ++d) {
        int64_t parts = sin.assignment.dims[d];
        if (parts == 1) continue;
        int64_t c = CeilDiv(in_full.dims[d], parts);
        if (c * parts == in_full.dims[d]) continue;
        v = EmitMask(g, v, d, EmitAffine(g, EmitGridCoord(ctx, sin, d), c, 0),
                     in_full.dims[d], ReduceIdentity(n.reduce_kind));
      }
      v = AddReduce(g, n.reduce_kind, n.dims, v);
      v = AddAllReduce(g, n.reduce_kind, v);
      Finish(ctx, n, v, Sharding::Replicated());
      return;
    }
    if (all_in_survive) {
      // Reduced dims are unpartitioned: the reduce stays fully local.
      int64_t v = AddReduce(g, n.reduce_kind, n.dims, ctx.mapped[op]);
      DeviceAssignment a;
      for (int64_t d = 0; d < rank; ++d) {
        if (!reduced[d]) a.dims.push_back(sin.assignment.dims[d]);
      }
      a.device_ids = sin.assignment.device_ids;
      Finish(ctx, n, v, Sharding::Tiled(std::move(a)));
      return;
    }
  }
  int64_t v = AddReduce(g, n.reduce_kind, n.dims,
                        OperandAs(ctx, op, Sharding::Replicated()));
  Finish(ctx, n, v, Sharding::Replicated());
}

// Softmax and cumsum are local as long as their axis is unpartitioned.
void EmitAxisLocalNode(PartitionContext& ctx, const Node& n) {
  Sharding work = ctx.ann[n.id];
  if (!work.replicated && work.assignment.dims.at(n.dim) > 1) {
    work = Sharding::Replicated();
  }
  int64_t in = OperandAs(ctx, n.operands[0], work);
  int64_t v = n.op == OpKind::kSoftmax
                  ? AddSoftmax(ctx.out, n.dim, in)
                  : AddCumsum(ctx.out, n.dim, n.exclusive, in);
  Finish(ctx, n, v, work);
}

void EmitTopKNode(PartitionContext& ctx, const Node& n) {
  Sharding work = ctx.ann[n.id];
  if (!work.replicated && work.assignment.dims.at(n.dim) > 1) {
    work = Sharding::Replicated();
  }
  int64_t in = OperandAs(ctx, n.operands[0], work);
  int64_t v = AddTopK(ctx.out, n.k, n.dim, in);
  // Tuple-valued: keep the working sharding; get_output reshards per use.
  ctx.mapped[n.id] = v;
  ctx.cur[n.id] = work;
}

void EmitGetOutputNode(PartitionContext& ctx, const Node& n) {
  int64_t op = n.operands[0];
  int64_t v = AddGetOutput(ctx.out, ctx.mapped[op], n.index);
  Finish(ctx, n, v, ctx.cur[op]);
}

void EmitOneHotNode(PartitionContext& ctx, const Node& n) {
  Graph& g = ctx.out;
  const Sharding& ann = ctx.ann[n.id];
  int64_t op = n.operands[0];
  if (!ann.replicated && ann.assignment.dims.at(n.dim) > 1) {
    // Tiling the inserted class dim would need a global index rewrite; fall
    // back to replicated.
    int64_t in = OperandAs(ctx, op, Sharding::Replicated());
    int64_t v = AddOneHot(g, n.depth, n.dim, in);
    Finish(ctx, n, v, Sharding::Replicated());
    return;
  }
  Sharding want = Sharding::Replicated();
  if (!ann.replicated) {
    DeviceAssignment a = ann.assignment;
    a.dims.erase(a.dims.begin() + n.dim);
    want = Sharding::Tiled(std::move(a));
  }
  int64_t in = OperandAs(ctx, op, want);
  int64_t v = AddOneHot(g, n.depth, n.dim, in);
  ctx.mapped[n.id] = v;
  ctx.cur[n.id] = ann;
}

void EmitDynamicSliceNode(PartitionContext& ctx, const Node& n) {
  // Data-dependent offsets: run replicated.
  std::vector<int64_t> start_ids;
  int64_t data = OperandAs(ctx, n.operands[0], Sharding::Replicated());
  for (size_t i = 1; i < n.operands.size(); ++i) {
    start_ids.push_back(
        OperandAs(ctx, n.operands[i], Sharding::Replicated()));
  }
  int64_t v = AddDynamicSlice(ctx.out, data, std::move(start_ids),
                              n.dynamic_sizes);
  Finish(ctx, n, v, Sharding::Replicated());
}

// Local clone of a data formatting op with its original attributes.
int64_t LocalFormat(Graph& g, const Node& n, int64_t value) {
  switch (n.op) {
    case OpKind::kPad:
      return AddPad(g, value, n.pad_low, n.pad_high, n.pad_interior);
    case OpKind::kSlice:
      return AddSlice(g, value, n.slice_starts, n.slice_limits,
                      n.slice_strides);
    case OpKind::kReverse:
      return AddReverse(g, n.dims, value);
    default:
      return AddReshape(g, n.shape(), value);
  }
}

// Pad with the tiled dim t affected. Each output shard covers positions
// [p*co, p*co+co); the elements feeding it are start(p) = ceil((p*co - lp) /
// (ip+1)) onward. A local pad with interior ip and low pad ip lays the
// fetched elements at positions ip + j*(ip+1); slicing at ip - phi(p), where
// phi(p) = lp + start(p)*(ip+1) - p*co in [0, ip], restores the global
// layout. Fetched positions outside the true extent are masked to the pad
// value (zero) first.
void LowerPad(PartitionContext& ctx, const Node& n, int64_t t, int64_t value) {
  Graph& g = ctx.out;
  const int64_t num_devices = ctx.num_devices;
  const Shape& in_full = ctx.src->node(n.operands[0]).shape();
  const int64_t ni = in_full.dims[t];
  const int64_t no = n.shape().dims[t];
  const int64_t ci = CeilDiv(ni, num_devices);
  const int64_t co = CeilDiv(no, num_devices);
  const int64_t lp = n.pad_low[t];
  const int64_t ip = n.pad_interior[t];
  RationalAffine start{co, -lp + ip, ip + 1};
  int64_t span = 1;
  for (int64_t p = 0; p < num_devices; ++p) {
    int64_t last = FloorDiv(p * co + co - 1 - lp, ip + 1);
    span = std::max(span, last - start.At(p) + 1);
  }
  int64_t fetched = EmitGatherRange(ctx, value, t, ci, start, span, ni,
                                    /*mask_fetched=*/true);
  std::vector<int64_t> lows = n.pad_low, highs = n.pad_high,
                       ips = n.pad_interior;
  lows[t] = ip;
  highs[t] = co;
  int64_t padded = AddPad(g, fetched, std::move(lows), std::move(highs),
                          std::move(ips));
  int64_t st_node = EmitRational(g, EmitPid(g), start);
  int64_t phi = EmitBin(g, ElementwiseKind::kSub,
                        EmitAffine(g, st_node, ip + 1, lp),
                        EmitAffine(g, EmitPid(g), co, 0));
  const Shape& ps = g.node(padded).shape();
  std::vector<int64_t> starts(ps.rank());
  for (int64_t r = 0; r < ps.rank(); ++r) starts[r] = EmitConst(g, 0);
  starts[t] = EmitAffine(g, phi, -1, ip);
  std::vector<int64_t> sizes = ps.dims;
  sizes[t] = co;
  int64_t v = AddDynamicSlice(g, padded, std::move(starts), std::move(sizes));
  Finish(ctx, n, v, Sharding::SplitDim(n.shape().rank(), t, num_devices));
}

// Slice with the tiled dim t affected: output row p*co+j reads input
// start_attr + (p*co+j)*stride, so each shard fetches a strided range and
// finishes with a local strided slice. All selected valid rows come from
// valid input rows, so no masking is needed.
void LowerSlice(PartitionContext& ctx, const Node& n, int64_t t,
                int64_t value) {
  Graph& g = ctx.out;
  const int64_t num_devices = ctx.num_devices;
  const Shape& in_full = ctx.src->node(n.operands[0]).shape();
  const int64_t ni = in_full.dims[t];
  const int64_t no = n.shape().dims[t];
  const int64_t ci = CeilDiv(ni, num_devices);
  const int64_t co = CeilDiv(no, num_devices);
  const int64_t stride = n.slice_strides[t];
  RationalAffine start{co * stride, n.slice_starts[t], 1};
  const int64_t span = (co - 1) * stride + 1;
  int64_t fetched = EmitGatherRange(ctx, value, t, ci, start, span, ni,
                                    /*mask_fetched=*/false);
  std::vector<int64_t> starts = n.slice_starts, limits = n.slice_limits,
                       strides = n.slice_strides;
  starts[t] = 0;
  limits[t] = span;
  int64_t v = AddSlice(g, fetched, std::move(starts), std::move(limits),
                       std::move(strides));
  Finish(ctx, n, v, Sharding::SplitDim(n.shape().rank(), t, num_devices));
}

// Reverse including the tiled dim t: output shard p holds global rows
// [p*c, p*c+c), which mirror input rows ending at n-1-p*c; fetch that range
// and reverse locally (together with any other reversed dims, which are
// full on every shard).
void LowerReverse(PartitionContext& ctx, const Node& n, int64_t t,
                  int64_t value) {
  Graph& g = ctx.out;
  const int64_t num_devices = ctx.num_devices;
  const Shape& in_full = ctx.src->node(n.operands[0]).shape();
  const int64_t nt = in_full.dims[t];
  const int64_t c = CeilDiv(nt, num_devices);
  RationalAffine start{-c, nt - c, 1};
  int64_t fetched = EmitGatherRange(ctx, value, t, c, start, c, nt,
                                    /*mask_fetched=*/false);
  int64_t v = AddReverse(g, n.dims, fetched);
  Finish(ctx, n, v, Sharding::SplitDim(n.shape().rank(), t, num_devices));
}

// Reshape tiled on dim 0 on both sides. Shards are contiguous in flat order,
// so shard p of the output is the flat range [p*B, p*B+B) of the input,
// where A/B are the per-shard flat sizes. Equal flat sizes stay local.
void LowerReshape(PartitionContext& ctx, const Node& n, int64_t value) {
  Graph& g = ctx.out;
  const int64_t num_devices = ctx.num_devices;
  const Shape& in_full = ctx.src->node(n.operands[0]).shape();
  const Shape& out_full = n.shape();
  int64_t rest_in = 1, rest_out = 1;
  for (int64_t d = 1; d < in_full.rank(); ++d) rest_in *= in_full.dims[d];
  for (int64_t d = 1; d < out_full.rank(); ++d) rest_out *= out_full.dims[d];
  const int64_t ci = CeilDiv(in_full.dims[0], num_devices);
  const int64_t co = CeilDiv(out_full.dims[0], num_devices);
  const int64_t flat_in = ci * rest_in;
  const int64_t flat_out = co * rest_out;
  Shape per_out = out_full;
  per_out.dims[0] = co;
  if (flat_in == flat_out) {
    int64_t v = AddReshape(g, std::move(per_out), value);
    Finish(ctx, n, v, Sharding::SplitDim(out_full.rank(), 0, num_devices));
    return;
  }
  int64_t flat = AddReshape(g, Shape{{flat_in}}, value);
  RationalAffine start{flat_out, 0, 1};
  int64_t fetched =
      EmitGatherRange(ctx, flat, 0, flat_in, start, flat_out,
                      in_full.dims[0] * rest_in, /*mask_fetched=*/false);
  int64_t v = AddReshape(g, std::move(per_out), fetched);
  Finish(ctx, n, v, Sharding::SplitDim(out_full.rank(), 0, num_devices));
}

void EmitNode(PartitionContext& ctx, const Node& n) {
  switch (n.op) {
    case OpKind::kParameter:
      EmitParameterNode(ctx, n);
      return;
    case OpKind::kConstant:
      EmitConstantNode(ctx, n);
      return;
    case OpKind::kIota:
      EmitIotaNode(ctx, n);
      return;
    case OpKind::kElementwise:
      EmitElementwiseNode(ctx, n);
      return;
    case OpKind::kEinsum:
      PartitionEinsumNode(ctx, n);
      return;
    case OpKind::kConvolution:
      PartitionConvolutionNode(ctx, n);
      return;
    case OpKind::kPad:
    case OpKind::kSlice:
    case OpKind::kReverse:
    case OpKind::kReshape:
      PartitionDataFormattingNode(ctx, n);
      return;
    case OpKind::kReduce:
      EmitReduceNode(ctx, n);
      return;
    case OpKind::kCumsum:
    case OpKind::kSoftmax:
      EmitAxisLocalNode(ctx, n);
      return;
    case OpKind::kTopK:
      EmitTopKNode(ctx, n);
      return;
    case OpKind::kGetOutput:
      EmitGetOutputNode(ctx, n);
      return;
    case OpKind::kOneHot:
      EmitOneHotNode(ctx, n);
      return;
    case OpKind::kDynamicSlice:
      EmitDynamicSliceNode(ctx, n);
      return;
    case OpKind::kBroadcast:
      EmitBroadcastNode(ctx, n);
      return;
    default:
      throw UnsupportedOp("op " + OpKindToString(n.op) +
                          " is not allowed in an unpartitioned graph");
  }
}

}  // namespace

void PartitionDataFormattingNode(PartitionContext& ctx, const Node& n) {
  Graph& g = ctx.out;
  const int64_t num_devices = ctx.num_devices;
  const int64_t op = n.operands[0];
  const Shape& in_full = ctx.src->node(op).shape();
  int64_t value = ctx.mapped.at(op);
  Sharding s = ctx.cur.at(op);
  if (!s.replicated && s.tiled_dims().size() == 1 &&
      !IsNaturalOneDim(s, num_devices)) {
    Sharding to =
        Sharding::SplitDim(in_full.rank(), TiledDim(s), num_devices);
    value = EmitReshard(ctx, value, s, to, in_full);
    s = to;
  }
  if (!s.replicated && s.tiled_dims().size() != 1) {
    value = EmitReshard(ctx, value, s, Sharding::Replicated(), in_full);
    s = Sharding::Replicated();
  }
  if (s.replicated) {
    Finish(ctx, n, LocalFormat(g, n, value), Sharding::Replicated());
    return;
  }
  const int64_t t = TiledDim(s);
  switch (n.op) {
    case OpKind::kPad:
      if (n.pad_low[t] == 0 && n.pad_high[t] == 0 && n.pad_interior[t] == 0) {
        int64_t v = AddPad(g, value, n.pad_low, n.pad_high, n.pad_interior);
        Finish(ctx, n, v,
               Sharding::SplitDim(n.shape().rank(), t, num_devices));
      } else {
        LowerPad(ctx, n, t, value);
      }
      return;
    case OpKind::kSlice:
      if (n.slice_starts[t] == 0 && n.slice_limits[t] == in_full.dims[t] &&
          n.slice_strides[t] == 1) {
        // Untouched dim: slice the whole local extent.
        std::vector<int64_t> starts = n.slice_starts,
                             limits = n.slice_limits,
                             strides = n.slice_strides;
        limits[t] = g.node(value).shape().dims[t];
        int64_t v = AddSlice(g, value, std::move(starts), std::move(limits),
                             std::move(strides));
        Finish(ctx, n, v,
               Sharding::SplitDim(n.shape().rank(), t, num_devices));
      } else {
        LowerSlice(ctx, n, t, value);
      }
      return;
    case OpKind::kReverse:
      if (std::find(n.dims.begin(), n.dims.end(), t) == n.dims.end()) {
        int64_t v = AddReverse(g, n.dims, value);
        Finish(ctx, n, v,
               Sharding::SplitDim(n.shape().rank(), t, num_devices));
      } else {
        LowerReverse(ctx, n, t, value);
      }
      return;
    default:
      if (t != 0 || n.shape().rank() == 0) {
        value = EmitReshard(ctx, value, s, Sharding::Replicated(), in_full);
        Finish(ctx, n, AddReshape(g, n.shape(), value),
               Sharding::Replicated());
      } else {
        LowerReshape(ctx, n, value);
      }
      return;
  }
}

}  // namespace internal

SpmdProgram PartitionGraph(const Graph& graph, int64_t num_devices,
                           const PartitionOptions& options) {
  if (num_devices < 1) {
    throw InvalidAttribute("num_devices must be >= 1, got " +
                           std::to_string(num_devices));
  }
  {
    auto problems = Validate(graph);
    if (!problems.empty()) {
      throw InvalidAttribute("invalid graph: " + problems.front());
    }
  }
  internal::PartitionContext ctx;
  ctx.src = &graph;
  ctx.num_devices = num_devices;
  ctx.options = options;
  ctx.mapped.assign(graph.nodes.size(), -1);
  ctx.cur.assign(graph.nodes.size(), Sharding::Replicated());
  ctx.ann.reserve(graph.nodes.size());
  for (const Node& n : graph.nodes) {
    if (!n.sharding.has_value()) {
      throw InvalidSharding("node %" + std::to_string(n.id) +
                            " has no sharding; propagate annotations first");
    }
    if (!n.sharding->replicated) {
      ValidateSharding(n.shape(), *n.sharding);
      if (n.sharding->total_partitions() != num_devices) {
        throw InvalidSharding(
            "node %" + std::to_string(n.id) + " is tiled over " +
            std::to_string(n.sharding->total_partitions()) +
            " devices but the program targets " + std::to_string(num_devices));
      }
    }
    ctx.ann.push_back(*n.sharding);
  }
  for (const Node& n : graph.nodes) internal::EmitNode(ctx, n);

  SpmdProgram prog;
  prog.num_partitions = num_devices;
  for (const Node& n : graph.nodes) {
    if (n.op == OpKind::kParameter) {
      prog.inputs.push_back({n.name, n.shape(), ctx.ann[n.id]});
    }
  }
  for (int64_t r : graph.Roots()) {
    const Node& sn = graph.node(r);
    if (sn.out_shapes.size() > 1) {
      throw UnsupportedOp(
          "tuple-valued root %" + std::to_string(r) +
          "; project components with get_output before partitioning");
    }
    std::string key = sn.name.empty() ? "%" + std::to_string(r) : sn.name;
    ctx.out.node(ctx.mapped[r]).name = key;
    prog.outputs.push_back({key, sn.shape(), ctx.ann[r]});
  }
  prog.graph = std::move(ctx.out);
  return prog;
}

}  // namespace shardir
