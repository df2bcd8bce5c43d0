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

// Windowed-op lowering. The tiled dim of the input is rebuilt per device as
// the exact base range its output shard needs (PlanHaloExchange), then a
// local convolution reproduces the global windows. Base dilation needs extra
// care because shard boundaries generally fall between dilated positions;
// the three sub-cases below recover exact alignment with constant low
// padding, an output shift, or a per-device kernel rotation.

#include <algorithm>
#include <cstdint>
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

int64_t BaseDilationLimitIndex(int64_t stride, int64_t per_shard_window_count,
                               int64_t i, int64_t window_size, int64_t low_pad,
                               int64_t dilation) {
  return FloorDiv(stride * per_shard_window_count * i + window_size - low_pad +
                      dilation - 1,
                  dilation);
}

HaloExchangeSpec PlanHaloExchange(int64_t input_extent, int64_t output_extent,
                                  int64_t parts, int64_t dim,
                                  const WindowDimConfig& w) {
  const int64_t cb = CeilDiv(input_extent, parts);
  const int64_t oc = CeilDiv(output_extent, parts);
  const int64_t s = w.stride;
  const int64_t dil = w.base_dilation;
  const int64_t lp = w.padding_low;
  const int64_t w_span = (w.size - 1) * w.window_dilation + 1;

  HaloExchangeSpec h;
  h.dim = dim;
  // First base element feeding output row oc*p: ceil((oc*s*p - lp) / dil).
  h.base_start = RationalAffine{oc * s, -lp + dil - 1, dil};
  int64_t span = 1;
  for (int64_t p = 0; p < parts; ++p) {
    int64_t limit;
    if (dil == 1) {
      // One past the last base element of the shard's last window.
      limit = oc * s * p + (oc - 1) * s + w_span - lp;
    } else {
      // Conservative bound; always covers the exact requirement.
      limit = BaseDilationLimitIndex(s, oc, p + 1, w_span, lp, dil);
    }
    span = std::max(span, limit - h.base_start.At(p));
  }
  h.base_span = span;
  h.left_halo = RationalAffine{cb * dil - oc * s, lp, dil};
  h.right_halo =
      RationalAffine{oc * s - cb * dil, -lp + dil - 1 + dil * (span - cb), dil};
  h.max_left = 0;
  h.max_right = 0;
  for (int64_t p = 0; p < parts; ++p) {
    h.max_left = std::max(h.max_left, h.left_halo.At(p));
    h.max_right = std::max(h.max_right, h.right_halo.At(p));
  }
  return h;
}

namespace internal {
namespace {

void ExpectLowering(bool cond, const char* what) {
  if (!cond) {
    throw InvalidAttribute(std::string("windowed lowering invariant failed: ") +
                           what);
  }
}

// Low padding the local conv needs so device p's first window lines up with
// global output row oc*p: dil*base_start(p) - (oc*s*p - lp).
int64_t LocalLowPad(const HaloExchangeSpec& plan, int64_t oc, int64_t s,
                    int64_t lp, int64_t dil, int64_t p) {
  return dil * plan.base_start.At(p) - (oc * s * p - lp);
}

void ReplicatedConvFallback(PartitionContext& ctx, const Node& n,
                            int64_t kernel) {
  int64_t in = OperandAs(ctx, n.operands[0], Sharding::Replicated());
  int64_t v = AddConvolution(ctx.out, in, kernel, n.window);
  Finish(ctx, n, v, Sharding::Replicated());
}

}  // namespace

void PartitionConvolutionNode(PartitionContext& ctx, const Node& n) {
  Graph& g = ctx.out;
  const int64_t data_op = n.operands[0];
  const int64_t ker_op = n.operands[1];
  const int64_t num_devices = ctx.num_devices;

  const Sharding& ker_ann = ctx.ann.at(ker_op);
  if (!ker_ann.replicated) {
    for (int64_t d : ker_ann.tiled_dims()) {
      if (n.window[d].window_dilation > 1) {
        throw UnsupportedWindowConfig(
            "kernel partitioned on window-dilated dim " + std::to_string(d));
      }
    }
  }
  int64_t kernel = OperandAs(ctx, ker_op, Sharding::Replicated());

  const Sharding xs = ctx.cur.at(data_op);
  if (xs.replicated || !IsNaturalOneDim(xs, num_devices)) {
    ReplicatedConvFallback(ctx, n, kernel);
    return;
  }
  const int64_t t = TiledDim(xs);
  const WindowDimConfig& wt = n.window[t];
  const Shape& in_full = ctx.src->node(data_op).shape();
  const int64_t in_n = in_full.dims[t];
  const int64_t out_n = n.shape().dims[t];
  if (in_n <= 0 || out_n <= 0) {
    ReplicatedConvFallback(ctx, n, kernel);
    return;
  }
  const int64_t cb = CeilDiv(in_n, num_devices);
  const int64_t oc = CeilDiv(out_n, num_devices);
  const int64_t s = wt.stride;
  const int64_t dil = wt.base_dilation;
  const int64_t lp = wt.padding_low;
  const int64_t w_span = (wt.size - 1) * wt.window_dilation + 1;

  HaloExchangeSpec plan = PlanHaloExchange(in_n, out_n, num_devices, t, wt);
  const int64_t bspan = plan.base_span;
  const bool trivial = wt.size == 1 && s == 1 && lp == 0 &&
                       wt.padding_high == 0 && dil == 1 &&
                       wt.window_dilation == 1;
  int64_t seg = EmitGatherRange(ctx, ctx.mapped.at(data_op), t, cb,
                                plan.base_start, bspan, in_n,
                                /*mask_fetched=*/!trivial);
  std::vector<WindowDimConfig> cfg = n.window;
  int64_t v;
  if (dil == 1) {
    // The fetched range starts exactly at the first window: no local padding.
    cfg[t] = WindowDimConfig{wt.size, s, 0, 0, 1, wt.window_dilation};
    v = AddConvolution(g, seg, kernel, std::move(cfg));
  } else if ((s * oc) % dil == 0) {
    // Per-device low padding is constant: one static conv config works
    // everywhere.
    const int64_t pl = LocalLowPad(plan, oc, s, lp, dil, 0);
    for (int64_t p = 0; p < num_devices; ++p) {
      ExpectLowering(LocalLowPad(plan, oc, s, lp, dil, p) == pl,
                     "low pad not constant");
    }
    const int64_t ph = s * (oc - 1) + w_span - ((bspan - 1) * dil + 1) - pl;
    cfg[t] = WindowDimConfig{wt.size, s, pl, ph, dil, wt.window_dilation};
    v = AddConvolution(g, seg, kernel, std::move(cfg));
  } else if (s == 1) {
    // Stride 1: pad with the worst-case low pad, compute a few extra rows,
    // then shift the output window per device.
    int64_t pl = 0;
    for (int64_t p = 0; p < num_devices; ++p) {
      pl = std::max(pl, LocalLowPad(plan, oc, s, lp, dil, p));
    }
    const int64_t target = oc + dil - 1;
    const int64_t ph = (target - 1) + w_span - ((bspan - 1) * dil + 1) - pl;
    cfg[t] = WindowDimConfig{wt.size, 1, pl, ph, dil, wt.window_dilation};
    v = AddConvolution(g, seg, kernel, std::move(cfg));
    ExpectLowering(g.node(v).shape().dims[t] == target,
                   "shifted output row count");
    // skip(p) = pl - LocalLowPad(p) = pl - lp + oc*p - dil*base_start(p).
    int64_t a = EmitRational(g, EmitPid(g), plan.base_start);
    int64_t skip = EmitBin(g, ElementwiseKind::kSub,
                           EmitAffine(g, EmitPid(g), oc, pl - lp),
                           EmitAffine(g, a, dil, 0));
    const Shape& cs = g.node(v).shape();
    std::vector<int64_t> starts(cs.rank());
    for (int64_t r = 0; r < cs.rank(); ++r) starts[r] = EmitConst(g, 0);
    starts[t] = skip;
    std::vector<int64_t> sizes = cs.dims;
    sizes[t] = oc;
    v = AddDynamicSlice(g, v, std::move(starts), std::move(sizes));
  } else {
    // General case: rotate the kernel per device. A kernel padded by dil-1
    // on both sides and sliced at offset dil-1-m(p) behaves like the original
    // kernel shifted m(p) positions, which absorbs the per-device alignment
    // difference m(p) = max_q LocalLowPad(q) - LocalLowPad(p) in [0, dil).
    int64_t pl = 0;
    for (int64_t p = 0; p < num_devices; ++p) {
      pl = std::max(pl, LocalLowPad(plan, oc, s, lp, dil, p));
    }
    const Shape ker_shape = g.node(kernel).shape();
    const int64_t rank = ker_shape.rank();
    int64_t k2 = kernel;
    if (wt.window_dilation > 1) {
      // Materialize the window dilation so the rotation acts on real taps.
      std::vector<int64_t> lo(rank, 0), hi(rank, 0), ip(rank, 0);
      ip[t] = wt.window_dilation - 1;
      k2 = AddPad(g, k2, std::move(lo), std::move(hi), std::move(ip));
    }
    {
      std::vector<int64_t> lo(rank, 0), hi(rank, 0), ip(rank, 0);
      lo[t] = dil - 1;
      hi[t] = dil - 1;
      k2 = AddPad(g, k2, std::move(lo), std::move(hi), std::move(ip));
    }
    int64_t a = EmitRational(g, EmitPid(g), plan.base_start);
    // m(p) = pl - (dil*base_start(p) - oc*s*p + lp).
    int64_t llp = EmitBin(g, ElementwiseKind::kSub, EmitAffine(g, a, dil, 0),
                          EmitAffine(g, EmitPid(g), oc * s, -lp));
    int64_t m = EmitAffine(g, llp, -1, pl);
    std::vector<int64_t> kstarts(rank);
    for (int64_t r = 0; r < rank; ++r) kstarts[r] = EmitConst(g, 0);
    kstarts[t] = EmitAffine(g, m, -1, dil - 1);
    const int64_t w_eff = w_span + dil - 1;
    std::vector<int64_t> ksizes = g.node(k2).shape().dims;
    ksizes[t] = w_eff;
    int64_t k3 = AddDynamicSlice(g, k2, std::move(kstarts), std::move(ksizes));
    const int64_t ph = s * (oc - 1) + w_eff - ((bspan - 1) * dil + 1) - pl;
    cfg[t] = WindowDimConfig{w_eff, s, pl, ph, dil, 1};
    v = AddConvolution(g, seg, k3, std::move(cfg));
  }
  ExpectLowering(g.node(v).shape().dims[t] == oc, "local output row count");
  Finish(ctx, n, v,
         Sharding::SplitDim(n.shape().rank(), t, num_devices));
}

}  // namespace internal
}  // namespace shardir
