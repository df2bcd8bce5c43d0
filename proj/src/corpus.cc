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

#include "shardir/corpus.h"

#include <cstdint>
#include <string>
#include <vector>

#include "shardir/common.h"
#include "shardir/moe.h"
#include "shardir/sharding.h"

namespace shardir {
namespace {

Sharding Split0(int64_t rank, int64_t d) {
  return Sharding::SplitDim(rank, 0, d);
}

CorpusEntry ElementwiseChain(int64_t d) {
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{4 * d, 6}});
  g.node(x).sharding = Split0(2, d);
  int64_t y = AddParameter(g, "y", Shape{{4 * d, 6}});
  int64_t t1 = AddElementwise(g, ElementwiseKind::kAdd, {x, y});
  int64_t t2 = AddElementwise(g, ElementwiseKind::kMul, {t1, x});
  int64_t t3 = AddElementwise(g, ElementwiseKind::kRelu, {t2});
  int64_t lt = AddCompare(g, CompareKind::kLt, x, y);
  int64_t sel = AddElementwise(g, ElementwiseKind::kSelect, {lt, t3, y});
  g.node(sel).name = "out";
  return {"elementwise_chain", std::move(g), PartitionOptions()};
}

CorpusEntry EinsumContracting(int64_t d) {
  Graph g;
  int64_t a = AddParameter(g, "a", Shape{{3, 4 * d}});
  g.node(a).sharding = Sharding::SplitDim(2, 1, d);
  int64_t b = AddParameter(g, "b", Shape{{4 * d, 5}});
  g.node(b).sharding = Split0(2, d);
  int64_t out = AddEinsum(g, "AB,BC->AC", a, b);
  g.node(out).sharding = Sharding::Replicated();
  g.node(out).name = "out";
  return {"einsum_contracting", std::move(g), PartitionOptions()};
}

CorpusEntry EinsumDispatch(int64_t d) {
  Graph g;
  int64_t lhs = AddParameter(g, "lhs", Shape{{d, 2, d, 2}});
  g.node(lhs).sharding = Split0(4, d);
  int64_t rhs = AddParameter(g, "rhs", Shape{{d, 2, 3}});
  g.node(rhs).sharding = Split0(3, d);
  int64_t out = AddEinsum(g, "GSEC,GSM->EGCM", lhs, rhs);
  g.node(out).sharding = Split0(4, d);
  g.node(out).name = "out";
  return {"einsum_dispatch", std::move(g), PartitionOptions()};
}

CorpusEntry EinsumGather(int64_t d) {
  Graph g;
  int64_t lhs = AddParameter(g, "lhs", Shape{{2 * d, 4}});
  g.node(lhs).sharding = Split0(2, d);
  int64_t rhs = AddParameter(g, "rhs", Shape{{4, 8 * d}});
  g.node(rhs).sharding = Sharding::SplitDim(2, 1, d);
  int64_t out = AddEinsum(g, "AB,BC->AC", lhs, rhs);
  g.node(out).sharding = Sharding::SplitDim(2, 1, d);
  g.node(out).name = "out";
  return {"einsum_gather", std::move(g), PartitionOptions()};
}

CorpusEntry EinsumLoop(int64_t d) {
  Graph g;
  int64_t lhs = AddParameter(g, "lhs", Shape{{4 * d, 3}});
  g.node(lhs).sharding = Split0(2, d);
  int64_t rhs = AddParameter(g, "rhs", Shape{{3, 4 * d}});
  g.node(rhs).sharding = Sharding::SplitDim(2, 1, d);
  int64_t out = AddEinsum(g, "AB,BC->AC", lhs, rhs);
  g.node(out).sharding = Split0(2, d);
  g.node(out).name = "out";
  PartitionOptions options;
  options.memory_budget_bytes = 1;  // force the rotating-loop strategy
  return {"einsum_loop", std::move(g), options};
}

CorpusEntry ReduceUneven(int64_t d) {
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{15}});
  g.node(x).sharding = Split0(1, d);
  int64_t sum = AddReduce(g, ReduceKind::kAdd, {0}, x);
  g.node(sum).name = "sum";
  int64_t max = AddReduce(g, ReduceKind::kMax, {0}, x);
  g.node(max).name = "max";
  return {"reduce_uneven", std::move(g), PartitionOptions()};
}

CorpusEntry FormatChain(int64_t d) {
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{8 * d}});
  g.node(x).sharding = Split0(1, d);
  int64_t rev = AddReverse(g, {0}, x);
  g.node(rev).sharding = Split0(1, d);
  int64_t sl = AddSlice(g, rev, {2}, {4 * d + 2}, {2});  // [2D]
  g.node(sl).sharding = Split0(1, d);
  int64_t pad = AddPad(g, sl, {1}, {2}, {1});  // [4D+2]
  g.node(pad).sharding = Split0(1, d);
  g.node(pad).name = "out";
  return {"format_chain", std::move(g), PartitionOptions()};
}

CorpusEntry ReshapeUneven(int64_t d) {
  // Uneven-to-even requires the input extent to land strictly inside the last
  // shard, which only works out for even device counts; odd counts fall back
  // to an evenly split instance of the same reshape.
  Graph g;
  int64_t rows = (d % 2 == 0) ? 3 * d / 2 : 3 * d;
  int64_t x = AddParameter(g, "x", Shape{{rows, 2}});
  g.node(x).sharding = Split0(2, d);
  int64_t out = AddReshape(g, Shape{{2 * rows}}, x);
  g.node(out).sharding = Split0(1, d);
  g.node(out).name = "out";
  return {"reshape_uneven", std::move(g), PartitionOptions()};
}

CorpusEntry ConvEntry(const std::string& name, int64_t input_extent,
                      int64_t kernel_extent, WindowDimConfig window,
                      int64_t d) {
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{input_extent}});
  g.node(x).sharding = Split0(1, d);
  int64_t k = AddParameter(g, "kernel", Shape{{kernel_extent}});
  g.node(k).sharding = Sharding::Replicated();
  int64_t out = AddConvolution(g, x, k, {window});
  g.node(out).sharding = Split0(1, d);
  g.node(out).name = "out";
  return {name, std::move(g), PartitionOptions()};
}

CorpusEntry MoeEntry(int64_t d) {
  MoEConfig config(/*groups=*/d, /*group_size=*/8, /*experts=*/d,
                   /*model_dim=*/4, /*hidden_dim=*/8, /*aux_weight=*/0.01);
  return {"moe", BuildMoeGraph(config, d), PartitionOptions()};
}

}  // namespace

CorpusEntry BuildCorpusEntry(const std::string& name, int64_t num_devices) {
  const int64_t d = num_devices;
  if (d < 1) {
    throw InvalidAttribute("device count must be positive, got " +
                           std::to_string(d));
  }
  if (name == "elementwise_chain") return ElementwiseChain(d);
  if (name == "einsum_contracting") return EinsumContracting(d);
  if (name == "einsum_dispatch") return EinsumDispatch(d);
  if (name == "einsum_gather") return EinsumGather(d);
  if (name == "einsum_loop") return EinsumLoop(d);
  if (name == "reduce_uneven") return ReduceUneven(d);
  if (name == "format_chain") return FormatChain(d);
  if (name == "reshape_uneven") return ReshapeUneven(d);
  if (name == "conv_halo") {
    return ConvEntry("conv_halo", 3 * d, 3, WindowDimConfig{3, 2, 1, 1, 1, 1},
                     d);
  }
  if (name == "conv_base_dilation_1") {
    // Per-shard window count times stride divides the dilation evenly, so the
    // shards share one constant low padding.
    return ConvEntry("conv_base_dilation_1", 2 * d, 3,
                     WindowDimConfig{3, 2, 1, 1, 2, 1}, d);
  }
  if (name == "conv_base_dilation_2") {
    // Unit stride: per-shard offsets are absorbed by one dynamic_slice.
    return ConvEntry("conv_base_dilation_2", 2 * d, 2,
                     WindowDimConfig{2, 1, 1, 2, 2, 1}, d);
  }
  if (name == "conv_base_dilation_3") {
    // General case: kernel rotation with non-unit stride and dilation.
    return ConvEntry("conv_base_dilation_3", 2 * d, 2,
                     WindowDimConfig{2, 2, 2, 2, 3, 1}, d);
  }
  if (name == "conv_window_dilation") {
    return ConvEntry("conv_window_dilation", 4 * d, 3,
                     WindowDimConfig{3, 1, 2, 2, 1, 2}, d);
  }
  if (name == "moe") return MoeEntry(d);
  throw UnknownPattern("no corpus entry named " + name);
}

std::vector<std::string> CorpusNames() {
  return {"elementwise_chain",   "einsum_contracting",  "einsum_dispatch",
          "einsum_gather",       "einsum_loop",         "reduce_uneven",
          "format_chain",        "reshape_uneven",      "conv_halo",
          "conv_base_dilation_1", "conv_base_dilation_2", "conv_base_dilation_3",
          "conv_window_dilation", "moe"};
}

std::vector<CorpusEntry> BuildCorpus(int64_t num_devices) {
  std::vector<CorpusEntry> out;
  for (const std::string& name : CorpusNames()) {
    out.push_back(BuildCorpusEntry(name, num_devices));
  }
  return out;
}

}  // namespace shardir
