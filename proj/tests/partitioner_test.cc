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

// Partitioning correctness on small hand-built graphs: each case pins both
// the numeric equivalence with the single-device reference and the exact set
// of collectives the lowering is allowed to emit.

#include <cstdint>
#include <map>
#include <string>

#include "doctest.h"
#include "shardir/corpus.h"
#include "shardir/graph.h"
#include "shardir/partitioner.h"
#include "shardir/propagation.h"
#include "shardir/verify.h"

namespace shardir {
namespace {

int64_t Count(const VerifyResult& r, const std::string& op) {
  auto it = r.collective_counts.find(op);
  return it == r.collective_counts.end() ? 0 : it->second;
}

int64_t TotalCollectives(const VerifyResult& r) {
  int64_t total = 0;
  for (const auto& [op, n] : r.collective_counts) total += n;
  return total;
}

TEST_CASE("an elementwise chain partitions without communication") {
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{8, 3}});
  g.node(x).sharding = Sharding::SplitDim(2, 0, 4);
  int64_t y = AddElementwise(g, ElementwiseKind::kMul, {x, x});
  int64_t z = AddElementwise(g, ElementwiseKind::kRelu, {y});
  g.node(z).name = "out";
  VerifyResult r = VerifyPartitioning(g, 4, 7);
  CHECK(r.max_rel_error == 0.0);
  CHECK(TotalCollectives(r) == 0);
}

TEST_CASE("a row sharded matmul partitions without communication") {
  Graph g;
  int64_t a = AddParameter(g, "a", Shape{{8, 5}});
  int64_t b = AddParameter(g, "b", Shape{{5, 6}});
  g.node(a).sharding = Sharding::SplitDim(2, 0, 4);
  g.node(b).sharding = Sharding::Replicated();
  int64_t c = AddEinsum(g, "AB,BC->AC", a, b);
  g.node(c).name = "out";
  VerifyResult r = VerifyPartitioning(g, 4, 11);
  CHECK(r.max_rel_error == 0.0);
  CHECK(TotalCollectives(r) == 0);
}

TEST_CASE("a contracting sharded matmul all_reduces partial products") {
  Graph g;
  int64_t a = AddParameter(g, "a", Shape{{6, 8}});
  int64_t b = AddParameter(g, "b", Shape{{8, 5}});
  g.node(a).sharding = Sharding::SplitDim(2, 1, 4);
  g.node(b).sharding = Sharding::SplitDim(2, 0, 4);
  int64_t c = AddEinsum(g, "AB,BC->AC", a, b);
  g.node(c).name = "out";
  VerifyResult r = VerifyPartitioning(g, 4, 11);
  CHECK(r.max_rel_error < 1e-5);
  CHECK(Count(r, "all_reduce") == 1);
  CHECK(TotalCollectives(r) == 1);
}

TEST_CASE("uneven contracting dims are masked, not truncated") {
  // 7 does not divide by 4; the padded tail rows of the second operand's
  // shard would corrupt the partial sums unless zeroed before the matmul.
  Graph g;
  int64_t a = AddParameter(g, "a", Shape{{6, 7}});
  int64_t b = AddParameter(g, "b", Shape{{7, 5}});
  g.node(a).sharding = Sharding::SplitDim(2, 1, 4);
  g.node(b).sharding = Sharding::Replicated();
  int64_t c = AddEinsum(g, "AB,BC->AC", a, b);
  g.node(c).name = "out";
  VerifyResult r = VerifyPartitioning(g, 4, 13);
  CHECK(r.max_rel_error < 1e-5);
  CHECK(Count(r, "all_reduce") == 1);
}

TEST_CASE("batched einsum keeps the batch dim sharded for free") {
  Graph g;
  int64_t a = AddParameter(g, "a", Shape{{4, 3, 5}});
  int64_t b = AddParameter(g, "b", Shape{{4, 5, 2}});
  g.node(a).sharding = Sharding::SplitDim(3, 0, 4);
  g.node(b).sharding = Sharding::SplitDim(3, 0, 4);
  int64_t c = AddEinsum(g, "BXY,BYZ->BXZ", a, b);
  g.node(c).name = "out";
  VerifyResult r = VerifyPartitioning(g, 4, 17);
  CHECK(r.max_rel_error == 0.0);
  CHECK(TotalCollectives(r) == 0);
}

TEST_CASE("resharding to permuted device ids is a collective_permute") {
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{8, 2}});
  g.node(x).sharding = Sharding::SplitDim(2, 0, 4);
  int64_t y = AddReshape(g, Shape{{8, 2}}, x);
  Sharding s = Sharding::SplitDim(2, 0, 4);
  s.assignment.device_ids = {1, 2, 3, 0};
  g.node(y).sharding = s;
  g.node(y).name = "out";
  VerifyResult r = VerifyPartitioning(g, 4, 19);
  CHECK(r.max_rel_error == 0.0);
  CHECK(Count(r, "collective_permute") == 1);
  CHECK(TotalCollectives(r) == 1);
}

TEST_CASE("moving the sharded dim is a single all_to_all") {
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{8, 8}});
  g.node(x).sharding = Sharding::SplitDim(2, 0, 4);
  int64_t y = AddReshape(g, Shape{{8, 8}}, x);
  g.node(y).sharding = Sharding::SplitDim(2, 1, 4);
  g.node(y).name = "out";
  VerifyResult r = VerifyPartitioning(g, 4, 23);
  CHECK(r.max_rel_error == 0.0);
  CHECK(Count(r, "all_to_all") == 1);
  CHECK(TotalCollectives(r) == 1);
}

TEST_CASE("uneven dim moves pad, exchange, then trim exactly") {
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{6, 7}});
  g.node(x).sharding = Sharding::SplitDim(2, 0, 4);
  int64_t y = AddReshape(g, Shape{{6, 7}}, x);
  g.node(y).sharding = Sharding::SplitDim(2, 1, 4);
  g.node(y).name = "out";
  VerifyResult r = VerifyPartitioning(g, 4, 29);
  CHECK(r.max_rel_error == 0.0);
  CHECK(Count(r, "all_to_all") == 1);
  CHECK(TotalCollectives(r) == 1);
}

TEST_CASE("tiled to replicated is an all_gather plus trim") {
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{10}});
  g.node(x).sharding = Sharding::SplitDim(1, 0, 4);
  int64_t y = AddReshape(g, Shape{{10}}, x);
  g.node(y).sharding = Sharding::Replicated();
  g.node(y).name = "out";
  VerifyResult r = VerifyPartitioning(g, 4, 31);
  CHECK(r.max_rel_error == 0.0);
  CHECK(Count(r, "all_gather") == 1);
  CHECK(TotalCollectives(r) == 1);
}

TEST_CASE("replicated to tiled is a local dynamic_slice, no communication") {
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{10}});
  g.node(x).sharding = Sharding::Replicated();
  int64_t y = AddReshape(g, Shape{{10}}, x);
  g.node(y).sharding = Sharding::SplitDim(1, 0, 4);
  g.node(y).name = "out";
  VerifyResult r = VerifyPartitioning(g, 4, 37);
  CHECK(r.max_rel_error == 0.0);
  CHECK(TotalCollectives(r) == 0);
}

TEST_CASE("uneven reductions mask the padded tail per kind") {
  // The last shard of [15] split 4 ways holds one padding element. Sum needs
  // a zero there; max needs -inf, or any negative-valued input would be
  // beaten by the padding.
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{15}});
  g.node(x).sharding = Sharding::SplitDim(1, 0, 4);
  int64_t r1 = AddReduce(g, ReduceKind::kAdd, {0}, x);
  g.node(r1).name = "sum";
  int64_t r2 = AddReduce(g, ReduceKind::kMax, {0}, x);
  g.node(r2).name = "max";
  VerifyResult r = VerifyPartitioning(g, 4, 41);
  CHECK(r.max_rel_error < 1e-5);
  CHECK(Count(r, "all_reduce") == 2);
  CHECK(TotalCollectives(r) == 2);
}

TEST_CASE("mismatched einsum within budget replicates one operand") {
  CorpusEntry e = BuildCorpusEntry("einsum_gather", 4);
  VerifyResult r = VerifyPartitioning(e.graph, 4, 43, e.options);
  CHECK(r.max_rel_error < 1e-5);
  CHECK(Count(r, "all_gather") == 1);
  CHECK(Count(r, "collective_permute") == 0);
}

TEST_CASE("mismatched einsum over budget rotates shards through a loop") {
  CorpusEntry e = BuildCorpusEntry("einsum_loop", 4);
  VerifyResult r = VerifyPartitioning(e.graph, 4, 47, e.options);
  CHECK(r.max_rel_error < 1e-5);
  CHECK(Count(r, "collective_permute") == 1);  // inside the loop body
  CHECK(Count(r, "all_gather") == 0);
}

TEST_CASE("the memory budget alone flips the mismatched einsum strategy") {
  Graph g;
  int64_t a = AddParameter(g, "a", Shape{{8, 4}});
  int64_t b = AddParameter(g, "b", Shape{{4, 8}});
  g.node(a).sharding = Sharding::SplitDim(2, 0, 4);
  g.node(b).sharding = Sharding::SplitDim(2, 1, 4);
  int64_t c = AddEinsum(g, "AB,BC->AC", a, b);
  g.node(c).name = "out";
  PartitionOptions roomy;
  roomy.memory_budget_bytes = 1 << 20;
  PartitionOptions tight;
  tight.memory_budget_bytes = 16;  // smaller than either full tensor
  VerifyResult gathered = VerifyPartitioning(g, 4, 53, roomy);
  VerifyResult looped = VerifyPartitioning(g, 4, 53, tight);
  CHECK(gathered.max_rel_error < 1e-5);
  CHECK(looped.max_rel_error < 1e-5);
  CHECK(Count(gathered, "all_gather") == 1);
  CHECK(Count(gathered, "collective_permute") == 0);
  CHECK(Count(looped, "all_gather") == 0);
  CHECK(Count(looped, "collective_permute") == 1);
}

TEST_CASE("formatting chains stay sharded across reverse, slice and pad") {
  CorpusEntry e = BuildCorpusEntry("format_chain", 4);
  VerifyResult r = VerifyPartitioning(e.graph, 4, 59, e.options);
  CHECK(r.max_rel_error < 1e-5);
}

TEST_CASE("the per-device program size does not grow with the device count") {
  for (const char* name : {"einsum_contracting", "reduce_uneven", "moe"}) {
    CAPTURE(name);
    std::map<int64_t, int64_t> nodes;
    for (int64_t d : {4, 8, 16}) {
      CorpusEntry e = BuildCorpusEntry(name, d);
      Propagate(e.graph, d);
      SpmdProgram p = PartitionGraph(e.graph, d, e.options);
      nodes[d] = static_cast<int64_t>(p.graph.nodes.size());
    }
    CHECK(nodes[4] == nodes[8]);
    CHECK(nodes[8] == nodes[16]);
  }
}

TEST_CASE("a corrupted shard is detected by the equivalence check") {
  // Negative control: the verifier must notice when one device's input is
  // wrong, otherwise every equivalence result above is vacuous.
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{8, 3}});
  g.node(x).sharding = Sharding::SplitDim(2, 0, 4);
  int64_t y = AddElementwise(g, ElementwiseKind::kMul, {x, x});
  g.node(y).name = "out";
  VerifyResult r = VerifyPartitioning(g, 4, 7, PartitionOptions(), true);
  CHECK(r.max_rel_error > 1e-3);
}

TEST_CASE("partitioned programs bind shard-shaped inputs and outputs") {
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{8, 6}});
  g.node(x).sharding = Sharding::SplitDim(2, 0, 4);
  int64_t y = AddElementwise(g, ElementwiseKind::kRelu, {x});
  g.node(y).name = "out";
  Propagate(g, 4);
  SpmdProgram p = PartitionGraph(g, 4);
  CHECK(p.num_partitions == 4);
  REQUIRE(p.inputs.size() == 1);
  CHECK(p.inputs[0].name == "x");
  CHECK(p.inputs[0].full_shape.dims == std::vector<int64_t>{8, 6});
  CHECK(!p.inputs[0].sharding.replicated);
  REQUIRE(p.outputs.size() == 1);
  CHECK(p.outputs[0].name == "out");
  CHECK(p.outputs[0].sharding.partitions_of_dim(0) == 4);
}

}  // namespace
}  // namespace shardir
