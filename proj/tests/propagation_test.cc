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

#include <cstdint>

#include "doctest.h"
#include "shardir/common.h"
#include "shardir/graph.h"
#include "shardir/partitioner.h"
#include "shardir/propagation.h"
#include "shardir/sharding.h"

namespace shardir {
namespace {

bool SameSharding(const Sharding& a, const Sharding& b) {
  if (a.replicated != b.replicated) return false;
  if (a.replicated) return true;
  return a.assignment.dims == b.assignment.dims &&
         a.assignment.device_ids == b.assignment.device_ids;
}

TEST_CASE("annotation flows forward through elementwise chains") {
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{8, 4}});
  g.node(x).sharding = Sharding::SplitDim(2, 0, 4);
  int64_t y = AddParameter(g, "y", Shape{{8, 4}});
  int64_t a = AddElementwise(g, ElementwiseKind::kAdd, {x, y});
  int64_t r = AddElementwise(g, ElementwiseKind::kRelu, {a});
  Propagate(g, 4);
  for (int64_t id : {x, y, a, r}) {
    REQUIRE(g.node(id).sharding.has_value());
    CHECK(SameSharding(*g.node(id).sharding, Sharding::SplitDim(2, 0, 4)));
  }
}

TEST_CASE("annotation flows backward from the root") {
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{8, 4}});
  int64_t r = AddElementwise(g, ElementwiseKind::kRelu, {x});
  int64_t s = AddElementwise(g, ElementwiseKind::kExp, {r});
  g.node(s).sharding = Sharding::SplitDim(2, 1, 2);
  Propagate(g, 2);
  CHECK(SameSharding(*g.node(x).sharding, Sharding::SplitDim(2, 1, 2)));
  CHECK(SameSharding(*g.node(r).sharding, Sharding::SplitDim(2, 1, 2)));
}

TEST_CASE("unannotated graphs default to replicated") {
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{4}});
  int64_t r = AddElementwise(g, ElementwiseKind::kRelu, {x});
  Propagate(g, 4);
  CHECK(g.node(x).sharding->replicated);
  CHECK(g.node(r).sharding->replicated);
}

TEST_CASE("conflicting annotations in one elementwise component throw") {
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{8, 4}});
  g.node(x).sharding = Sharding::SplitDim(2, 0, 2);
  int64_t r = AddElementwise(g, ElementwiseKind::kRelu, {x});
  g.node(r).sharding = Sharding::SplitDim(2, 1, 2);
  CHECK_THROWS_AS(Propagate(g, 2), ConflictingAnnotations);
}

TEST_CASE("identical annotations in one component are not a conflict") {
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{8, 4}});
  g.node(x).sharding = Sharding::SplitDim(2, 0, 2);
  int64_t r = AddElementwise(g, ElementwiseKind::kRelu, {x});
  g.node(r).sharding = Sharding::SplitDim(2, 0, 2);
  CHECK_NOTHROW(Propagate(g, 2));
}

TEST_CASE("einsum absorbs mismatched operand and result shardings") {
  Graph g;
  int64_t a = AddParameter(g, "a", Shape{{8, 4}});
  g.node(a).sharding = Sharding::SplitDim(2, 0, 2);
  int64_t b = AddParameter(g, "b", Shape{{4, 6}});
  g.node(b).sharding = Sharding::SplitDim(2, 1, 2);
  int64_t e = AddEinsum(g, "AB,BC->AC", a, b);
  int64_t r = AddElementwise(g, ElementwiseKind::kRelu, {e});
  g.node(r).sharding = Sharding::Replicated();
  // Mismatched pins on the two operands and the user do not conflict: the
  // einsum boundary separates the value components. Pins survive untouched.
  CHECK_NOTHROW(Propagate(g, 2));
  CHECK(SameSharding(*g.node(a).sharding, Sharding::SplitDim(2, 0, 2)));
  CHECK(SameSharding(*g.node(b).sharding, Sharding::SplitDim(2, 1, 2)));
  CHECK(g.node(r).sharding->replicated);
  CHECK(g.node(e).sharding.has_value());
}

TEST_CASE("einsum output prefers the batch letter's sharding") {
  Graph g;
  int64_t a = AddParameter(g, "a", Shape{{6, 8, 4}});
  g.node(a).sharding = Sharding::SplitDim(3, 0, 2);
  int64_t b = AddParameter(g, "b", Shape{{6, 4, 2}});
  int64_t e = AddEinsum(g, "BXY,BYZ->BXZ", a, b);
  Propagate(g, 2);
  REQUIRE(g.node(e).sharding.has_value());
  CHECK(SameSharding(*g.node(e).sharding, Sharding::SplitDim(3, 0, 2)));
}

TEST_CASE("einsum output falls back to a non-contracting letter") {
  Graph g;
  int64_t a = AddParameter(g, "a", Shape{{8, 4}});
  g.node(a).sharding = Sharding::SplitDim(2, 0, 2);
  int64_t b = AddParameter(g, "b", Shape{{4, 6}});
  int64_t e = AddEinsum(g, "AB,BC->AC", a, b);
  Propagate(g, 2);
  // A survives into the output; the result keeps its tiling.
  CHECK(SameSharding(*g.node(e).sharding, Sharding::SplitDim(2, 0, 2)));
}

TEST_CASE("reduce drops the reduced dim from the sharding") {
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{8, 4}});
  g.node(x).sharding = Sharding::SplitDim(2, 0, 2);
  int64_t r = AddReduce(g, ReduceKind::kAdd, {1}, x);
  Propagate(g, 2);
  REQUIRE(g.node(r).sharding.has_value());
  CHECK(SameSharding(*g.node(r).sharding, Sharding::SplitDim(1, 0, 2)));
}

TEST_CASE("every node ends with a sharding that uses num_devices") {
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{12}});
  g.node(x).sharding = Sharding::SplitDim(1, 0, 3);
  int64_t p = AddPad(g, x, {1}, {1}, {0});
  int64_t s = AddSlice(g, p, {0}, {14}, {2});
  int64_t r = AddReverse(g, {0}, s);
  int64_t rs = AddReshape(g, Shape{{7}}, r);
  Propagate(g, 3);
  for (int64_t id : {x, p, s, r, rs}) {
    REQUIRE(g.node(id).sharding.has_value());
    const Sharding& sh = *g.node(id).sharding;
    if (!sh.replicated) CHECK(sh.total_partitions() == 3);
  }
}

TEST_CASE("partitioning rejects shardings with the wrong device count") {
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{8}});
  g.node(x).sharding = Sharding::SplitDim(1, 0, 2);
  Propagate(g, 2);
  CHECK_THROWS_AS(PartitionGraph(g, 4), InvalidSharding);
}

TEST_CASE("partitioning requires every node to be annotated") {
  Graph g;
  AddParameter(g, "x", Shape{{8}});
  CHECK_THROWS_AS(PartitionGraph(g, 2), InvalidSharding);
}

}  // namespace
}  // namespace shardir
