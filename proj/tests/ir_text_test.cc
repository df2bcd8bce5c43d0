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

#include <limits>
#include <memory>
#include <string>

#include "doctest.h"
#include "shardir/common.h"
#include "shardir/graph.h"
#include "shardir/ir_text.h"
#include "shardir/sharding.h"

namespace shardir {
namespace {

// A graph touching every op kind and attribute syntax.
Graph KitchenSinkGraph() {
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{4, 6}});
  g.node(x).sharding = Sharding::SplitDim(2, 0, 2);
  int64_t y = AddParameter(g, "y", Shape{{4, 6}});
  g.node(y).sharding = Sharding::Replicated();
  int64_t c = AddConstant(g, Shape{{2}}, {1.5f, -2.25f});
  int64_t inf = AddConstant(
      g, Shape{{2}},
      {std::numeric_limits<float>::infinity(),
       -std::numeric_limits<float>::infinity()});
  (void)inf;
  int64_t iota = AddIota(g, Shape{{4, 6}}, 1);
  int64_t sum = AddElementwise(g, ElementwiseKind::kAdd, {x, y});
  int64_t cmp = AddCompare(g, CompareKind::kLt, sum, iota);
  int64_t sel = AddElementwise(g, ElementwiseKind::kSelect, {cmp, x, y});
  int64_t ein = AddEinsum(g, "AB,BC->AC", sel,
                          AddParameter(g, "w", Shape{{6, 3}}));
  int64_t red = AddReduce(g, ReduceKind::kMax, {1}, ein);
  int64_t soft = AddSoftmax(g, 0, red);
  int64_t cs = AddCumsum(g, 0, true, soft);
  int64_t tk = AddTopK(g, 2, 0, cs);
  int64_t val = AddGetOutput(g, tk, 0);
  int64_t idx = AddGetOutput(g, tk, 1);
  int64_t oh = AddOneHot(g, 4, 1, idx);
  int64_t rs = AddReshape(g, Shape{{8}}, oh);
  int64_t bc = AddBroadcast(g, Shape{{8, 2}}, AddScalarConstant(g, 3.0f));
  int64_t pad = AddPad(g, bc, {1, 0}, {0, 1}, {1, 0});
  int64_t sl = AddSlice(g, pad, {0, 0}, {8, 2}, {2, 1});
  int64_t rev = AddReverse(g, {0}, sl);
  (void)rev;
  int64_t conv = AddConvolution(
      g, rs, AddConstant(g, Shape{{3}}, {1.0f, 2.0f, 1.0f}),
      {WindowDimConfig{3, 2, 1, 1, 2, 1}});
  int64_t ds = AddDynamicSlice(g, conv, {AddScalarConstant(g, 1.0f)}, {2});
  int64_t dus = AddDynamicUpdateSlice(g, conv, ds,
                                      {AddScalarConstant(g, 0.0f)});
  int64_t pid = AddPartitionId(g);
  (void)pid;
  int64_t ar = AddAllReduce(g, ReduceKind::kAdd, dus);
  int64_t ag = AddAllGather(g, ar, 0, 2);
  int64_t aa = AddAllToAll(g, AddReshape(g, Shape{{2, 6}}, ag), 0, 1, 2);
  int64_t cp = AddCollectivePermute(g, aa, {{0, 1}, {1, 0}});
  (void)cp;

  auto body = std::make_shared<Graph>();
  int64_t p0 = AddLoopParam(*body, 0, Shape{{2, 6}});
  int64_t li = AddLoopIndex(*body);
  int64_t step = AddElementwise(
      *body, ElementwiseKind::kAdd,
      {p0, AddBroadcast(*body, Shape{{2, 6}}, li)});
  AddYield(*body, {step});
  int64_t loop = AddShardedLoop(g, {aa}, 3, body);
  int64_t out = AddGetOutput(g, loop, 0);
  g.node(out).name = "out";
  int64_t rel = AddElementwise(g, ElementwiseKind::kRelu, {AddReshape(
      g, Shape{{12}}, out)});
  int64_t fl = AddElementwise(g, ElementwiseKind::kFloor, {rel});
  int64_t ex = AddElementwise(g, ElementwiseKind::kExp, {fl});
  int64_t mx = AddElementwise(g, ElementwiseKind::kMax, {ex, ex});
  int64_t dv = AddElementwise(g, ElementwiseKind::kDiv, {mx, mx});
  int64_t sb = AddElementwise(g, ElementwiseKind::kSub, {dv, dv});
  int64_t ml = AddElementwise(g, ElementwiseKind::kMul, {sb, sb});
  g.node(ml).name = "tail";
  return g;
}

TEST_CASE("serialize-parse round trip is byte stable") {
  Graph g = KitchenSinkGraph();
  std::string once = SerializeGraph(g);
  Graph parsed = ParseGraph(once);
  std::string twice = SerializeGraph(parsed);
  CHECK(once == twice);
  CHECK(parsed.nodes.size() == g.nodes.size());
}

TEST_CASE("infinite constants survive the text form") {
  Graph g;
  AddConstant(g, Shape{{3}},
              {std::numeric_limits<float>::infinity(),
               -std::numeric_limits<float>::infinity(), 0.5f});
  Graph parsed = ParseGraph(SerializeGraph(g));
  const Node& n = parsed.nodes[0];
  CHECK(n.literal[0] == std::numeric_limits<float>::infinity());
  CHECK(n.literal[1] == -std::numeric_limits<float>::infinity());
  CHECK(n.literal[2] == 0.5f);
}

TEST_CASE("shardings round trip") {
  Graph g;
  int64_t x = AddParameter(g, "x", Shape{{4, 8}});
  g.node(x).sharding = Sharding::Tiled(DeviceAssignment{{2, 2}, {3, 1, 2, 0}});
  int64_t y = AddElementwise(g, ElementwiseKind::kRelu, {x});
  g.node(y).sharding = Sharding::Replicated();
  Graph parsed = ParseGraph(SerializeGraph(g));
  REQUIRE(parsed.nodes[0].sharding.has_value());
  CHECK(parsed.nodes[0].sharding->assignment.device_ids ==
        std::vector<int64_t>{3, 1, 2, 0});
  CHECK(parsed.nodes[0].sharding->assignment.dims ==
        std::vector<int64_t>{2, 2});
  REQUIRE(parsed.nodes[1].sharding.has_value());
  CHECK(parsed.nodes[1].sharding->replicated);
}

TEST_CASE("comments and blank lines are skipped") {
  std::string text =
      "// leading comment\n"
      "\n"
      "%0 = parameter name=\"x\" : [2,2]\n"
      "# another comment\n"
      "%1 = relu (%0) : [2,2]\n";
  Graph g = ParseGraph(text);
  CHECK(g.nodes.size() == 2);
  CHECK(g.nodes[1].elem_kind == ElementwiseKind::kRelu);
}

TEST_CASE("syntax errors carry line and column") {
  try {
    ParseGraph("%0 = parameter name=\"x\" : [2,2]\n%1 = bogus_op (%0) : [2,2]\n");
    FAIL("expected SyntaxError");
  } catch (const SyntaxError& e) {
    CHECK(std::string(e.what()).find("2:") != std::string::npos);
  }
}

TEST_CASE("forward references are rejected") {
  CHECK_THROWS_AS(ParseGraph("%0 = relu (%1) : [2]\n%1 = parameter "
                             "name=\"x\" : [2]\n"),
                  SyntaxError);
}

TEST_CASE("duplicate ids are rejected") {
  CHECK_THROWS_AS(ParseGraph("%0 = parameter name=\"x\" : [2]\n%0 = relu "
                             "(%0) : [2]\n"),
                  SyntaxError);
}

}  // namespace
}  // namespace shardir
