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

#ifndef SHARDIR_GRAPH_H_
#define SHARDIR_GRAPH_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shardir/common.h"
#include "shardir/shape.h"
#include "shardir/sharding.h"

namespace shardir {

enum class OpKind {
  kParameter,
  kConstant,
  kIota,
  kElementwise,
  kEinsum,
  kConvolution,
  kPad,
  kSlice,
  kReshape,
  kReverse,
  kReduce,
  kCumsum,
  kTopK,
  kSoftmax,
  kOneHot,
  kDynamicSlice,
  kBroadcast,
  // Ops below appear only in partitioned programs.
  kPartitionId,
  kDynamicUpdateSlice,
  kAllReduce,
  kAllGather,
  kAllToAll,
  kCollectivePermute,
  kShardedLoop,
  kLoopParam,
  kLoopIndex,
  kYield,
  kGetOutput,
};

enum class ElementwiseKind {
  kAdd,
  kSub,
  kMul,
  kDiv,
  kMax,
  kExp,
  kRelu,
  kSelect,
  kCompare,
  kFloor,
};

enum class CompareKind { kLt, kLe, kGt, kGe, kEq, kNe };

enum class ReduceKind { kAdd, kMax, kMin };

// Per-dimension window configuration for Convolution. Every dimension of the
// operand is windowed; a dimension with size=1, stride=1, no padding and no
// dilation passes through unchanged.
struct WindowDimConfig {
  int64_t size = 1;
  int64_t stride = 1;
  int64_t padding_low = 0;
  int64_t padding_high = 0;
  int64_t base_dilation = 1;
  int64_t window_dilation = 1;

  bool operator==(const WindowDimConfig&) const = default;
};

struct Graph;

// Single node. Attribute fields are populated per op kind; unused fields stay
// at their defaults. out_shapes has one entry for every op except kTopK and
// kShardedLoop, whose results are tuples projected by kGetOutput.
struct Node {
  int64_t id = -1;
  OpKind op = OpKind::kParameter;
  std::vector<int64_t> operands;
  std::vector<Shape> out_shapes;
  std::optional<Sharding> sharding;  // annotation; absent until propagated
  std::string name;                  // optional; parameters require it

  ElementwiseKind elem_kind = ElementwiseKind::kAdd;
  CompareKind cmp_kind = CompareKind::kLt;
  ReduceKind reduce_kind = ReduceKind::kAdd;
  std::string einsum_spec;
  std::vector<WindowDimConfig> window;
  std::vector<int64_t> pad_low, pad_high, pad_interior;
  std::vector<int64_t> slice_starts, slice_limits, slice_strides;
  std::vector<int64_t> dims;           // reduce/reverse dims
  int64_t dim = 0;                     // iota/cumsum/topk/softmax/one_hot axis
  int64_t k = 0;                       // topk
  int64_t depth = 0;                   // one_hot
  bool exclusive = false;              // cumsum
  std::vector<int64_t> dynamic_sizes;  // dynamic_slice result extents
  std::vector<float> literal;          // constant payload
  int64_t index = 0;                   // get_output/loop_param projection
  int64_t trips = 0;                   // sharded_loop iteration count
  std::vector<std::pair<int64_t, int64_t>> pairs;  // collective_permute
  int64_t split_dim = 0, concat_dim = 0;           // all_to_all
  std::vector<std::vector<int64_t>> groups;        // collective subsets
  std::shared_ptr<Graph> body;                     // sharded_loop body

  const Shape& shape() const { return out_shapes.at(0); }
};

struct Graph {
  std::vector<Node> nodes;

  Node& node(int64_t id) { return nodes.at(id); }
  const Node& node(int64_t id) const { return nodes.at(id); }

  int64_t Add(Node n) {
    n.id = static_cast<int64_t>(nodes.size());
    nodes.push_back(std::move(n));
    return nodes.back().id;
  }

  // Nodes that no other node consumes, in id order. These are the graph's
  // outputs.
  std::vector<int64_t> Roots() const;

  // Total node count including loop bodies.
  int64_t NodeCount() const;
};

std::string OpKindToString(OpKind k);
std::string ElementwiseKindToString(ElementwiseKind k);
std::string CompareKindToString(CompareKind k);
std::string ReduceKindToString(ReduceKind k);

// Computes the result shape(s) of `node` given its graph context. Throws
// ShapeMismatch / InvalidAttribute / UnknownOperand on inconsistent input.
std::vector<Shape> InferShapes(const Graph& graph, const Node& node);

// Structural diagnostics: unknown operands, attribute/shape inconsistencies,
// einsum spec errors. Empty result means the graph is well formed. Validation
// reports all problems instead of stopping at the first.
std::vector<std::string> Validate(const Graph& graph);

// --- Einsum spec handling -------------------------------------------------
// Specs are two-operand: "GSEC,GSM->EGCM". Letters are single characters;
// a letter's extent must agree everywhere it appears.

struct EinsumSpec {
  std::string lhs, rhs, out;
  // Letter classification relative to the 2-operand form.
  std::string batch;            // in lhs, rhs and out
  std::string contracting;      // in lhs and rhs, not out
  std::string lhs_only;         // in lhs and out only
  std::string rhs_only;         // in rhs and out only
  std::string lhs_reduced;      // in lhs only (summed)
  std::string rhs_reduced;      // in rhs only (summed)
};

EinsumSpec ParseEinsumSpec(const std::string& spec);

// Extent of each letter given operand shapes; throws ShapeMismatch when a
// letter's extents disagree between operands.
std::vector<std::pair<char, int64_t>> EinsumLetterExtents(
    const EinsumSpec& spec, const Shape& lhs, const Shape& rhs);

// --- Node builder helpers ---------------------------------------------------
// Thin wrappers used by graph construction code and tests.

int64_t AddParameter(Graph& g, const std::string& name, Shape shape);
int64_t AddConstant(Graph& g, Shape shape, std::vector<float> values);
int64_t AddScalarConstant(Graph& g, float value);
int64_t AddIota(Graph& g, Shape shape, int64_t dim);
int64_t AddElementwise(Graph& g, ElementwiseKind kind,
                       std::vector<int64_t> operands);
int64_t AddCompare(Graph& g, CompareKind cmp, int64_t a, int64_t b);
int64_t AddEinsum(Graph& g, const std::string& spec, int64_t lhs, int64_t rhs);
int64_t AddReduce(Graph& g, ReduceKind kind, std::vector<int64_t> dims,
                  int64_t operand);
int64_t AddSoftmax(Graph& g, int64_t dim, int64_t operand);
int64_t AddCumsum(Graph& g, int64_t dim, bool exclusive, int64_t operand);
int64_t AddTopK(Graph& g, int64_t k, int64_t dim, int64_t operand);
int64_t AddGetOutput(Graph& g, int64_t operand, int64_t index);
int64_t AddOneHot(Graph& g, int64_t depth, int64_t dim, int64_t operand);
int64_t AddReshape(Graph& g, Shape out, int64_t operand);
int64_t AddBroadcast(Graph& g, Shape out, int64_t operand);
int64_t AddPad(Graph& g, int64_t operand, std::vector<int64_t> low,
               std::vector<int64_t> high, std::vector<int64_t> interior);
int64_t AddSlice(Graph& g, int64_t operand, std::vector<int64_t> starts,
                 std::vector<int64_t> limits, std::vector<int64_t> strides);
int64_t AddReverse(Graph& g, std::vector<int64_t> dims, int64_t operand);
int64_t AddConvolution(Graph& g, int64_t input, int64_t kernel,
                       std::vector<WindowDimConfig> window);
int64_t AddDynamicSlice(Graph& g, int64_t operand,
                        std::vector<int64_t> start_ids,
                        std::vector<int64_t> sizes);
int64_t AddDynamicUpdateSlice(Graph& g, int64_t operand, int64_t update,
                              std::vector<int64_t> start_ids);
int64_t AddPartitionId(Graph& g);
int64_t AddAllReduce(Graph& g, ReduceKind kind, int64_t operand);
int64_t AddAllGather(Graph& g, int64_t operand, int64_t dim, int64_t factor,
                     std::vector<std::vector<int64_t>> groups = {});
int64_t AddAllToAll(Graph& g, int64_t operand, int64_t split_dim,
                    int64_t concat_dim, int64_t factor,
                    std::vector<std::vector<int64_t>> groups = {});
int64_t AddCollectivePermute(Graph& g, int64_t operand,
                             std::vector<std::pair<int64_t, int64_t>> pairs);
int64_t AddLoopParam(Graph& g, int64_t index, Shape shape);
int64_t AddLoopIndex(Graph& g);
int64_t AddYield(Graph& g, std::vector<int64_t> operands);
int64_t AddShardedLoop(Graph& g, std::vector<int64_t> operands, int64_t trips,
                       std::shared_ptr<Graph> body);

}  // namespace shardir

#endif  // SHARDIR_GRAPH_H_
