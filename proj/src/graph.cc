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

#include "shardir/graph.h"

#include <algorithm>
#include <map>
#include <set>

namespace shardir {

std::vector<int64_t> Graph::Roots() const {
  std::vector<bool> used(nodes.size(), false);
  for (const Node& n : nodes) {
    for (int64_t op : n.operands) {
      if (op >= 0 && op < static_cast<int64_t>(nodes.size())) used[op] = true;
    }
  }
  std::vector<int64_t> roots;
  for (const Node& n : nodes) {
    if (!used[n.id]) roots.push_back(n.id);
  }
  return roots;
}

int64_t Graph::NodeCount() const {
  int64_t count = 0;
  for (const Node& n : nodes) {
    ++count;
    if (n.body) count += n.body->NodeCount();
  }
  return count;
}

std::string OpKindToString(OpKind k) {
  switch (k) {
    case OpKind::kParameter: return "parameter";
    case OpKind::kConstant: return "constant";
    case OpKind::kIota: return "iota";
    case OpKind::kElementwise: return "elementwise";
    case OpKind::kEinsum: return "einsum";
    case OpKind::kConvolution: return "convolution";
    case OpKind::kPad: return "pad";
    case OpKind::kSlice: return "slice";
    case OpKind::kReshape: return "reshape";
    case OpKind::kReverse: return "reverse";
    case OpKind::kReduce: return "reduce";
    case OpKind::kCumsum: return "cumsum";
    case OpKind::kTopK: return "topk";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kOneHot: return "one_hot";
    case OpKind::kDynamicSlice: return "dynamic_slice";
    case OpKind::kBroadcast: return "broadcast";
    case OpKind::kPartitionId: return "partition_id";
    case OpKind::kDynamicUpdateSlice: return "dynamic_update_slice";
    case OpKind::kAllReduce: return "all_reduce";
    case OpKind::kAllGather: return "all_gather";
    case OpKind::kAllToAll: return "all_to_all";
    case OpKind::kCollectivePermute: return "collective_permute";
    case OpKind::kShardedLoop: return "sharded_loop";
    case OpKind::kLoopParam: return "loop_param";
    case OpKind::kLoopIndex: return "loop_index";
    case OpKind::kYield: return "yield";
    case OpKind::kGetOutput: return "get_output";
  }
  return "unknown";
}

std::string ElementwiseKindToString(ElementwiseKind k) {
  switch (k) {
    case ElementwiseKind::kAdd: return "add";
    case ElementwiseKind::kSub: return "sub";
    case ElementwiseKind::kMul: return "mul";
    case ElementwiseKind::kDiv: return "div";
    case ElementwiseKind::kMax: return "max";
    case ElementwiseKind::kExp: return "exp";
    case ElementwiseKind::kRelu: return "relu";
    case ElementwiseKind::kSelect: return "select";
    case ElementwiseKind::kCompare: return "compare";
    case ElementwiseKind::kFloor: return "floor";
  }
  return "unknown";
}

std::string CompareKindToString(CompareKind k) {
  switch (k) {
    case CompareKind::kLt: return "lt";
    case CompareKind::kLe: return "le";
    case CompareKind::kGt: return "gt";
    case CompareKind::kGe: return "ge";
    case CompareKind::kEq: return "eq";
    case CompareKind::kNe: return "ne";
  }
  return "unknown";
}

std::string ReduceKindToString(ReduceKind k) {
  switch (k) {
    case ReduceKind::kAdd: return "add";
    case ReduceKind::kMax: return "max";
    case ReduceKind::kMin: return "min";
  }
  return "unknown";
}

EinsumSpec ParseEinsumSpec(const std::string& spec) {
  EinsumSpec result;
  size_t arrow = spec.find("->");
  size_t comma = spec.find(',');
  if (arrow == std::string::npos || comma == std::string::npos ||
      comma > arrow) {
    throw InvalidAttribute("einsum spec must look like \"AB,BC->AC\": " + spec);
  }
  result.lhs = spec.substr(0, comma);
  result.rhs = spec.substr(comma + 1, arrow - comma - 1);
  result.out = spec.substr(arrow + 2);
  auto check_letters = [&spec](const std::string& s) {
    std::set<char> seen;
    for (char c : s) {
      if (!std::isalpha(static_cast<unsigned char>(c))) {
        throw InvalidAttribute("einsum spec has non-letter dimension: " + spec);
      }
      if (!seen.insert(c).second) {
        throw InvalidAttribute("einsum spec repeats a letter within one term: " +
                               spec);
      }
    }
  };
  check_letters(result.lhs);
  check_letters(result.rhs);
  check_letters(result.out);
  auto contains = [](const std::string& s, char c) {
    return s.find(c) != std::string::npos;
  };
  for (char c : result.out) {
    if (!contains(result.lhs, c) && !contains(result.rhs, c)) {
      throw InvalidAttribute(std::string("einsum output letter '") + c +
                             "' missing from operands: " + spec);
    }
  }
  for (char c : result.lhs) {
    bool in_rhs = contains(result.rhs, c);
    bool in_out = contains(result.out, c);
    if (in_rhs && in_out) result.batch += c;
    else if (in_rhs) result.contracting += c;
    else if (in_out) result.lhs_only += c;
    else result.lhs_reduced += c;
  }
  for (char c : result.rhs) {
    if (contains(result.lhs, c)) continue;
    if (contains(result.out, c)) result.rhs_only += c;
    else result.rhs_reduced += c;
  }
  return result;
}

std::vector<std::pair<char, int64_t>> EinsumLetterExtents(
    const EinsumSpec& spec, const Shape& lhs, const Shape& rhs) {
  if (static_cast<int64_t>(spec.lhs.size()) != lhs.rank()) {
    throw ShapeMismatch("einsum lhs rank " + std::to_string(lhs.rank()) +
                        " does not match term \"" + spec.lhs + "\"");
  }
  if (static_cast<int64_t>(spec.rhs.size()) != rhs.rank()) {
    throw ShapeMismatch("einsum rhs rank " + std::to_string(rhs.rank()) +
                        " does not match term \"" + spec.rhs + "\"");
  }
  std::map<char, int64_t> extents;
  for (size_t i = 0; i < spec.lhs.size(); ++i) {
    extents[spec.lhs[i]] = lhs.dims[i];
  }
  for (size_t i = 0; i < spec.rhs.size(); ++i) {
    char c = spec.rhs[i];
    auto it = extents.find(c);
    if (it != extents.end() && it->second != rhs.dims[i]) {
      throw ShapeMismatch(std::string("einsum letter '") + c +
                          "' has extent " + std::to_string(it->second) +
                          " on lhs but " + std::to_string(rhs.dims[i]) +
                          " on rhs");
    }
    extents[c] = rhs.dims[i];
  }
  std::vector<std::pair<char, int64_t>> result(extents.begin(), extents.end());
  return result;
}

namespace {

const Shape& OperandShape(const Graph& g, const Node& n, size_t i) {
  int64_t id = n.operands.at(i);
  if (id < 0 || id >= static_cast<int64_t>(g.nodes.size())) {
    throw UnknownOperand("node %" + std::to_string(n.id) + " operand %" +
                         std::to_string(id));
  }
  return g.nodes[id].out_shapes.at(0);
}

void ExpectOperands(const Node& n, size_t count) {
  if (n.operands.size() != count) {
    throw InvalidAttribute(OpKindToString(n.op) + " expects " +
                           std::to_string(count) + " operands, got " +
                           std::to_string(n.operands.size()));
  }
}

// Output extent of one windowed dimension.
int64_t WindowedExtent(int64_t input, const WindowDimConfig& w) {
  int64_t dilated_base = input == 0 ? 0 : (input - 1) * w.base_dilation + 1;
  int64_t padded = dilated_base + w.padding_low + w.padding_high;
  int64_t effective_window = (w.size - 1) * w.window_dilation + 1;
  if (padded < effective_window) return 0;
  return (padded - effective_window) / w.stride + 1;
}

}  // namespace

std::vector<Shape> InferShapes(const Graph& graph, const Node& node) {
  switch (node.op) {
    case OpKind::kParameter:
    case OpKind::kConstant:
    case OpKind::kIota:
      // Shape is declared, not inferred. Constants must carry a matching
      // payload; iota must have a valid axis.
      if (node.op == OpKind::kConstant &&
          static_cast<int64_t>(node.literal.size()) !=
              node.shape().num_elements()) {
        throw InvalidAttribute("constant payload has " +
                               std::to_string(node.literal.size()) +
                               " values for shape " + node.shape().ToString());
      }
      if (node.op == OpKind::kIota &&
          (node.dim < 0 || node.dim >= std::max<int64_t>(node.shape().rank(), 1))) {
        throw InvalidAttribute("iota dim out of range");
      }
      return {node.shape()};
    case OpKind::kElementwise: {
      size_t arity;
      switch (node.elem_kind) {
        case ElementwiseKind::kExp:
        case ElementwiseKind::kRelu:
        case ElementwiseKind::kFloor:
          arity = 1;
          break;
        case ElementwiseKind::kSelect:
          arity = 3;
          break;
        default:
          arity = 2;
      }
      ExpectOperands(node, arity);
      const Shape& first = OperandShape(graph, node, 0);
      for (size_t i = 1; i < node.operands.size(); ++i) {
        if (OperandShape(graph, node, i) != first) {
          throw ShapeMismatch(
              ElementwiseKindToString(node.elem_kind) + " operand " +
              std::to_string(i) + " shape " +
              OperandShape(graph, node, i).ToString() + " != " +
              first.ToString());
        }
      }
      return {first};
    }
    case OpKind::kEinsum: {
      ExpectOperands(node, 2);
      EinsumSpec spec = ParseEinsumSpec(node.einsum_spec);
      auto extents = EinsumLetterExtents(spec, OperandShape(graph, node, 0),
                                         OperandShape(graph, node, 1));
      std::map<char, int64_t> by_letter(extents.begin(), extents.end());
      Shape out;
      for (char c : spec.out) out.dims.push_back(by_letter.at(c));
      return {out};
    }
    case OpKind::kConvolution: {
      ExpectOperands(node, 2);
      const Shape& input = OperandShape(graph, node, 0);
      const Shape& kernel = OperandShape(graph, node, 1);
      if (input.rank() != kernel.rank()) {
        throw ShapeMismatch("convolution operand ranks differ");
      }
      if (static_cast<int64_t>(node.window.size()) != input.rank()) {
        throw InvalidAttribute("convolution needs one window config per dim");
      }
      Shape out;
      for (int64_t d = 0; d < input.rank(); ++d) {
        const WindowDimConfig& w = node.window[d];
        if (w.size != kernel.dims[d]) {
          throw ShapeMismatch("window size " + std::to_string(w.size) +
                              " != kernel extent " +
                              std::to_string(kernel.dims[d]) + " on dim " +
                              std::to_string(d));
        }
        // Negative padding is allowed: it trims the corresponding edge.
        if (w.size <= 0 || w.stride <= 0 || w.base_dilation <= 0 ||
            w.window_dilation <= 0) {
          throw InvalidAttribute("invalid window config on dim " +
                                 std::to_string(d));
        }
        out.dims.push_back(WindowedExtent(input.dims[d], w));
      }
      return {out};
    }
    case OpKind::kPad: {
      ExpectOperands(node, 1);
      const Shape& in = OperandShape(graph, node, 0);
      auto check = [&](const std::vector<int64_t>& v, const char* what) {
        if (static_cast<int64_t>(v.size()) != in.rank()) {
          throw InvalidAttribute(std::string("pad ") + what +
                                 " must have one entry per dim");
        }
      };
      check(node.pad_low, "low");
      check(node.pad_high, "high");
      check(node.pad_interior, "interior");
      Shape out;
      for (int64_t d = 0; d < in.rank(); ++d) {
        if (node.pad_interior[d] < 0) {
          throw InvalidAttribute("negative interior padding");
        }
        int64_t n = in.dims[d];
        int64_t dilated = n == 0 ? 0 : (n - 1) * (node.pad_interior[d] + 1) + 1;
        int64_t extent = dilated + node.pad_low[d] + node.pad_high[d];
        if (extent < 0) throw InvalidAttribute("pad yields negative extent");
        out.dims.push_back(extent);
      }
      return {out};
    }
    case OpKind::kSlice: {
      ExpectOperands(node, 1);
      const Shape& in = OperandShape(graph, node, 0);
      if (static_cast<int64_t>(node.slice_starts.size()) != in.rank() ||
          static_cast<int64_t>(node.slice_limits.size()) != in.rank() ||
          static_cast<int64_t>(node.slice_strides.size()) != in.rank()) {
        throw InvalidAttribute("slice starts/limits/strides must match rank");
      }
      Shape out;
      for (int64_t d = 0; d < in.rank(); ++d) {
        int64_t start = node.slice_starts[d];
        int64_t limit = node.slice_limits[d];
        int64_t stride = node.slice_strides[d];
        if (stride <= 0 || start < 0 || limit < start || limit > in.dims[d]) {
          throw InvalidAttribute("slice bounds invalid on dim " +
                                 std::to_string(d) + " for input " +
                                 in.ToString());
        }
        out.dims.push_back(CeilDiv(limit - start, stride));
      }
      return {out};
    }
    case OpKind::kReshape: {
      ExpectOperands(node, 1);
      const Shape& in = OperandShape(graph, node, 0);
      if (in.num_elements() != node.shape().num_elements()) {
        throw ShapeMismatch("reshape " + in.ToString() + " -> " +
                            node.shape().ToString() +
                            " changes element count");
      }
      return {node.shape()};
    }
    case OpKind::kReverse: {
      ExpectOperands(node, 1);
      const Shape& in = OperandShape(graph, node, 0);
      for (int64_t d : node.dims) {
        if (d < 0 || d >= in.rank()) {
          throw InvalidAttribute("reverse dim out of range");
        }
      }
      return {in};
    }
    case OpKind::kReduce: {
      ExpectOperands(node, 1);
      const Shape& in = OperandShape(graph, node, 0);
      std::set<int64_t> reduce_dims(node.dims.begin(), node.dims.end());
      for (int64_t d : reduce_dims) {
        if (d < 0 || d >= in.rank()) {
          throw InvalidAttribute("reduce dim out of range");
        }
      }
      Shape out;
      for (int64_t d = 0; d < in.rank(); ++d) {
        if (!reduce_dims.count(d)) out.dims.push_back(in.dims[d]);
      }
      return {out};
    }
    case OpKind::kCumsum:
    case OpKind::kSoftmax: {
      ExpectOperands(node, 1);
      const Shape& in = OperandShape(graph, node, 0);
      if (node.dim < 0 || node.dim >= in.rank()) {
        throw InvalidAttribute(OpKindToString(node.op) + " dim out of range");
      }
      return {in};
    }
    case OpKind::kTopK: {
      ExpectOperands(node, 1);
      const Shape& in = OperandShape(graph, node, 0);
      if (node.dim < 0 || node.dim >= in.rank()) {
        throw InvalidAttribute("topk dim out of range");
      }
      if (node.k < 1 || node.k > in.dims[node.dim]) {
        throw InvalidAttribute("topk k=" + std::to_string(node.k) +
                               " out of range for extent " +
                               std::to_string(in.dims[node.dim]));
      }
      Shape out = in;
      out.dims[node.dim] = node.k;
      return {out, out};  // values, indices
    }
    case OpKind::kOneHot: {
      ExpectOperands(node, 1);
      const Shape& in = OperandShape(graph, node, 0);
      if (node.depth <= 0) throw InvalidAttribute("one_hot depth must be > 0");
      if (node.dim < 0 || node.dim > in.rank()) {
        throw InvalidAttribute("one_hot dim out of range");
      }
      Shape out = in;
      out.dims.insert(out.dims.begin() + node.dim, node.depth);
      return {out};
    }
    case OpKind::kDynamicSlice: {
      const Shape& in = OperandShape(graph, node, 0);
      ExpectOperands(node, 1 + static_cast<size_t>(in.rank()));
      if (static_cast<int64_t>(node.dynamic_sizes.size()) != in.rank()) {
        throw InvalidAttribute("dynamic_slice sizes must match rank");
      }
      for (size_t i = 1; i < node.operands.size(); ++i) {
        if (OperandShape(graph, node, i).rank() != 0) {
          throw ShapeMismatch("dynamic_slice start operands must be scalars");
        }
      }
      Shape out;
      for (int64_t d = 0; d < in.rank(); ++d) {
        if (node.dynamic_sizes[d] < 0 || node.dynamic_sizes[d] > in.dims[d]) {
          throw InvalidAttribute("dynamic_slice size out of range on dim " +
                                 std::to_string(d));
        }
        out.dims.push_back(node.dynamic_sizes[d]);
      }
      return {out};
    }
    case OpKind::kBroadcast: {
      ExpectOperands(node, 1);
      if (OperandShape(graph, node, 0).rank() != 0) {
        throw ShapeMismatch("broadcast operand must be a scalar");
      }
      return {node.shape()};
    }
    case OpKind::kPartitionId:
      ExpectOperands(node, 0);
      return {Shape{}};
    case OpKind::kDynamicUpdateSlice: {
      const Shape& in = OperandShape(graph, node, 0);
      const Shape& update = OperandShape(graph, node, 1);
      ExpectOperands(node, 2 + static_cast<size_t>(in.rank()));
      if (update.rank() != in.rank()) {
        throw ShapeMismatch("dynamic_update_slice update rank mismatch");
      }
      for (int64_t d = 0; d < in.rank(); ++d) {
        if (update.dims[d] > in.dims[d]) {
          throw ShapeMismatch("dynamic_update_slice update larger than input");
        }
      }
      for (size_t i = 2; i < node.operands.size(); ++i) {
        if (OperandShape(graph, node, i).rank() != 0) {
          throw ShapeMismatch(
              "dynamic_update_slice start operands must be scalars");
        }
      }
      return {in};
    }
    case OpKind::kAllReduce: {
      ExpectOperands(node, 1);
      return {OperandShape(graph, node, 0)};
    }
    case OpKind::kAllGather: {
      ExpectOperands(node, 1);
      // Concatenation factor is the participant count, known at run time;
      // the declared shape carries it. Validated by the simulator.
      return {node.shape()};
    }
    case OpKind::kAllToAll: {
      ExpectOperands(node, 1);
      const Shape& in = OperandShape(graph, node, 0);
      if (node.split_dim < 0 || node.split_dim >= in.rank() ||
          node.concat_dim < 0 || node.concat_dim >= in.rank()) {
        throw InvalidAttribute("all_to_all dims out of range");
      }
      return {node.shape()};
    }
    case OpKind::kCollectivePermute: {
      ExpectOperands(node, 1);
      std::set<int64_t> dests;
      for (const auto& [src, dst] : node.pairs) {
        if (!dests.insert(dst).second) {
          throw InvalidAttribute("collective_permute repeats destination " +
                                 std::to_string(dst));
        }
      }
      return {OperandShape(graph, node, 0)};
    }
    case OpKind::kShardedLoop: {
      if (!node.body) throw InvalidAttribute("sharded_loop needs a body");
      if (node.trips < 0) throw InvalidAttribute("negative trip count");
      // Result is the tuple of carried values; shapes are the operand shapes.
      std::vector<Shape> shapes;
      for (size_t i = 0; i < node.operands.size(); ++i) {
        shapes.push_back(OperandShape(graph, node, i));
      }
      if (shapes.empty()) {
        throw InvalidAttribute("sharded_loop needs carried values");
      }
      return shapes;
    }
    case OpKind::kLoopParam:
      ExpectOperands(node, 0);
      return {node.shape()};
    case OpKind::kLoopIndex:
      ExpectOperands(node, 0);
      return {Shape{}};
    case OpKind::kYield: {
      std::vector<Shape> shapes;
      for (size_t i = 0; i < node.operands.size(); ++i) {
        shapes.push_back(OperandShape(graph, node, i));
      }
      if (shapes.empty()) throw InvalidAttribute("yield needs operands");
      return shapes;
    }
    case OpKind::kGetOutput: {
      ExpectOperands(node, 1);
      const Node& producer = graph.nodes.at(node.operands[0]);
      if (node.index < 0 ||
          node.index >= static_cast<int64_t>(producer.out_shapes.size())) {
        throw InvalidAttribute("get_output index " + std::to_string(node.index) +
                               " out of range");
      }
      return {producer.out_shapes[node.index]};
    }
  }
  throw InvalidAttribute("unhandled op kind");
}

namespace {

void ValidateInto(const Graph& graph, std::vector<std::string>& problems,
                  const std::string& prefix) {
  for (const Node& n : graph.nodes) {
    for (int64_t op : n.operands) {
      if (op < 0 || op >= n.id) {
        problems.push_back(prefix + "%" + std::to_string(n.id) +
                           " references undefined operand %" +
                           std::to_string(op));
      }
    }
    if (n.op == OpKind::kParameter && n.name.empty()) {
      problems.push_back(prefix + "%" + std::to_string(n.id) +
                         " parameter has no name");
    }
    bool operands_ok = true;
    for (int64_t op : n.operands) operands_ok &= (op >= 0 && op < n.id);
    if (!operands_ok) continue;
    try {
      std::vector<Shape> inferred = InferShapes(graph, n);
      if (n.out_shapes.empty()) {
        problems.push_back(prefix + "%" + std::to_string(n.id) +
                           " has no declared shape");
      } else if (inferred[0] != n.out_shapes[0]) {
        problems.push_back(prefix + "%" + std::to_string(n.id) + " declares " +
                           n.out_shapes[0].ToString() + " but " +
                           OpKindToString(n.op) + " infers " +
                           inferred[0].ToString());
      }
      if (n.sharding.has_value()) {
        try {
          ValidateSharding(n.out_shapes.at(0), *n.sharding);
        } catch (const Error& e) {
          problems.push_back(prefix + "%" + std::to_string(n.id) + " " +
                             e.what());
        }
      }
    } catch (const Error& e) {
      problems.push_back(prefix + "%" + std::to_string(n.id) + " " + e.what());
    }
    if (n.body) {
      ValidateInto(*n.body, problems,
                   prefix + "%" + std::to_string(n.id) + " body: ");
    }
  }
}

}  // namespace

std::vector<std::string> Validate(const Graph& graph) {
  std::vector<std::string> problems;
  ValidateInto(graph, problems, "");
  return problems;
}

int64_t AddParameter(Graph& g, const std::string& name, Shape shape) {
  Node n;
  n.op = OpKind::kParameter;
  n.name = name;
  n.out_shapes = {std::move(shape)};
  return g.Add(std::move(n));
}

int64_t AddConstant(Graph& g, Shape shape, std::vector<float> values) {
  Node n;
  n.op = OpKind::kConstant;
  n.out_shapes = {std::move(shape)};
  n.literal = std::move(values);
  return g.Add(std::move(n));
}

int64_t AddScalarConstant(Graph& g, float value) {
  return AddConstant(g, Shape{}, {value});
}

int64_t AddIota(Graph& g, Shape shape, int64_t dim) {
  Node n;
  n.op = OpKind::kIota;
  n.dim = dim;
  n.out_shapes = {std::move(shape)};
  return g.Add(std::move(n));
}

int64_t AddElementwise(Graph& g, ElementwiseKind kind,
                       std::vector<int64_t> operands) {
  Node n;
  n.op = OpKind::kElementwise;
  n.elem_kind = kind;
  n.operands = std::move(operands);
  n.out_shapes = {g.node(n.operands.at(0)).shape()};
  if (kind == ElementwiseKind::kSelect) {
    n.out_shapes = {g.node(n.operands.at(1)).shape()};
  }
  return g.Add(std::move(n));
}

int64_t AddCompare(Graph& g, CompareKind cmp, int64_t a, int64_t b) {
  Node n;
  n.op = OpKind::kElementwise;
  n.elem_kind = ElementwiseKind::kCompare;
  n.cmp_kind = cmp;
  n.operands = {a, b};
  n.out_shapes = {g.node(a).shape()};
  return g.Add(std::move(n));
}

int64_t AddEinsum(Graph& g, const std::string& spec, int64_t lhs, int64_t rhs) {
  Node n;
  n.op = OpKind::kEinsum;
  n.einsum_spec = spec;
  n.operands = {lhs, rhs};
  n.out_shapes = {Shape{}};
  n.out_shapes = InferShapes(g, n);
  return g.Add(std::move(n));
}

int64_t AddReduce(Graph& g, ReduceKind kind, std::vector<int64_t> dims,
                  int64_t operand) {
  Node n;
  n.op = OpKind::kReduce;
  n.reduce_kind = kind;
  n.dims = std::move(dims);
  n.operands = {operand};
  n.out_shapes = {Shape{}};
  n.out_shapes = InferShapes(g, n);
  return g.Add(std::move(n));
}

int64_t AddSoftmax(Graph& g, int64_t dim, int64_t operand) {
  Node n;
  n.op = OpKind::kSoftmax;
  n.dim = dim;
  n.operands = {operand};
  n.out_shapes = {g.node(operand).shape()};
  return g.Add(std::move(n));
}

int64_t AddCumsum(Graph& g, int64_t dim, bool exclusive, int64_t operand) {
  Node n;
  n.op = OpKind::kCumsum;
  n.dim = dim;
  n.exclusive = exclusive;
  n.operands = {operand};
  n.out_shapes = {g.node(operand).shape()};
  return g.Add(std::move(n));
}

int64_t AddTopK(Graph& g, int64_t k, int64_t dim, int64_t operand) {
  Node n;
  n.op = OpKind::kTopK;
  n.k = k;
  n.dim = dim;
  n.operands = {operand};
  n.out_shapes = {Shape{}};
  n.out_shapes = InferShapes(g, n);
  return g.Add(std::move(n));
}

int64_t AddGetOutput(Graph& g, int64_t operand, int64_t index) {
  Node n;
  n.op = OpKind::kGetOutput;
  n.index = index;
  n.operands = {operand};
  n.out_shapes = {g.node(operand).out_shapes.at(index)};
  return g.Add(std::move(n));
}

int64_t AddOneHot(Graph& g, int64_t depth, int64_t dim, int64_t operand) {
  Node n;
  n.op = OpKind::kOneHot;
  n.depth = depth;
  n.dim = dim;
  n.operands = {operand};
  n.out_shapes = {Shape{}};
  n.out_shapes = InferShapes(g, n);
  return g.Add(std::move(n));
}

int64_t AddReshape(Graph& g, Shape out, int64_t operand) {
  Node n;
  n.op = OpKind::kReshape;
  n.operands = {operand};
  n.out_shapes = {std::move(out)};
  return g.Add(std::move(n));
}

int64_t AddBroadcast(Graph& g, Shape out, int64_t operand) {
  Node n;
  n.op = OpKind::kBroadcast;
  n.operands = {operand};
  n.out_shapes = {std::move(out)};
  return g.Add(std::move(n));
}

int64_t AddPad(Graph& g, int64_t operand, std::vector<int64_t> low,
               std::vector<int64_t> high, std::vector<int64_t> interior) {
  Node n;
  n.op = OpKind::kPad;
  n.operands = {operand};
  n.pad_low = std::move(low);
  n.pad_high = std::move(high);
  n.pad_interior = std::move(interior);
  n.out_shapes = InferShapes(g, n);
  return g.Add(std::move(n));
}

int64_t AddSlice(Graph& g, int64_t operand, std::vector<int64_t> starts,
                 std::vector<int64_t> limits, std::vector<int64_t> strides) {
  Node n;
  n.op = OpKind::kSlice;
  n.operands = {operand};
  n.slice_starts = std::move(starts);
  n.slice_limits = std::move(limits);
  n.slice_strides = std::move(strides);
  n.out_shapes = InferShapes(g, n);
  return g.Add(std::move(n));
}

int64_t AddReverse(Graph& g, std::vector<int64_t> dims, int64_t operand) {
  Node n;
  n.op = OpKind::kReverse;
  n.dims = std::move(dims);
  n.operands = {operand};
  n.out_shapes = {g.node(operand).shape()};
  return g.Add(std::move(n));
}

int64_t AddConvolution(Graph& g, int64_t input, int64_t kernel,
                       std::vector<WindowDimConfig> window) {
  Node n;
  n.op = OpKind::kConvolution;
  n.operands = {input, kernel};
  n.window = std::move(window);
  n.out_shapes = InferShapes(g, n);
  return g.Add(std::move(n));
}

int64_t AddDynamicSlice(Graph& g, int64_t operand,
                        std::vector<int64_t> start_ids,
                        std::vector<int64_t> sizes) {
  Node n;
  n.op = OpKind::kDynamicSlice;
  n.operands = {operand};
  n.operands.insert(n.operands.end(), start_ids.begin(), start_ids.end());
  n.dynamic_sizes = std::move(sizes);
  n.out_shapes = InferShapes(g, n);
  return g.Add(std::move(n));
}

int64_t AddDynamicUpdateSlice(Graph& g, int64_t operand, int64_t update,
                              std::vector<int64_t> start_ids) {
  Node n;
  n.op = OpKind::kDynamicUpdateSlice;
  n.operands = {operand, update};
  n.operands.insert(n.operands.end(), start_ids.begin(), start_ids.end());
  n.out_shapes = InferShapes(g, n);
  return g.Add(std::move(n));
}

int64_t AddPartitionId(Graph& g) {
  Node n;
  n.op = OpKind::kPartitionId;
  n.out_shapes = {Shape{}};
  return g.Add(std::move(n));
}

int64_t AddAllReduce(Graph& g, ReduceKind kind, int64_t operand) {
  Node n;
  n.op = OpKind::kAllReduce;
  n.reduce_kind = kind;
  n.operands = {operand};
  n.out_shapes = {g.node(operand).shape()};
  return g.Add(std::move(n));
}

int64_t AddAllGather(Graph& g, int64_t operand, int64_t dim, int64_t factor,
                     std::vector<std::vector<int64_t>> groups) {
  Node n;
  n.op = OpKind::kAllGather;
  n.dim = dim;
  n.operands = {operand};
  n.groups = std::move(groups);
  Shape out = g.node(operand).shape();
  out.dims.at(dim) *= factor;
  n.out_shapes = {std::move(out)};
  return g.Add(std::move(n));
}

int64_t AddAllToAll(Graph& g, int64_t operand, int64_t split_dim,
                    int64_t concat_dim, int64_t factor,
                    std::vector<std::vector<int64_t>> groups) {
  Node n;
  n.op = OpKind::kAllToAll;
  n.split_dim = split_dim;
  n.concat_dim = concat_dim;
  n.operands = {operand};
  n.groups = std::move(groups);
  Shape out = g.node(operand).shape();
  if (out.dims.at(split_dim) % factor != 0) {
    throw ShapeMismatch("all_to_all split extent " +
                        std::to_string(out.dims[split_dim]) +
                        " not divisible by " + std::to_string(factor));
  }
  out.dims[split_dim] /= factor;
  out.dims.at(concat_dim) *= factor;
  n.out_shapes = {std::move(out)};
  return g.Add(std::move(n));
}

int64_t AddCollectivePermute(Graph& g, int64_t operand,
                             std::vector<std::pair<int64_t, int64_t>> pairs) {
  Node n;
  n.op = OpKind::kCollectivePermute;
  n.operands = {operand};
  n.pairs = std::move(pairs);
  n.out_shapes = InferShapes(g, n);
  return g.Add(std::move(n));
}

int64_t AddLoopParam(Graph& g, int64_t index, Shape shape) {
  Node n;
  n.op = OpKind::kLoopParam;
  n.index = index;
  n.out_shapes = {std::move(shape)};
  return g.Add(std::move(n));
}

int64_t AddLoopIndex(Graph& g) {
  Node n;
  n.op = OpKind::kLoopIndex;
  n.out_shapes = {Shape{}};
  return g.Add(std::move(n));
}

int64_t AddYield(Graph& g, std::vector<int64_t> operands) {
  Node n;
  n.op = OpKind::kYield;
  n.operands = std::move(operands);
  for (int64_t op : n.operands) n.out_shapes.push_back(g.node(op).shape());
  return g.Add(std::move(n));
}

int64_t AddShardedLoop(Graph& g, std::vector<int64_t> operands, int64_t trips,
                       std::shared_ptr<Graph> body) {
  Node n;
  n.op = OpKind::kShardedLoop;
  n.operands = std::move(operands);
  n.trips = trips;
  n.body = std::move(body);
  for (int64_t op : n.operands) n.out_shapes.push_back(g.node(op).shape());
  return g.Add(std::move(n));
}

}  // namespace shardir
