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

#include "shardir/interpreter.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace shardir {

namespace {

float ApplyBinary(ElementwiseKind kind, float a, float b) {
  switch (kind) {
    case ElementwiseKind::kAdd: return a + b;
    case ElementwiseKind::kSub: return a - b;
    case ElementwiseKind::kMul: return a * b;
    case ElementwiseKind::kDiv: return a / b;
    case ElementwiseKind::kMax: return std::max(a, b);
    default: break;
  }
  throw InvalidAttribute("not a binary elementwise kind");
}

bool ApplyCompare(CompareKind kind, float a, float b) {
  switch (kind) {
    case CompareKind::kLt: return a < b;
    case CompareKind::kLe: return a <= b;
    case CompareKind::kGt: return a > b;
    case CompareKind::kGe: return a >= b;
    case CompareKind::kEq: return a == b;
    case CompareKind::kNe: return a != b;
  }
  return false;
}

TensorValue EvalElementwise(const Node& node,
                            const std::vector<const TensorValue*>& ops) {
  TensorValue out(ops[0]->shape);
  int64_t n = out.shape.num_elements();
  switch (node.elem_kind) {
    case ElementwiseKind::kExp:
      for (int64_t i = 0; i < n; ++i) out.data[i] = std::exp(ops[0]->data[i]);
      break;
    case ElementwiseKind::kRelu:
      for (int64_t i = 0; i < n; ++i) {
        out.data[i] = std::max(0.0f, ops[0]->data[i]);
      }
      break;
    case ElementwiseKind::kFloor:
      for (int64_t i = 0; i < n; ++i) out.data[i] = std::floor(ops[0]->data[i]);
      break;
    case ElementwiseKind::kSelect:
      for (int64_t i = 0; i < n; ++i) {
        out.data[i] =
            ops[0]->data[i] != 0.0f ? ops[1]->data[i] : ops[2]->data[i];
      }
      break;
    case ElementwiseKind::kCompare:
      for (int64_t i = 0; i < n; ++i) {
        out.data[i] =
            ApplyCompare(node.cmp_kind, ops[0]->data[i], ops[1]->data[i])
                ? 1.0f
                : 0.0f;
      }
      break;
    default:
      for (int64_t i = 0; i < n; ++i) {
        out.data[i] =
            ApplyBinary(node.elem_kind, ops[0]->data[i], ops[1]->data[i]);
      }
  }
  return out;
}

TensorValue EvalEinsum(const Node& node, const TensorValue& lhs,
                       const TensorValue& rhs) {
  EinsumSpec spec = ParseEinsumSpec(node.einsum_spec);
  auto extent_pairs = EinsumLetterExtents(spec, lhs.shape, rhs.shape);
  std::map<char, int64_t> extents(extent_pairs.begin(), extent_pairs.end());

  // Summed letters in order of first appearance (lhs then rhs) so the inner
  // accumulation order is fixed.
  std::string summed;
  for (char c : spec.lhs) {
    if (spec.out.find(c) == std::string::npos) summed += c;
  }
  for (char c : spec.rhs) {
    if (spec.out.find(c) == std::string::npos &&
        summed.find(c) == std::string::npos) {
      summed += c;
    }
  }

  Shape out_shape;
  for (char c : spec.out) out_shape.dims.push_back(extents.at(c));
  Shape summed_shape;
  for (char c : summed) summed_shape.dims.push_back(extents.at(c));

  TensorValue out(out_shape);
  std::map<char, int64_t> idx;
  std::vector<int64_t> out_idx(out_shape.rank(), 0);
  std::vector<int64_t> lhs_idx(lhs.shape.rank(), 0);
  std::vector<int64_t> rhs_idx(rhs.shape.rank(), 0);
  std::vector<int64_t> sum_idx(summed_shape.rank(), 0);

  bool more_out = out_shape.num_elements() > 0;
  while (more_out) {
    for (size_t i = 0; i < spec.out.size(); ++i) idx[spec.out[i]] = out_idx[i];
    float acc = 0.0f;
    std::fill(sum_idx.begin(), sum_idx.end(), 0);
    bool more_sum = summed_shape.num_elements() > 0;
    while (more_sum) {
      for (size_t i = 0; i < summed.size(); ++i) idx[summed[i]] = sum_idx[i];
      for (size_t i = 0; i < spec.lhs.size(); ++i) {
        lhs_idx[i] = idx[spec.lhs[i]];
      }
      for (size_t i = 0; i < spec.rhs.size(); ++i) {
        rhs_idx[i] = idx[spec.rhs[i]];
      }
      acc += lhs.at(lhs_idx) * rhs.at(rhs_idx);
      more_sum = NextIndex(summed_shape, sum_idx);
    }
    out.at(out_idx) = acc;
    more_out = NextIndex(out_shape, out_idx);
  }
  return out;
}

TensorValue EvalPad(const Node& node, const TensorValue& in) {
  Shape out_shape;
  for (int64_t d = 0; d < in.shape.rank(); ++d) {
    int64_t n = in.shape.dims[d];
    int64_t dilated = n == 0 ? 0 : (n - 1) * (node.pad_interior[d] + 1) + 1;
    out_shape.dims.push_back(dilated + node.pad_low[d] + node.pad_high[d]);
  }
  TensorValue out(out_shape);
  if (in.shape.num_elements() == 0) return out;
  std::vector<int64_t> idx(in.shape.rank(), 0);
  std::vector<int64_t> out_idx(in.shape.rank(), 0);
  bool more = true;
  while (more) {
    bool in_range = true;
    for (int64_t d = 0; d < in.shape.rank(); ++d) {
      out_idx[d] = node.pad_low[d] + idx[d] * (node.pad_interior[d] + 1);
      if (out_idx[d] < 0 || out_idx[d] >= out_shape.dims[d]) in_range = false;
    }
    if (in_range) out.at(out_idx) = in.at(idx);
    more = NextIndex(in.shape, idx);
  }
  return out;
}

TensorValue EvalReduce(const Node& node, const TensorValue& in) {
  std::set<int64_t> reduce_dims(node.dims.begin(), node.dims.end());
  Shape out_shape;
  for (int64_t d = 0; d < in.shape.rank(); ++d) {
    if (!reduce_dims.count(d)) out_shape.dims.push_back(in.shape.dims[d]);
  }
  float identity;
  switch (node.reduce_kind) {
    case ReduceKind::kAdd: identity = 0.0f; break;
    case ReduceKind::kMax: identity = -std::numeric_limits<float>::infinity(); break;
    case ReduceKind::kMin: identity = std::numeric_limits<float>::infinity(); break;
  }
  TensorValue out(out_shape);
  std::fill(out.data.begin(), out.data.end(), identity);
  if (in.shape.num_elements() == 0) return out;
  std::vector<int64_t> idx(in.shape.rank(), 0);
  std::vector<int64_t> out_idx;
  out_idx.reserve(out_shape.rank());
  bool more = true;
  while (more) {
    out_idx.clear();
    for (int64_t d = 0; d < in.shape.rank(); ++d) {
      if (!reduce_dims.count(d)) out_idx.push_back(idx[d]);
    }
    float& cell = out.at(out_idx);
    float v = in.at(idx);
    switch (node.reduce_kind) {
      case ReduceKind::kAdd: cell += v; break;
      case ReduceKind::kMax: cell = std::max(cell, v); break;
      case ReduceKind::kMin: cell = std::min(cell, v); break;
    }
    more = NextIndex(in.shape, idx);
  }
  return out;
}

TensorValue EvalCumsum(const Node& node, const TensorValue& in) {
  TensorValue out(in.shape);
  if (in.shape.num_elements() == 0) return out;
  int64_t axis = node.dim;
  std::vector<int64_t> idx(in.shape.rank(), 0);
  bool more = true;
  // Walk every index; recompute only when at the start of an axis run.
  // Simpler: iterate over all indices with axis fixed at 0, then scan.
  Shape outer = in.shape;
  outer.dims[axis] = 1;
  std::fill(idx.begin(), idx.end(), 0);
  more = true;
  while (more) {
    float acc = 0.0f;
    std::vector<int64_t> pos = idx;
    for (int64_t i = 0; i < in.shape.dims[axis]; ++i) {
      pos[axis] = i;
      float v = in.at(pos);
      out.at(pos) = node.exclusive ? acc : acc + v;
      acc += v;
    }
    more = NextIndex(outer, idx);
  }
  return out;
}

std::vector<TensorValue> EvalTopK(const Node& node, const TensorValue& in) {
  int64_t axis = node.dim;
  int64_t extent = in.shape.dims[axis];
  Shape out_shape = in.shape;
  out_shape.dims[axis] = node.k;
  TensorValue values(out_shape);
  TensorValue indices(out_shape);
  Shape outer = in.shape;
  outer.dims[axis] = 1;
  std::vector<int64_t> idx(in.shape.rank(), 0);
  std::vector<std::pair<float, int64_t>> slice(extent);
  bool more = in.shape.num_elements() > 0;
  while (more) {
    std::vector<int64_t> pos = idx;
    for (int64_t i = 0; i < extent; ++i) {
      pos[axis] = i;
      slice[i] = {in.at(pos), i};
    }
    // Descending by value; ties keep the lower index first.
    std::stable_sort(slice.begin(), slice.end(),
                     [](const auto& a, const auto& b) {
                       return a.first > b.first;
                     });
    for (int64_t i = 0; i < node.k; ++i) {
      pos[axis] = i;
      values.at(pos) = slice[i].first;
      indices.at(pos) = static_cast<float>(slice[i].second);
    }
    more = NextIndex(outer, idx);
  }
  return {values, indices};
}

TensorValue EvalSoftmax(const Node& node, const TensorValue& in) {
  TensorValue out(in.shape);
  if (in.shape.num_elements() == 0) return out;
  int64_t axis = node.dim;
  Shape outer = in.shape;
  outer.dims[axis] = 1;
  std::vector<int64_t> idx(in.shape.rank(), 0);
  bool more = true;
  while (more) {
    std::vector<int64_t> pos = idx;
    float max_v = -std::numeric_limits<float>::infinity();
    for (int64_t i = 0; i < in.shape.dims[axis]; ++i) {
      pos[axis] = i;
      max_v = std::max(max_v, in.at(pos));
    }
    float denom = 0.0f;
    for (int64_t i = 0; i < in.shape.dims[axis]; ++i) {
      pos[axis] = i;
      float e = std::exp(in.at(pos) - max_v);
      out.at(pos) = e;
      denom += e;
    }
    for (int64_t i = 0; i < in.shape.dims[axis]; ++i) {
      pos[axis] = i;
      out.at(pos) /= denom;
    }
    more = NextIndex(outer, idx);
  }
  return out;
}

TensorValue EvalOneHot(const Node& node, const TensorValue& in) {
  Shape out_shape = in.shape;
  out_shape.dims.insert(out_shape.dims.begin() + node.dim, node.depth);
  TensorValue out(out_shape);
  if (in.shape.num_elements() == 0) return out;
  std::vector<int64_t> idx(in.shape.rank(), 0);
  std::vector<int64_t> out_idx(out_shape.rank(), 0);
  bool more = true;
  while (more) {
    float v = in.at(idx);
    // Out-of-range indices produce an all-zero row.
    if (v >= 0.0f && v < static_cast<float>(node.depth) &&
        v == std::floor(v)) {
      for (int64_t d = 0, o = 0; d < out_shape.rank(); ++d) {
        if (d == node.dim) continue;
        out_idx[d] = idx[o++];
      }
      out_idx[node.dim] = static_cast<int64_t>(v);
      out.at(out_idx) = 1.0f;
    }
    more = NextIndex(in.shape, idx);
  }
  return out;
}

int64_t ClampStart(float start, int64_t input_extent, int64_t size) {
  int64_t s = static_cast<int64_t>(start);
  return std::max<int64_t>(0, std::min<int64_t>(s, input_extent - size));
}

TensorValue EvalDynamicSlice(const Node& node,
                             const std::vector<const TensorValue*>& ops) {
  const TensorValue& in = *ops[0];
  Shape out_shape{node.dynamic_sizes};
  TensorValue out(out_shape);
  std::vector<int64_t> starts(in.shape.rank());
  for (int64_t d = 0; d < in.shape.rank(); ++d) {
    starts[d] =
        ClampStart(ops[1 + d]->data[0], in.shape.dims[d], out_shape.dims[d]);
  }
  if (out_shape.num_elements() == 0) return out;
  std::vector<int64_t> idx(out_shape.rank(), 0);
  std::vector<int64_t> src(out_shape.rank(), 0);
  bool more = true;
  while (more) {
    for (int64_t d = 0; d < out_shape.rank(); ++d) src[d] = starts[d] + idx[d];
    out.at(idx) = in.at(src);
    more = NextIndex(out_shape, idx);
  }
  return out;
}

TensorValue EvalDynamicUpdateSlice(const Node& node,
                                   const std::vector<const TensorValue*>& ops) {
  TensorValue out = *ops[0];
  const TensorValue& update = *ops[1];
  std::vector<int64_t> starts(out.shape.rank());
  for (int64_t d = 0; d < out.shape.rank(); ++d) {
    starts[d] = ClampStart(ops[2 + d]->data[0], out.shape.dims[d],
                           update.shape.dims[d]);
  }
  if (update.shape.num_elements() == 0) return out;
  std::vector<int64_t> idx(update.shape.rank(), 0);
  std::vector<int64_t> dst(update.shape.rank(), 0);
  bool more = true;
  while (more) {
    for (int64_t d = 0; d < out.shape.rank(); ++d) dst[d] = starts[d] + idx[d];
    out.at(dst) = update.at(idx);
    more = NextIndex(update.shape, idx);
  }
  return out;
}

}  // namespace

TensorValue EvaluateWindowed(const TensorValue& input,
                             const TensorValue& kernel,
                             const std::vector<WindowDimConfig>& window) {
  int64_t rank = input.shape.rank();
  Shape out_shape;
  for (int64_t d = 0; d < rank; ++d) {
    const WindowDimConfig& w = window[d];
    int64_t n = input.shape.dims[d];
    int64_t dilated = n == 0 ? 0 : (n - 1) * w.base_dilation + 1;
    int64_t padded = dilated + w.padding_low + w.padding_high;
    int64_t effective_window = (w.size - 1) * w.window_dilation + 1;
    out_shape.dims.push_back(
        padded < effective_window ? 0 : (padded - effective_window) / w.stride + 1);
  }
  TensorValue out(out_shape);
  if (out_shape.num_elements() == 0) return out;
  std::vector<int64_t> out_idx(rank, 0);
  std::vector<int64_t> k_idx(rank, 0);
  std::vector<int64_t> in_idx(rank, 0);
  bool more_out = true;
  while (more_out) {
    float acc = 0.0f;
    std::fill(k_idx.begin(), k_idx.end(), 0);
    bool more_k = kernel.shape.num_elements() > 0;
    while (more_k) {
      bool valid = true;
      for (int64_t d = 0; d < rank; ++d) {
        const WindowDimConfig& w = window[d];
        // Position in the padded, base-dilated coordinate system.
        int64_t pos = out_idx[d] * w.stride + k_idx[d] * w.window_dilation -
                      w.padding_low;
        if (pos < 0 || pos % w.base_dilation != 0) {
          valid = false;
          break;
        }
        int64_t base = pos / w.base_dilation;
        if (base >= input.shape.dims[d]) {
          valid = false;
          break;
        }
        in_idx[d] = base;
      }
      if (valid) acc += input.at(in_idx) * kernel.at(k_idx);
      more_k = NextIndex(kernel.shape, k_idx);
    }
    out.at(out_idx) = acc;
    more_out = NextIndex(out_shape, out_idx);
  }
  return out;
}

std::vector<TensorValue> EvalPureOp(
    const Node& node, const std::vector<const TensorValue*>& ops) {
  switch (node.op) {
    case OpKind::kConstant:
      return {TensorValue(node.shape(), node.literal)};
    case OpKind::kIota: {
      TensorValue out(node.shape());
      if (node.shape().rank() == 0) {
        out.data[0] = 0.0f;
        return {out};
      }
      std::vector<int64_t> idx(node.shape().rank(), 0);
      bool more = node.shape().num_elements() > 0;
      while (more) {
        out.at(idx) = static_cast<float>(idx[node.dim]);
        more = NextIndex(node.shape(), idx);
      }
      return {out};
    }
    case OpKind::kElementwise:
      return {EvalElementwise(node, ops)};
    case OpKind::kEinsum:
      return {EvalEinsum(node, *ops[0], *ops[1])};
    case OpKind::kConvolution:
      return {EvaluateWindowed(*ops[0], *ops[1], node.window)};
    case OpKind::kPad:
      return {EvalPad(node, *ops[0])};
    case OpKind::kSlice: {
      const TensorValue& in = *ops[0];
      Shape out_shape;
      for (int64_t d = 0; d < in.shape.rank(); ++d) {
        out_shape.dims.push_back(CeilDiv(
            node.slice_limits[d] - node.slice_starts[d], node.slice_strides[d]));
      }
      TensorValue out(out_shape);
      if (out_shape.num_elements() == 0) return {out};
      std::vector<int64_t> idx(out_shape.rank(), 0);
      std::vector<int64_t> src(out_shape.rank(), 0);
      bool more = true;
      while (more) {
        for (int64_t d = 0; d < out_shape.rank(); ++d) {
          src[d] = node.slice_starts[d] + idx[d] * node.slice_strides[d];
        }
        out.at(idx) = in.at(src);
        more = NextIndex(out_shape, idx);
      }
      return {out};
    }
    case OpKind::kReshape:
      return {TensorValue(node.shape(), ops[0]->data)};
    case OpKind::kReverse: {
      const TensorValue& in = *ops[0];
      TensorValue out(in.shape);
      if (in.shape.num_elements() == 0) return {out};
      std::set<int64_t> rev(node.dims.begin(), node.dims.end());
      std::vector<int64_t> idx(in.shape.rank(), 0);
      std::vector<int64_t> src(in.shape.rank(), 0);
      bool more = true;
      while (more) {
        for (int64_t d = 0; d < in.shape.rank(); ++d) {
          src[d] = rev.count(d) ? in.shape.dims[d] - 1 - idx[d] : idx[d];
        }
        out.at(idx) = in.at(src);
        more = NextIndex(in.shape, idx);
      }
      return {out};
    }
    case OpKind::kReduce:
      return {EvalReduce(node, *ops[0])};
    case OpKind::kCumsum:
      return {EvalCumsum(node, *ops[0])};
    case OpKind::kTopK:
      return EvalTopK(node, *ops[0]);
    case OpKind::kSoftmax:
      return {EvalSoftmax(node, *ops[0])};
    case OpKind::kOneHot:
      return {EvalOneHot(node, *ops[0])};
    case OpKind::kDynamicSlice:
      return {EvalDynamicSlice(node, ops)};
    case OpKind::kDynamicUpdateSlice:
      return {EvalDynamicUpdateSlice(node, ops)};
    case OpKind::kBroadcast: {
      TensorValue out(node.shape());
      std::fill(out.data.begin(), out.data.end(), ops[0]->data[0]);
      return {out};
    }
    default:
      throw UnsupportedOp(OpKindToString(node.op) +
                          " requires device context");
  }
}

std::map<std::string, TensorValue> Evaluate(
    const Graph& graph, const std::map<std::string, TensorValue>& inputs) {
  std::vector<std::vector<TensorValue>> env(graph.nodes.size());
  for (const Node& n : graph.nodes) {
    if (n.op == OpKind::kParameter) {
      auto it = inputs.find(n.name);
      if (it == inputs.end()) {
        throw MissingInput("no value bound for parameter \"" + n.name + "\"");
      }
      if (it->second.shape != n.shape()) {
        throw ShapeMismatch("parameter \"" + n.name + "\" expects " +
                            n.shape().ToString() + ", got " +
                            it->second.shape.ToString());
      }
      env[n.id] = {it->second};
    } else if (n.op == OpKind::kGetOutput) {
      env[n.id] = {env[n.operands[0]].at(n.index)};
    } else {
      std::vector<const TensorValue*> ops;
      ops.reserve(n.operands.size());
      for (int64_t op : n.operands) ops.push_back(&env[op][0]);
      env[n.id] = EvalPureOp(n, ops);
    }
  }
  std::map<std::string, TensorValue> outputs;
  for (int64_t root : graph.Roots()) {
    const Node& n = graph.node(root);
    std::string key = n.name.empty() ? "%" + std::to_string(n.id) : n.name;
    outputs.emplace(key, env[root][0]);
  }
  return outputs;
}

}  // namespace shardir
