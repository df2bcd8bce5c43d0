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

#include "shardir/propagation.h"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>

namespace shardir {

namespace {

// Remaps a same-rank assignment onto a new shape rank by dim index mapping.
// dim_map[i] = source dim feeding output dim i, or -1 for "untiled".
std::optional<Sharding> MapDims(const Sharding& src, int64_t out_rank,
                                const std::vector<int64_t>& dim_map) {
  if (src.replicated) return Sharding::Replicated();
  // Every tiled source dim must appear in the map, otherwise partitions would
  // be lost and the assignment would no longer cover all devices.
  std::set<int64_t> mapped(dim_map.begin(), dim_map.end());
  for (int64_t d : src.tiled_dims()) {
    if (!mapped.count(d)) return std::nullopt;
  }
  DeviceAssignment out;
  out.dims.assign(out_rank, 1);
  std::vector<int64_t> out_to_src(out_rank, -1);
  for (int64_t i = 0; i < out_rank; ++i) {
    if (dim_map[i] >= 0) {
      out.dims[i] = src.assignment.dims[dim_map[i]];
      out_to_src[i] = dim_map[i];
    }
  }
  // Re-lay device ids: walk the output grid row-major, look up the source
  // grid position.
  int64_t total = 1;
  for (int64_t d : out.dims) total *= d;
  out.device_ids.resize(total);
  std::vector<int64_t> out_pos(out_rank, 0);
  std::vector<int64_t> src_pos(src.assignment.dims.size(), 0);
  for (int64_t flat = 0; flat < total; ++flat) {
    int64_t rem = flat;
    for (int64_t d = out_rank - 1; d >= 0; --d) {
      out_pos[d] = rem % out.dims[d];
      rem /= out.dims[d];
    }
    std::fill(src_pos.begin(), src_pos.end(), 0);
    for (int64_t d = 0; d < out_rank; ++d) {
      if (out_to_src[d] >= 0) src_pos[out_to_src[d]] = out_pos[d];
    }
    int64_t src_flat = 0;
    for (size_t d = 0; d < src_pos.size(); ++d) {
      src_flat = src_flat * src.assignment.dims[d] + src_pos[d];
    }
    out.device_ids[flat] = src.assignment.device_ids[src_flat];
  }
  return Sharding::Tiled(std::move(out));
}

std::vector<int64_t> IdentityMap(int64_t rank) {
  std::vector<int64_t> m(rank);
  std::iota(m.begin(), m.end(), 0);
  return m;
}

// Forward inference for einsum: candidate letters in priority order
// batch, lhs non-contracting, rhs non-contracting; tiled contracting letters
// make the result replicated.
std::optional<Sharding> InferEinsumForward(const Graph& g, const Node& n) {
  const Node& lhs = g.node(n.operands[0]);
  const Node& rhs = g.node(n.operands[1]);
  EinsumSpec spec = ParseEinsumSpec(n.einsum_spec);
  auto letter_sharding = [&](char c) -> std::optional<std::pair<int64_t, const Sharding*>> {
    size_t li = spec.lhs.find(c);
    if (li != std::string::npos && lhs.sharding.has_value() &&
        !lhs.sharding->replicated &&
        lhs.sharding->assignment.dims[li] > 1) {
      return std::make_pair(static_cast<int64_t>(li), &*lhs.sharding);
    }
    size_t ri = spec.rhs.find(c);
    if (ri != std::string::npos && rhs.sharding.has_value() &&
        !rhs.sharding->replicated &&
        rhs.sharding->assignment.dims[ri] > 1) {
      return std::make_pair(static_cast<int64_t>(ri), &*rhs.sharding);
    }
    return std::nullopt;
  };
  std::string priority = spec.batch + spec.lhs_only + spec.rhs_only;
  for (char c : priority) {
    auto hit = letter_sharding(c);
    if (!hit) continue;
    size_t out_dim = spec.out.find(c);
    if (out_dim == std::string::npos) continue;
    // Single-letter propagation: the chosen letter's partition count, with
    // the source operand's device order when the operand is tiled on exactly
    // that one dim.
    const Sharding& src = *hit->second;
    if (src.tiled_dims().size() == 1) {
      std::vector<int64_t> dim_map(spec.out.size(), -1);
      dim_map[out_dim] = hit->first;
      auto mapped = MapDims(src, static_cast<int64_t>(spec.out.size()), dim_map);
      if (mapped) return mapped;
    }
  }
  for (char c : spec.contracting + spec.lhs_reduced + spec.rhs_reduced) {
    if (letter_sharding(c)) return Sharding::Replicated();
  }
  if (lhs.sharding.has_value() && lhs.sharding->replicated &&
      rhs.sharding.has_value() && rhs.sharding->replicated) {
    return Sharding::Replicated();
  }
  return std::nullopt;
}

std::optional<Sharding> InferForward(const Graph& g, const Node& n) {
  auto operand_sharding = [&](size_t i) -> const std::optional<Sharding>& {
    return g.node(n.operands[i]).sharding;
  };
  switch (n.op) {
    case OpKind::kElementwise:
      for (size_t i = 0; i < n.operands.size(); ++i) {
        if (operand_sharding(i).has_value()) return operand_sharding(i);
      }
      return std::nullopt;
    case OpKind::kSoftmax:
    case OpKind::kCumsum:
    case OpKind::kReverse:
    case OpKind::kPad:
    case OpKind::kSlice:
      if (operand_sharding(0).has_value()) return operand_sharding(0);
      return std::nullopt;
    case OpKind::kConvolution:
      // Partitioning follows the data operand dim-for-dim.
      if (operand_sharding(0).has_value()) return operand_sharding(0);
      return std::nullopt;
    case OpKind::kTopK:
      if (operand_sharding(0).has_value()) {
        const Sharding& s = *operand_sharding(0);
        if (s.replicated || s.assignment.dims[n.dim] == 1) return s;
      }
      return std::nullopt;
    case OpKind::kGetOutput:
      return operand_sharding(0);
    case OpKind::kEinsum:
      if (operand_sharding(0).has_value() || operand_sharding(1).has_value()) {
        return InferEinsumForward(g, n);
      }
      return std::nullopt;
    case OpKind::kReduce: {
      if (!operand_sharding(0).has_value()) return std::nullopt;
      const Sharding& s = *operand_sharding(0);
      if (s.replicated) return s;
      std::set<int64_t> reduced(n.dims.begin(), n.dims.end());
      bool tiled_reduced = false;
      for (int64_t d : s.tiled_dims()) tiled_reduced |= reduced.count(d) > 0;
      if (tiled_reduced) {
        // Partial results need an AllReduce; natural output is replicated
        // unless all tiled dims survive.
        bool all_reduced = true;
        for (int64_t d : s.tiled_dims()) all_reduced &= reduced.count(d) > 0;
        return all_reduced ? std::optional<Sharding>(Sharding::Replicated())
                           : std::nullopt;
      }
      std::vector<int64_t> dim_map;
      for (int64_t d = 0; d < g.node(n.operands[0]).shape().rank(); ++d) {
        if (!reduced.count(d)) dim_map.push_back(d);
      }
      return MapDims(s, static_cast<int64_t>(dim_map.size()), dim_map);
    }
    case OpKind::kOneHot: {
      if (!operand_sharding(0).has_value()) return std::nullopt;
      const Sharding& s = *operand_sharding(0);
      if (s.replicated) return s;
      std::vector<int64_t> dim_map;
      for (int64_t d = 0; d < n.shape().rank(); ++d) {
        dim_map.push_back(d == n.dim ? -1
                          : d < n.dim ? d
                                      : d - 1);
      }
      return MapDims(s, n.shape().rank(), dim_map);
    }
    case OpKind::kReshape: {
      if (!operand_sharding(0).has_value()) return std::nullopt;
      const Sharding& s = *operand_sharding(0);
      if (s.replicated) return s;
      auto tiled = s.tiled_dims();
      if (tiled.size() == 1 && tiled[0] == 0 && n.shape().rank() >= 1) {
        return Sharding::SplitDim(n.shape().rank(), 0,
                                  s.assignment.dims[0]);
      }
      return std::nullopt;
    }
    default:
      return std::nullopt;
  }
}

std::optional<Sharding> InferBackward(const Graph& g, const Node& user,
                                      size_t operand_index) {
  if (!user.sharding.has_value()) return std::nullopt;
  const Sharding& s = *user.sharding;
  const Node& operand = g.node(user.operands[operand_index]);
  switch (user.op) {
    case OpKind::kElementwise:
      return s;
    case OpKind::kSoftmax:
    case OpKind::kCumsum:
    case OpKind::kReverse:
    case OpKind::kPad:
    case OpKind::kSlice:
      return s;
    case OpKind::kConvolution:
      if (operand_index == 0) return s;
      return std::nullopt;
    case OpKind::kReduce: {
      if (s.replicated) return std::nullopt;  // could still be tiled upstream
      std::set<int64_t> reduced(user.dims.begin(), user.dims.end());
      std::vector<int64_t> dim_map;
      int64_t kept = 0;
      for (int64_t d = 0; d < operand.shape().rank(); ++d) {
        dim_map.push_back(reduced.count(d) ? -1 : kept++);
      }
      // dim_map above maps operand dim -> source (output) dim; MapDims wants
      // the inverse orientation: for each result dim, which source dim.
      return MapDims(s, operand.shape().rank(), dim_map);
    }
    case OpKind::kOneHot: {
      if (s.replicated) return s;
      if (s.assignment.dims[user.dim] != 1) return std::nullopt;
      std::vector<int64_t> dim_map;
      for (int64_t d = 0; d < operand.shape().rank(); ++d) {
        dim_map.push_back(d < user.dim ? d : d + 1);
      }
      return MapDims(s, operand.shape().rank(), dim_map);
    }
    case OpKind::kReshape: {
      if (s.replicated) return s;
      auto tiled = s.tiled_dims();
      if (tiled.size() == 1 && tiled[0] == 0 && operand.shape().rank() >= 1) {
        return Sharding::SplitDim(operand.shape().rank(), 0,
                                  s.assignment.dims[0]);
      }
      return std::nullopt;
    }
    case OpKind::kEinsum: {
      if (s.replicated) return std::nullopt;
      auto tiled = s.tiled_dims();
      if (tiled.size() != 1) return std::nullopt;
      EinsumSpec spec = ParseEinsumSpec(user.einsum_spec);
      char letter = spec.out[tiled[0]];
      const std::string& term = operand_index == 0 ? spec.lhs : spec.rhs;
      size_t pos = term.find(letter);
      if (pos == std::string::npos) return std::nullopt;
      std::vector<int64_t> dim_map(term.size(), -1);
      dim_map[pos] = tiled[0];
      return MapDims(s, static_cast<int64_t>(term.size()), dim_map);
    }
    default:
      return std::nullopt;
  }
}

}  // namespace

void Propagate(Graph& graph, int64_t num_devices) {
  (void)num_devices;  // counts come from the annotations themselves

  // Elementwise ops bind operands and result to one sharding; detect genuine
  // user-annotation conflicts inside each bound component before inference.
  std::vector<int64_t> parent(graph.nodes.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int64_t(int64_t)> find = [&](int64_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const Node& n : graph.nodes) {
    if (n.op != OpKind::kElementwise) continue;
    for (int64_t op : n.operands) {
      parent[find(op)] = find(n.id);
    }
  }
  std::map<int64_t, Sharding> component_user_sharding;
  for (const Node& n : graph.nodes) {
    if (!n.sharding.has_value()) continue;
    bool in_component = n.op == OpKind::kElementwise;
    if (!in_component) {
      for (const Node& m : graph.nodes) {
        if (m.op != OpKind::kElementwise) continue;
        for (int64_t op : m.operands) in_component |= (op == n.id);
      }
    }
    if (!in_component) continue;
    int64_t root = find(n.id);
    auto [it, inserted] = component_user_sharding.emplace(root, *n.sharding);
    if (!inserted && !(it->second == *n.sharding)) {
      throw ConflictingAnnotations(
          "node %" + std::to_string(n.id) + " pins " + n.sharding->ToString() +
          " but its elementwise-connected component is pinned to " +
          it->second.ToString());
    }
  }

  bool changed = true;
  while (changed) {
    changed = false;
    for (Node& n : graph.nodes) {
      if (n.sharding.has_value()) continue;
      auto inferred = InferForward(graph, n);
      if (inferred.has_value()) {
        n.sharding = std::move(inferred);
        changed = true;
      }
    }
    for (int64_t i = static_cast<int64_t>(graph.nodes.size()) - 1; i >= 0; --i) {
      const Node& n = graph.nodes[i];
      for (size_t oi = 0; oi < n.operands.size(); ++oi) {
        Node& operand = graph.node(n.operands[oi]);
        if (operand.sharding.has_value()) continue;
        auto inferred = InferBackward(graph, n, oi);
        if (inferred.has_value()) {
          operand.sharding = std::move(inferred);
          changed = true;
        }
      }
    }
  }
  for (Node& n : graph.nodes) {
    if (!n.sharding.has_value()) n.sharding = Sharding::Replicated();
  }
}

}  // namespace shardir
