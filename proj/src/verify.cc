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

#include "shardir/verify.h"

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "shardir/common.h"
#include "shardir/interpreter.h"
#include "shardir/propagation.h"
#include "shardir/rng.h"
#include "shardir/shard_data.h"
#include "shardir/simulator.h"

namespace shardir {
namespace {

void CountCollectives(const Graph& graph,
                      std::map<std::string, int64_t>& counts) {
  for (const Node& n : graph.nodes) {
    switch (n.op) {
      case OpKind::kAllReduce:
      case OpKind::kAllGather:
      case OpKind::kAllToAll:
      case OpKind::kCollectivePermute:
        ++counts[OpKindToString(n.op)];
        break;
      case OpKind::kShardedLoop:
        if (n.body) CountCollectives(*n.body, counts);
        break;
      default:
        break;
    }
  }
}

std::vector<int64_t> Unflatten(const Shape& shape, int64_t flat) {
  std::vector<int64_t> idx(shape.rank(), 0);
  for (int64_t d = shape.rank() - 1; d >= 0; --d) {
    idx[d] = flat % shape.dims[d];
    flat /= shape.dims[d];
  }
  return idx;
}

}  // namespace

TensorValue SeededInput(const Shape& shape, const std::string& name,
                        uint64_t seed) {
  TensorValue out(shape);
  const uint64_t name_key = HashString(name);
  for (int64_t i = 0; i < shape.num_elements(); ++i) {
    out.data[i] = static_cast<float>(
        NormalDouble(seed, name_key, static_cast<uint64_t>(i)));
  }
  return out;
}

std::map<std::string, TensorValue> SeededInputs(const Graph& graph,
                                                uint64_t seed) {
  std::map<std::string, TensorValue> inputs;
  for (const Node& n : graph.nodes) {
    if (n.op != OpKind::kParameter) continue;
    inputs.emplace(n.name, SeededInput(n.out_shapes[0], n.name, seed));
  }
  return inputs;
}

VerifyResult VerifyPartitioningWithInputs(
    const Graph& annotated, int64_t num_devices,
    const std::map<std::string, TensorValue>& inputs,
    const PartitionOptions& options, bool corrupt_one_shard) {
  Graph graph = annotated;
  Propagate(graph, num_devices);
  std::map<std::string, TensorValue> reference = Evaluate(graph, inputs);

  SpmdProgram program = PartitionGraph(graph, num_devices, options);
  std::vector<std::map<std::string, TensorValue>> shards =
      ShardInputs(inputs, program.inputs, num_devices);
  if (corrupt_one_shard && !shards.empty() && !shards[0].empty() &&
      !shards[0].begin()->second.data.empty()) {
    shards[0].begin()->second.data[0] += 1.0f;
  }
  std::vector<std::map<std::string, TensorValue>> per_device =
      RunSpmd(program.graph, num_devices, shards);
  std::map<std::string, TensorValue> partitioned =
      ReassembleOutputs(per_device, program.outputs);

  VerifyResult result;
  result.partitioned_node_count = static_cast<int64_t>(program.graph.nodes.size());
  CountCollectives(program.graph, result.collective_counts);
  result.outputs = partitioned;

  for (const auto& [name, ref] : reference) {
    auto it = partitioned.find(name);
    if (it == partitioned.end()) {
      throw MissingInput("partitioned program has no output named \"" + name +
                         "\"");
    }
    const TensorValue& got = it->second;
    if (got.shape != ref.shape) {
      throw ShapeMismatch("output \"" + name + "\" expects " +
                          ref.shape.ToString() + ", got " +
                          got.shape.ToString());
    }
    for (int64_t i = 0; i < ref.shape.num_elements(); ++i) {
      double denom = std::max(1e-6, std::abs(static_cast<double>(ref.data[i])));
      double rel = std::abs(static_cast<double>(got.data[i]) -
                            static_cast<double>(ref.data[i])) /
                   denom;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_output = name;
        result.worst_index = Unflatten(ref.shape, i);
        result.reference_value = ref.data[i];
        result.partitioned_value = got.data[i];
      }
    }
  }
  return result;
}

VerifyResult VerifyPartitioning(const Graph& annotated, int64_t num_devices,
                                uint64_t seed, const PartitionOptions& options,
                                bool corrupt_one_shard) {
  return VerifyPartitioningWithInputs(annotated, num_devices,
                                      SeededInputs(annotated, seed), options,
                                      corrupt_one_shard);
}

}  // namespace shardir
