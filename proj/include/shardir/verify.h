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

#ifndef SHARDIR_VERIFY_H_
#define SHARDIR_VERIFY_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "shardir/graph.h"
#include "shardir/partitioner.h"
#include "shardir/spmd.h"
#include "shardir/tensor.h"

namespace shardir {

// Standard-normal tensor whose value at flat index i depends only on
// (seed, name, i); regenerating any element is order independent.
TensorValue SeededInput(const Shape& shape, const std::string& name,
                        uint64_t seed);

// One seeded tensor per parameter of the graph, keyed by parameter name.
std::map<std::string, TensorValue> SeededInputs(const Graph& graph,
                                                uint64_t seed);

struct VerifyResult {
  double max_rel_error = 0.0;         // max |part - ref| / max(1e-6, |ref|)
  std::string worst_output;           // root where the max occurs
  std::vector<int64_t> worst_index;   // its coordinates
  float reference_value = 0.0f;
  float partitioned_value = 0.0f;
  int64_t partitioned_node_count = 0;
  std::map<std::string, int64_t> collective_counts;  // op name -> occurrences
  std::map<std::string, TensorValue> outputs;        // reassembled, per root
};

// End-to-end equivalence check: propagates shardings, evaluates the graph on
// one device, partitions it, runs the per-device program on the simulated
// collectives runtime with sharded copies of the same seeded inputs,
// reassembles, and reports the worst relative error across all outputs.
// With corrupt_one_shard set, device 0's first input shard is perturbed after
// sharding: a negative control that any real mismatch is detected.
VerifyResult VerifyPartitioning(const Graph& annotated, int64_t num_devices,
                                uint64_t seed,
                                const PartitionOptions& options =
                                    PartitionOptions(),
                                bool corrupt_one_shard = false);

// The same check against caller-provided full inputs.
VerifyResult VerifyPartitioningWithInputs(
    const Graph& annotated, int64_t num_devices,
    const std::map<std::string, TensorValue>& inputs,
    const PartitionOptions& options = PartitionOptions(),
    bool corrupt_one_shard = false);

}  // namespace shardir

#endif  // SHARDIR_VERIFY_H_
