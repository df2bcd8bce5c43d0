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

#ifndef SHARDIR_SIMULATOR_H_
#define SHARDIR_SIMULATOR_H_

#include <map>
#include <string>
#include <vector>

#include "shardir/graph.h"
#include "shardir/tensor.h"

namespace shardir {

// Logical 2-D device grid. Collective results do not depend on the grid; it
// feeds cost modeling and flag validation.
struct DeviceMesh {
  int64_t total_devices = 1;
  int64_t rows = 1;
  int64_t cols = 1;
  bool torus_wrap = true;

  static DeviceMesh Linear(int64_t n) { return DeviceMesh{n, 1, n, true}; }
};

// Throws InvalidAttribute unless rows*cols == total_devices.
void ValidateMesh(const DeviceMesh& mesh);

// Executes one SPMD graph on `num_devices` simulated devices in lockstep:
// every device evaluates node i before any device starts node i+1, so
// collectives always find all peers at the same program point. Results are
// deterministic for a fixed graph and inputs regardless of thread count.
//
// `inputs[d]` binds parameter names to that device's local shards. Returns
// per-device root outputs keyed by root name (or "%<id>").
//
// Collective semantics (all deterministic, ascending-device-id reduction):
//   all_reduce          elementwise sum across the group
//   all_gather dim=k    concatenation along k in ascending device id order
//   all_to_all          split along split_dim, lane j to device j, concat
//                       received blocks along concat_dim by source id
//   collective_permute  explicit (src, dst) pairs; devices not covered as a
//                       destination receive zeros
// An optional `groups` attribute partitions devices into independent
// subgroups; ids inside each group are ordered as listed.
//
// Worker threads are capped by the SHARDIR_THREADS environment variable
// (default: hardware concurrency).
std::vector<std::map<std::string, TensorValue>> RunSpmd(
    const Graph& graph, int64_t num_devices,
    const std::vector<std::map<std::string, TensorValue>>& inputs);

std::vector<std::map<std::string, TensorValue>> RunSpmd(
    const Graph& graph, const DeviceMesh& mesh,
    const std::vector<std::map<std::string, TensorValue>>& inputs);

}  // namespace shardir

#endif  // SHARDIR_SIMULATOR_H_
