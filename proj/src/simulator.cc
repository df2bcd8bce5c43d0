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

#include "shardir/simulator.h"

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <thread>

#include "shardir/common.h"
#include "shardir/interpreter.h"

namespace shardir {

namespace {

int64_t ThreadCap() {
  if (const char* env = std::getenv("SHARDIR_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int64_t>(hc);
}

// Runs fn(0..n-1). Work is partitioned statically and results only depend on
// the index, so the outcome is identical for any thread count.
void ParallelFor(int64_t n, const std::function<void(int64_t)>& fn) {
  int64_t threads = std::min<int64_t>(ThreadCap(), n);
  if (threads <= 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int64_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int64_t i = t; i < n; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Per-device value environment: node id -> outputs.
using Env = std::vector<std::vector<std::vector<TensorValue>>>;

std::vector<std::vector<int64_t>> ResolveGroups(const Node& n, int64_t D) {
  if (n.groups.empty()) {
    std::vector<int64_t> all(D);
    std::iota(all.begin(), all.end(), 0);
    return {all};
  }
  std::vector<char> seen(D, 0);
  for (const auto& g : n.groups) {
    for (int64_t id : g) {
      if (id < 0 || id >= D) {
        throw InvalidAttribute("collective group references device " +
                               std::to_string(id) + " of " + std::to_string(D));
      }
      if (seen[id]) {
        throw DeadlockDetected("device " + std::to_string(id) +
                               " appears in two groups of node %" +
                               std::to_string(n.id));
      }
      seen[id] = 1;
    }
  }
  for (int64_t d = 0; d < D; ++d) {
    if (!seen[d]) {
      throw DeadlockDetected("device " + std::to_string(d) +
                             " has no peer group at node %" +
                             std::to_string(n.id));
    }
  }
  return n.groups;
}

void CheckUniformShape(const Node& n, const std::vector<int64_t>& group,
                       Env& env) {
  const Shape& first = env[group[0]][n.operands[0]][0].shape;
  for (int64_t d : group) {
    if (!(env[d][n.operands[0]][0].shape == first)) {
      throw ShapeMismatch("collective %" + std::to_string(n.id) +
                          " sees differing shard shapes across its group");
    }
  }
}

void RunAllReduce(const Node& n, int64_t D, Env& env) {
  for (const auto& group : ResolveGroups(n, D)) {
    CheckUniformShape(n, group, env);
    // Left-fold in group order; fixed association keeps results bit-stable.
    TensorValue acc = env[group[0]][n.operands[0]][0];
    for (size_t i = 1; i < group.size(); ++i) {
      const TensorValue& t = env[group[i]][n.operands[0]][0];
      for (size_t j = 0; j < acc.data.size(); ++j) {
        switch (n.reduce_kind) {
          case ReduceKind::kAdd:
            acc.data[j] += t.data[j];
            break;
          case ReduceKind::kMax:
            acc.data[j] = std::max(acc.data[j], t.data[j]);
            break;
          case ReduceKind::kMin:
            acc.data[j] = std::min(acc.data[j], t.data[j]);
            break;
        }
      }
    }
    for (int64_t d : group) env[d][n.id] = {acc};
  }
}

void RunAllGather(const Node& n, int64_t D, Env& env) {
  int64_t dim = n.dim;
  for (const auto& group : ResolveGroups(n, D)) {
    CheckUniformShape(n, group, env);
    const Shape& in = env[group[0]][n.operands[0]][0].shape;
    Shape out = in;
    out.dims[dim] *= static_cast<int64_t>(group.size());
    TensorValue gathered{out};
    std::vector<int64_t> idx(out.rank(), 0);
    int64_t chunk = in.dims[dim];
    if (!gathered.data.empty()) {
      do {
        std::vector<int64_t> src_idx = idx;
        int64_t pos = static_cast<size_t>(idx[dim] / chunk);
        src_idx[dim] = idx[dim] % chunk;
        gathered.at(idx) = env[group[pos]][n.operands[0]][0].at(src_idx);
      } while (NextIndex(out, idx));
    }
    for (int64_t d : group) env[d][n.id] = {gathered};
  }
}

void RunAllToAll(const Node& n, int64_t D, Env& env) {
  for (const auto& group : ResolveGroups(n, D)) {
    CheckUniformShape(n, group, env);
    int64_t g = static_cast<int64_t>(group.size());
    const Shape& in = env[group[0]][n.operands[0]][0].shape;
    if (in.dims[n.split_dim] % g != 0) {
      throw ShapeMismatch("all_to_all %" + std::to_string(n.id) + " splits " +
                          std::to_string(in.dims[n.split_dim]) + " into " +
                          std::to_string(g) + " lanes");
    }
    int64_t lane = in.dims[n.split_dim] / g;
    Shape out = in;
    out.dims[n.split_dim] = lane;
    out.dims[n.concat_dim] *= g;
    int64_t concat_chunk = in.dims[n.concat_dim];
    if (n.split_dim == n.concat_dim) concat_chunk = lane;
    // Receiver at position r gets lane r of every member, ordered by sender
    // position along concat_dim.
    std::vector<TensorValue> results(g, TensorValue{out});
    std::vector<int64_t> idx(out.rank(), 0);
    if (out.num_elements() > 0) {
      for (int64_t r = 0; r < g; ++r) {
        std::fill(idx.begin(), idx.end(), 0);
        do {
          int64_t sender_pos = idx[n.concat_dim] / concat_chunk;
          std::vector<int64_t> src_idx = idx;
          src_idx[n.concat_dim] = idx[n.concat_dim] % concat_chunk;
          src_idx[n.split_dim] += r * lane;
          // When split and concat coincide the two adjustments compose: the
          // sender offset was folded into src_idx already.
          results[r].at(idx) =
              env[group[sender_pos]][n.operands[0]][0].at(src_idx);
        } while (NextIndex(out, idx));
      }
    }
    for (int64_t r = 0; r < g; ++r) env[group[r]][n.id] = {results[r]};
  }
}

void RunCollectivePermute(const Node& n, int64_t D, Env& env) {
  const Shape& shape = env[0][n.operands[0]][0].shape;
  for (int64_t d = 0; d < D; ++d) {
    if (!(env[d][n.operands[0]][0].shape == shape)) {
      throw ShapeMismatch("collective_permute %" + std::to_string(n.id) +
                          " sees differing shard shapes");
    }
  }
  std::vector<TensorValue> results(D, TensorValue{shape});
  std::vector<char> covered(D, 0);
  for (const auto& [src, dst] : n.pairs) {
    if (src < 0 || src >= D || dst < 0 || dst >= D) {
      throw InvalidAttribute("collective_permute pair (" +
                             std::to_string(src) + "," + std::to_string(dst) +
                             ") out of range for " + std::to_string(D) +
                             " devices");
    }
    if (covered[dst]) {
      throw DuplicateDestination("collective_permute destination " +
                                 std::to_string(dst) + " written twice");
    }
    covered[dst] = 1;
    results[dst] = env[src][n.operands[0]][0];
  }
  for (int64_t d = 0; d < D; ++d) env[d][n.id] = {std::move(results[d])};
}

struct LoopFrame {
  const std::vector<std::vector<TensorValue>>* carried = nullptr;  // [dev][i]
  int64_t trip = 0;
};

void ExecuteBlock(const Graph& g, int64_t D,
                  const std::vector<std::map<std::string, TensorValue>>* inputs,
                  Env& env, const LoopFrame* frame);

void RunShardedLoop(const Node& n, const Graph& outer, int64_t D, Env& env) {
  const Graph& body = *n.body;
  std::vector<std::vector<TensorValue>> carried(D);
  for (int64_t d = 0; d < D; ++d) {
    for (int64_t op : n.operands) carried[d].push_back(env[d][op][0]);
  }
  int64_t yield_id = -1;
  for (const Node& bn : body.nodes) {
    if (bn.op == OpKind::kYield) yield_id = bn.id;
  }
  if (yield_id < 0) {
    throw InvalidAttribute("sharded_loop %" + std::to_string(n.id) +
                           " body has no yield");
  }
  for (int64_t trip = 0; trip < n.trips; ++trip) {
    Env body_env(D);
    for (int64_t d = 0; d < D; ++d) body_env[d].resize(body.nodes.size());
    LoopFrame frame{&carried, trip};
    ExecuteBlock(body, D, nullptr, body_env, &frame);
    for (int64_t d = 0; d < D; ++d) {
      std::vector<TensorValue> next;
      for (int64_t op : body.node(yield_id).operands) {
        next.push_back(body_env[d][op][0]);
      }
      carried[d] = std::move(next);
    }
  }
  for (int64_t d = 0; d < D; ++d) env[d][n.id] = std::move(carried[d]);
  (void)outer;
}

void ExecuteBlock(const Graph& g, int64_t D,
                  const std::vector<std::map<std::string, TensorValue>>* inputs,
                  Env& env, const LoopFrame* frame) {
  for (const Node& n : g.nodes) {
    switch (n.op) {
      case OpKind::kAllReduce:
        RunAllReduce(n, D, env);
        break;
      case OpKind::kAllGather:
        RunAllGather(n, D, env);
        break;
      case OpKind::kAllToAll:
        RunAllToAll(n, D, env);
        break;
      case OpKind::kCollectivePermute:
        RunCollectivePermute(n, D, env);
        break;
      case OpKind::kShardedLoop:
        RunShardedLoop(n, g, D, env);
        break;
      default:
        ParallelFor(D, [&](int64_t d) {
          switch (n.op) {
            case OpKind::kParameter: {
              if (inputs == nullptr) {
                throw MissingInput("parameter inside a loop body");
              }
              auto it = (*inputs)[d].find(n.name);
              if (it == (*inputs)[d].end()) {
                throw MissingInput("device " + std::to_string(d) +
                                   " has no value for parameter '" + n.name +
                                   "'");
              }
              if (!(it->second.shape == n.shape())) {
                throw ShapeMismatch("parameter '" + n.name + "' expects " +
                                    n.shape().ToString() + ", got " +
                                    it->second.shape.ToString());
              }
              env[d][n.id] = {it->second};
              break;
            }
            case OpKind::kPartitionId:
              env[d][n.id] = {TensorValue::Scalar(static_cast<float>(d))};
              break;
            case OpKind::kLoopParam:
              if (frame == nullptr) {
                throw InvalidAttribute("loop_param outside a loop body");
              }
              env[d][n.id] = {(*frame->carried)[d].at(n.index)};
              break;
            case OpKind::kLoopIndex:
              if (frame == nullptr) {
                throw InvalidAttribute("loop_index outside a loop body");
              }
              env[d][n.id] = {
                  TensorValue::Scalar(static_cast<float>(frame->trip))};
              break;
            case OpKind::kYield: {
              std::vector<TensorValue> vals;
              for (int64_t op : n.operands) vals.push_back(env[d][op][0]);
              env[d][n.id] = std::move(vals);
              break;
            }
            case OpKind::kGetOutput:
              env[d][n.id] = {env[d][n.operands[0]].at(n.index)};
              break;
            default: {
              std::vector<const TensorValue*> args;
              args.reserve(n.operands.size());
              for (int64_t op : n.operands) args.push_back(&env[d][op][0]);
              env[d][n.id] = EvalPureOp(n, args);
            }
          }
        });
    }
  }
}

}  // namespace

void ValidateMesh(const DeviceMesh& mesh) {
  if (mesh.rows * mesh.cols != mesh.total_devices || mesh.total_devices < 1) {
    throw InvalidAttribute("mesh " + std::to_string(mesh.rows) + "x" +
                           std::to_string(mesh.cols) + " does not cover " +
                           std::to_string(mesh.total_devices) + " devices");
  }
}

std::vector<std::map<std::string, TensorValue>> RunSpmd(
    const Graph& graph, const DeviceMesh& mesh,
    const std::vector<std::map<std::string, TensorValue>>& inputs) {
  ValidateMesh(mesh);
  return RunSpmd(graph, mesh.total_devices, inputs);
}

std::vector<std::map<std::string, TensorValue>> RunSpmd(
    const Graph& graph, int64_t num_devices,
    const std::vector<std::map<std::string, TensorValue>>& inputs) {
  if (num_devices < 1) throw InvalidAttribute("need at least one device");
  if (static_cast<int64_t>(inputs.size()) != num_devices) {
    throw ShardCountMismatch("got input bindings for " +
                             std::to_string(inputs.size()) + " devices, " +
                             "expected " + std::to_string(num_devices));
  }
  Env env(num_devices);
  for (int64_t d = 0; d < num_devices; ++d) {
    env[d].resize(graph.nodes.size());
  }
  ExecuteBlock(graph, num_devices, &inputs, env, nullptr);

  std::vector<std::map<std::string, TensorValue>> outputs(num_devices);
  for (int64_t root : graph.Roots()) {
    const Node& n = graph.node(root);
    std::string key = n.name.empty() ? "%" + std::to_string(n.id) : n.name;
    for (int64_t d = 0; d < num_devices; ++d) {
      outputs[d][key] = env[d][root][0];
    }
  }
  return outputs;
}

}  // namespace shardir
