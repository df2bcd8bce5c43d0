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

#include "shardir/cost_model.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "shardir/common.h"

namespace shardir {
namespace {

void CheckDevicesAndMesh(int64_t num_devices, const DeviceMesh& mesh) {
  if (num_devices < 1) {
    throw InvalidAttribute("device count must be positive, got " +
                           std::to_string(num_devices));
  }
  ValidateMesh(mesh);
  if (mesh.total_devices != num_devices) {
    throw InvalidAttribute("mesh has " + std::to_string(mesh.total_devices) +
                           " devices, expected " + std::to_string(num_devices));
  }
}

struct ParsedSignature {
  std::string name;
  std::vector<std::string> inputs;
  std::string out;
};

ParsedSignature ParseSignature(const std::string& signature) {
  std::string s;
  for (char c : signature) {
    if (c != ' ') s.push_back(c);
  }
  size_t lp = s.find('(');
  size_t rp = s.rfind(')');
  size_t arrow = s.find("->");
  if (lp == std::string::npos || rp == std::string::npos || arrow == std::string::npos ||
      lp > arrow || arrow > rp) {
    throw UnknownPattern("cannot parse op signature: " + signature);
  }
  ParsedSignature out;
  out.name = s.substr(0, lp);
  out.out = s.substr(arrow + 2, rp - arrow - 2);
  std::string args = s.substr(lp + 1, arrow - lp - 1);
  std::string cur;
  for (char c : args) {
    if (c == ',') {
      out.inputs.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.inputs.push_back(cur);
  return out;
}

bool AllDistinct(const std::string& s) {
  return std::set<char>(s.begin(), s.end()).size() == s.size();
}

}  // namespace

double CollectiveCost(const std::string& kind, double bytes_per_device,
                      int64_t num_devices, const DeviceMesh& mesh,
                      const CostModelOptions& options) {
  CheckDevicesAndMesh(num_devices, mesh);
  if (bytes_per_device < 0.0) {
    throw InvalidAttribute("collective payload must be non-negative");
  }
  double bytes = std::max(bytes_per_device, options.latency_bound_bytes);
  double d = static_cast<double>(num_devices);
  if (kind == "all_reduce") return 2.0 * bytes;
  if (kind == "all_gather") return bytes * d;
  if (kind == "all_to_all") return bytes * std::sqrt(d);
  if (kind == "collective_permute") return bytes;
  throw UnknownKind("unknown collective kind: " + kind);
}

CostEstimate OpScalability(const std::string& op_signature,
                           const std::string& sharded_letters,
                           int64_t num_devices, bool prefer_loop) {
  if (num_devices < 1) {
    throw InvalidAttribute("device count must be positive, got " +
                           std::to_string(num_devices));
  }
  ParsedSignature sig = ParseSignature(op_signature);
  std::set<char> sharded(sharded_letters.begin(), sharded_letters.end());
  const double d = static_cast<double>(num_devices);

  auto result = [](double compute, double comm, const std::string& prim) {
    CostEstimate est;
    est.compute_units = compute;
    est.comm_time_units = comm;
    est.dominant_primitive = prim;
    return est;
  };

  // Elementwise with all tensors sharded identically: purely local.
  if (sig.name == "Add" && sig.inputs.size() == 2 &&
      sig.inputs[0] == sig.inputs[1] && sig.inputs[0] == sig.out &&
      !sig.out.empty() && !sharded.empty()) {
    bool subset = true;
    for (char c : sharded) {
      if (sig.out.find(c) == std::string::npos) subset = false;
    }
    if (subset) return result(1.0, 0.0, "none");
  }

  // Matmul(ab,bc->ac) in its four sharding layouts.
  if (sig.name == "Matmul" && sig.inputs.size() == 2 &&
      sig.inputs[0].size() == 2 && sig.inputs[1].size() == 2 &&
      sig.out.size() == 2) {
    char a = sig.inputs[0][0];
    char b = sig.inputs[0][1];
    char c = sig.inputs[1][1];
    if (sig.inputs[1][0] == b && sig.out[0] == a && sig.out[1] == c &&
        AllDistinct({a, b, c})) {
      std::string loop_or_gather =
          prefer_loop ? "collective_permute" : "all_gather";
      if (sharded == std::set<char>{b}) {
        // Contracting dim sharded on both sides: local partial matmuls plus
        // a payload-sized reduction.
        return result(1.0, 1.0, "all_reduce");
      }
      if (sharded == std::set<char>{a}) {
        // Row-sharded lhs, replicated rhs: fully local.
        return result(1.0, 0.0, "none");
      }
      if (sharded == std::set<char>{a, b} || sharded == std::set<char>{a, c}) {
        // Mismatched shardings: total compute is O(D^2), so each partition
        // keeps O(D) work and moves O(D) data whichever strategy is used.
        return result(d, d, loop_or_gather);
      }
    }
  }

  // Reduce(ab->a) and Reduce(ab->b) with the first dim sharded.
  if (sig.name == "Reduce" && sig.inputs.size() == 1 &&
      sig.inputs[0].size() == 2 && sig.out.size() == 1 &&
      AllDistinct(sig.inputs[0])) {
    char a = sig.inputs[0][0];
    char b = sig.inputs[0][1];
    if (sharded == std::set<char>{a}) {
      if (sig.out[0] == a) return result(1.0, 0.0, "none");
      if (sig.out[0] == b) return result(1.0, 1.0, "all_reduce");
    }
  }

  // Token-dispatch einsum (gsec,gsm->egcm) sharded on g and e. The capacity
  // dim shrinks like 1/D, so per-partition compute stays O(1) while the
  // output resharding is an all_to_all.
  if (sig.name == "Einsum" && sig.inputs.size() == 2 &&
      sig.inputs[0].size() == 4 && sig.inputs[1].size() == 3 &&
      sig.out.size() == 4) {
    const std::string& lhs = sig.inputs[0];
    const std::string& rhs = sig.inputs[1];
    if (AllDistinct(lhs) && rhs[0] == lhs[0] && rhs[1] == lhs[1] &&
        lhs.find(rhs[2]) == std::string::npos && sig.out[0] == lhs[2] &&
        sig.out[1] == lhs[0] && sig.out[2] == lhs[3] && sig.out[3] == rhs[2] &&
        sharded == std::set<char>{lhs[0], lhs[2]}) {
      return result(1.0, std::sqrt(d), "all_to_all");
    }
  }

  // Spatially sharded convolution (bixy,xyio->boxy): halo exchange with a
  // fixed neighborhood, independent of the device count.
  if (sig.name == "Convolution" && sig.inputs.size() == 2 &&
      sig.inputs[0].size() == 4 && sig.inputs[1].size() == 4 &&
      sig.out.size() == 4) {
    const std::string& lhs = sig.inputs[0];
    const std::string& rhs = sig.inputs[1];
    std::string all = lhs + rhs.substr(0, 2) + rhs.substr(3, 1);
    if (AllDistinct(all) && rhs[2] == lhs[1] && sig.out[0] == lhs[0] &&
        sig.out[1] == rhs[3] && sig.out[2] == lhs[2] && sig.out[3] == lhs[3] &&
        sharded == std::set<char>{lhs[2]}) {
      return result(1.0, 1.0, "collective_permute");
    }
  }

  throw UnknownPattern("no scalability class for signature " + op_signature +
                       " with sharded dims {" + sharded_letters + "}");
}

MoeCostBreakdown MoeLayerCost(const MoEConfig& config, int64_t num_devices,
                              const DeviceMesh& mesh,
                              const CostModelOptions& options) {
  CheckDevicesAndMesh(num_devices, mesh);
  const int64_t d = num_devices;
  MoeFlopCounts flops = CountFlops(config, d);

  MoeCostBreakdown out;
  out.ffn_compute = static_cast<double>(flops.per_device_ffn);
  out.gate_einsum_compute = static_cast<double>(flops.per_device_softmax) +
                            static_cast<double>(flops.per_device_dispatch_combine);
  // The per-device routing masks are [G/D, S, E]; cumsum-style passes over
  // them grow linearly with the device count since E is O(D).
  out.gating_sequential_compute =
      static_cast<double>(config.groups) * static_cast<double>(config.group_size) *
      static_cast<double>(config.experts) / static_cast<double>(d);
  if (d > 1) {
    // Dispatch and combine each move the per-device [E, G/D, C, M] buffer.
    double bytes = static_cast<double>(config.experts) *
                   static_cast<double>(config.groups) *
                   static_cast<double>(config.capacity) *
                   static_cast<double>(config.model_dim) /
                   static_cast<double>(d) * static_cast<double>(sizeof(float));
    out.dispatch_combine_comm =
        2.0 * CollectiveCost("all_to_all", bytes, d, mesh, options);
  }
  return out;
}

}  // namespace shardir
