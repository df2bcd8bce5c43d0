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

// Cost model: collective time formulas on the idealized torus, per-operator
// scaling classes, and the mixture-of-experts layer breakdown.

#include <cmath>
#include <string>

#include "doctest.h"
#include "shardir/common.h"
#include "shardir/cost_model.h"
#include "shardir/moe.h"
#include "shardir/simulator.h"

namespace shardir {
namespace {

TEST_CASE("collective time formulas on a 4x4 torus") {
  DeviceMesh mesh{16, 4, 4, true};
  CHECK(CollectiveCost("all_reduce", 128, 16, mesh) == 256.0);
  CHECK(CollectiveCost("all_gather", 128, 16, mesh) == 128.0 * 16);
  CHECK(CollectiveCost("all_to_all", 128, 16, mesh) == 128.0 * 4);
  CHECK(CollectiveCost("collective_permute", 128, 16, mesh) == 128.0);
}

TEST_CASE("small payloads are floored at the latency bound") {
  DeviceMesh mesh = DeviceMesh::Linear(16);
  CostModelOptions opt;
  opt.latency_bound_bytes = 1024;
  CHECK(CollectiveCost("collective_permute", 8, 16, mesh, opt) == 1024.0);
  CHECK(CollectiveCost("all_reduce", 8, 16, mesh, opt) == 2048.0);
  CHECK(CollectiveCost("all_to_all", 8, 16, mesh, opt) == 4096.0);
  // Above the floor the payload wins.
  CHECK(CollectiveCost("collective_permute", 4096, 16, mesh, opt) == 4096.0);
}

TEST_CASE("collective cost rejects bad kinds, payloads, and meshes") {
  DeviceMesh mesh = DeviceMesh::Linear(4);
  CHECK_THROWS_AS(CollectiveCost("broadcast", 8, 4, mesh), UnknownKind);
  CHECK_THROWS_AS(CollectiveCost("all_reduce", -1, 4, mesh), InvalidAttribute);
  CHECK_THROWS_AS(CollectiveCost("all_reduce", 8, 4, DeviceMesh{4, 3, 2, true}),
                  InvalidAttribute);  // 3*2 != 4
  CHECK_THROWS_AS(CollectiveCost("all_reduce", 8, 8, mesh),
                  InvalidAttribute);  // mesh built for 4 devices
  CHECK_THROWS_AS(CollectiveCost("all_reduce", 8, 0, DeviceMesh::Linear(1)),
                  InvalidAttribute);
}

TEST_CASE("all_to_all grows with the square root of the device count") {
  double t16 = CollectiveCost("all_to_all", 1.0, 16, DeviceMesh::Linear(16));
  double t2048 =
      CollectiveCost("all_to_all", 1.0, 2048, DeviceMesh::Linear(2048));
  CHECK(t2048 / t16 == doctest::Approx(std::sqrt(128.0)).epsilon(1e-12));
  CHECK(t2048 / t16 == doctest::Approx(11.3137085).epsilon(1e-6));
}

TEST_CASE("identically sharded elementwise ops scale for free") {
  CostEstimate e = OpScalability("Add(ab,ab->ab)", "a", 64);
  CHECK(e.compute_units == 1.0);
  CHECK(e.comm_time_units == 0.0);
  CHECK(e.dominant_primitive == "none");
}

TEST_CASE("matmul scaling classes cover the four sharding layouts") {
  // Contracting dim on both operands: local partials plus an all_reduce.
  CostEstimate contract = OpScalability("Matmul(AB,BC->AC)", "B", 64);
  CHECK(contract.compute_units == 1.0);
  CHECK(contract.comm_time_units == 1.0);
  CHECK(contract.dominant_primitive == "all_reduce");

  // Row-sharded lhs against a replicated rhs: no communication at all.
  CostEstimate row = OpScalability("Matmul(AB,BC->AC)", "A", 64);
  CHECK(row.compute_units == 1.0);
  CHECK(row.comm_time_units == 0.0);
  CHECK(row.dominant_primitive == "none");

  // Mismatched shardings: per-partition work and data both stay O(D).
  for (const char* dims : {"AB", "AC"}) {
    CAPTURE(dims);
    CostEstimate gather = OpScalability("Matmul(AB,BC->AC)", dims, 64);
    CHECK(gather.compute_units == 64.0);
    CHECK(gather.comm_time_units == 64.0);
    CHECK(gather.dominant_primitive == "all_gather");
    CostEstimate loop = OpScalability("Matmul(AB,BC->AC)", dims, 64,
                                      /*prefer_loop=*/true);
    CHECK(loop.compute_units == 64.0);
    CHECK(loop.comm_time_units == 64.0);
    CHECK(loop.dominant_primitive == "collective_permute");
  }
}

TEST_CASE("reduce costs depend on whether the sharded dim survives") {
  CostEstimate keep = OpScalability("Reduce(ab->a)", "a", 32);
  CHECK(keep.comm_time_units == 0.0);
  CHECK(keep.dominant_primitive == "none");
  CostEstimate drop = OpScalability("Reduce(ab->b)", "a", 32);
  CHECK(drop.comm_time_units == 1.0);
  CHECK(drop.dominant_primitive == "all_reduce");
}

TEST_CASE("the token dispatch einsum reshards through all_to_all") {
  CostEstimate e = OpScalability("Einsum(GSEC,GSM->EGCM)", "GE", 16);
  CHECK(e.compute_units == 1.0);
  CHECK(e.comm_time_units == 4.0);  // sqrt(16)
  CHECK(e.dominant_primitive == "all_to_all");
}

TEST_CASE("spatially sharded convolution exchanges a fixed halo") {
  CostEstimate e = OpScalability("Convolution(BIXY,xyIO->BOXY)", "X", 64);
  CHECK(e.compute_units == 1.0);
  CHECK(e.comm_time_units == 1.0);
  CHECK(e.dominant_primitive == "collective_permute");
}

TEST_CASE("signatures are matched structurally, not by letter names") {
  CostEstimate renamed = OpScalability("Matmul(xy,yz->xz)", "y", 8);
  CHECK(renamed.dominant_primitive == "all_reduce");
  CostEstimate dispatch = OpScalability("Einsum(abcd,abe->cade)", "ac", 4);
  CHECK(dispatch.dominant_primitive == "all_to_all");
}

TEST_CASE("unsupported signatures and shardings are rejected") {
  CHECK_THROWS_AS(OpScalability("Matmul(AB,BC->AC)", "C", 8), UnknownPattern);
  CHECK_THROWS_AS(OpScalability("Frobnicate(a->a)", "a", 8), UnknownPattern);
  CHECK_THROWS_AS(OpScalability("Matmul", "A", 8), UnknownPattern);
  CHECK_THROWS_AS(OpScalability("Matmul(AB,BC->AC)", "B", 0),
                  InvalidAttribute);
}

TEST_CASE("a single-device mixture layer has no communication cost") {
  MoEConfig config(4, 32, 8, 16, 32, 0.01, 16);
  MoeCostBreakdown b = MoeLayerCost(config, 1, DeviceMesh::Linear(1));
  CHECK(b.dispatch_combine_comm == 0.0);
  CHECK(b.ffn_compute > 0.0);
}

TEST_CASE("the mixture breakdown ties out against the flop counts") {
  MoEConfig config(8, 32, 8, 16, 32, 0.01, 16);
  int64_t d = 8;
  DeviceMesh mesh = DeviceMesh::Linear(d);
  MoeFlopCounts f = CountFlops(config, d);
  MoeCostBreakdown b = MoeLayerCost(config, d, mesh);
  CHECK(b.ffn_compute == static_cast<double>(f.per_device_ffn));
  CHECK(b.gate_einsum_compute ==
        static_cast<double>(f.per_device_softmax + f.per_device_dispatch_combine));
  double bytes = 8.0 * 8 * 16 * 16 / 8 * sizeof(float);  // E*G*C*M/D floats
  CHECK(b.dispatch_combine_comm ==
        2.0 * CollectiveCost("all_to_all", bytes, d, mesh));
}

TEST_CASE("scaled workloads keep ffn and dispatch flat per device") {
  // One group and one expert per device, capacity shrinking as devices grow:
  // the per-device expert compute and dispatch/combine compute must not move
  // at all, while the gate projection grows linearly with the expert count.
  MoeFlopCounts base = CountFlops(MoEConfig(4, 32, 4, 16, 32, 0.01, 16), 4);
  MoeFlopCounts twice = CountFlops(MoEConfig(8, 32, 8, 16, 32, 0.01, 8), 8);
  MoeFlopCounts quad = CountFlops(MoEConfig(16, 32, 16, 16, 32, 0.01, 4), 16);
  CHECK(base.per_device_ffn == twice.per_device_ffn);
  CHECK(base.per_device_ffn == quad.per_device_ffn);
  CHECK(base.per_device_dispatch_combine == twice.per_device_dispatch_combine);
  CHECK(base.per_device_dispatch_combine == quad.per_device_dispatch_combine);
  CHECK(twice.per_device_softmax == 2 * base.per_device_softmax);
  CHECK(quad.per_device_softmax == 4 * base.per_device_softmax);
}

}  // namespace
}  // namespace shardir
