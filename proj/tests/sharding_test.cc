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

#include <cstdint>
#include <vector>

#include "doctest.h"
#include "shardir/common.h"
#include "shardir/rng.h"
#include "shardir/shard_data.h"
#include "shardir/sharding.h"
#include "shardir/tensor.h"

namespace shardir {
namespace {

// Brute-force shard extraction, written independently of ExtractShard: walk
// every coordinate of the ceil-sized per-device box and read the full tensor
// when in range, else 0.
TensorValue NaiveShard(const TensorValue& full, const Sharding& s,
                       int64_t device) {
  PartitionShape ps = PartitionShapeOf(full.shape, s);
  std::vector<int64_t> offset = PartitionOffset(full.shape, s, device);
  TensorValue shard(ps.per_device);
  std::vector<int64_t> idx(ps.per_device.rank(), 0);
  for (int64_t flat = 0; flat < ps.per_device.num_elements(); ++flat) {
    std::vector<int64_t> global(idx);
    bool inside = true;
    for (int64_t d = 0; d < ps.per_device.rank(); ++d) {
      global[d] += offset[d];
      if (global[d] >= full.shape.dims[d]) inside = false;
    }
    if (inside) shard.data[flat] = full.at(global);
    // Row-major advance.
    for (int64_t d = ps.per_device.rank() - 1; d >= 0; --d) {
      if (++idx[d] < ps.per_device.dims[d]) break;
      idx[d] = 0;
    }
  }
  return shard;
}

TensorValue RandomTensor(Shape shape, uint64_t seed) {
  TensorValue t(shape);
  for (int64_t i = 0; i < shape.num_elements(); ++i) {
    t.data[i] = static_cast<float>(NormalDouble(seed, 1, i));
  }
  return t;
}

TEST_CASE("partition shape uses ceil division per dim") {
  Shape full{{3, 16, 64}};
  Sharding s = Sharding::Tiled(DeviceAssignment{{1, 2, 4}, {0, 1, 2, 3, 4, 5,
                                                            6, 7}});
  PartitionShape ps = PartitionShapeOf(full, s);
  CHECK(ps.per_device.dims == std::vector<int64_t>{3, 8, 16});
  CHECK_FALSE(ps.has_padding);

  PartitionShape uneven =
      PartitionShapeOf(Shape{{15}}, Sharding::SplitDim(1, 0, 2));
  CHECK(uneven.per_device.dims == std::vector<int64_t>{8});
  CHECK(uneven.padded_full.dims == std::vector<int64_t>{16});
  CHECK(uneven.has_padding);
}

TEST_CASE("sharding validation rejects malformed assignments") {
  Shape full{{4, 4}};
  // Rank mismatch.
  CHECK_THROWS_AS(
      ValidateSharding(full, Sharding::Tiled(DeviceAssignment{{2}, {0, 1}})),
      InvalidSharding);
  // ids not a permutation.
  CHECK_THROWS_AS(ValidateSharding(full, Sharding::Tiled(DeviceAssignment{
                                             {2, 1}, {0, 0}})),
                  InvalidSharding);
  // Partition count zero.
  CHECK_THROWS_AS(
      ValidateSharding(full, Sharding::Tiled(DeviceAssignment{{0, 1}, {}})),
      InvalidSharding);
  CHECK_NOTHROW(ValidateSharding(
      full, Sharding::Tiled(DeviceAssignment{{2, 2}, {3, 2, 1, 0}})));
  CHECK_NOTHROW(ValidateSharding(full, Sharding::Replicated()));
}

TEST_CASE("grid position inverts the device id layout") {
  DeviceAssignment a{{2, 3}, {5, 4, 3, 2, 1, 0}};
  // device_ids is row-major over the grid: grid (i,j) holds ids[i*3+j].
  CHECK(DeviceGridPosition(a, 5) == std::vector<int64_t>{0, 0});
  CHECK(DeviceGridPosition(a, 0) == std::vector<int64_t>{1, 2});
  CHECK(DeviceGridPosition(a, 3) == std::vector<int64_t>{0, 2});
}

TEST_CASE("offsets are grid coordinate times ceil shard") {
  Shape full{{15, 6}};
  Sharding s = Sharding::Tiled(DeviceAssignment{{2, 2}, {0, 1, 2, 3}});
  // Shard sizes: ceil(15/2) = 8, ceil(6/2) = 3.
  CHECK(PartitionOffset(full, s, 0) == std::vector<int64_t>{0, 0});
  CHECK(PartitionOffset(full, s, 1) == std::vector<int64_t>{0, 3});
  CHECK(PartitionOffset(full, s, 2) == std::vector<int64_t>{8, 0});
  CHECK(PartitionOffset(full, s, 3) == std::vector<int64_t>{8, 3});
}

TEST_CASE("extract matches the naive oracle everywhere") {
  std::vector<std::pair<Shape, Sharding>> cases = {
      {Shape{{8}}, Sharding::SplitDim(1, 0, 4)},
      {Shape{{15}}, Sharding::SplitDim(1, 0, 4)},
      {Shape{{5, 7}}, Sharding::Tiled(DeviceAssignment{{2, 3}, {4, 2, 0, 5, 3,
                                                                1}})},
      {Shape{{3, 16, 64}},
       Sharding::Tiled(DeviceAssignment{{1, 2, 4}, {7, 6, 5, 4, 3, 2, 1, 0}})},
  };
  for (auto& [shape, s] : cases) {
    TensorValue full = RandomTensor(shape, 99);
    for (int64_t d = 0; d < s.total_partitions(); ++d) {
      TensorValue got = ExtractShard(full, s, d);
      TensorValue want = NaiveShard(full, s, d);
      REQUIRE(got.shape == want.shape);
      CHECK(got.data == want.data);
    }
  }
}

TEST_CASE("shard then reassemble is the identity") {
  std::vector<std::pair<Shape, Sharding>> cases = {
      {Shape{{12}}, Sharding::SplitDim(1, 0, 3)},
      {Shape{{15}}, Sharding::SplitDim(1, 0, 2)},
      {Shape{{15}}, Sharding::SplitDim(1, 0, 8)},
      {Shape{{4, 6}}, Sharding::Tiled(DeviceAssignment{{2, 2}, {1, 0, 3, 2}})},
      {Shape{{4, 6}}, Sharding::Replicated()},
  };
  for (auto& [shape, s] : cases) {
    TensorValue full = RandomTensor(shape, 7);
    int64_t devices = s.replicated ? 4 : s.total_partitions();
    std::vector<TensorValue> shards = ShardTensor(full, s, devices);
    REQUIRE(static_cast<int64_t>(shards.size()) == devices);
    TensorValue back = ReassembleShards(shards, s, shape);
    CHECK(back.shape == full.shape);
    CHECK(back.data == full.data);
  }
}

TEST_CASE("padding tail of an uneven shard is zero filled") {
  TensorValue full = RandomTensor(Shape{{15}}, 3);
  Sharding s = Sharding::SplitDim(1, 0, 2);
  TensorValue last = ExtractShard(full, s, 1);
  REQUIRE(last.shape.dims == std::vector<int64_t>{8});
  // Elements 8..14 of the full tensor, then one zero.
  for (int i = 0; i < 7; ++i) CHECK(last.data[i] == full.data[8 + i]);
  CHECK(last.data[7] == 0.0f);
}

TEST_CASE("replicated extract returns the full tensor") {
  TensorValue full = RandomTensor(Shape{{3, 3}}, 5);
  TensorValue shard = ExtractShard(full, Sharding::Replicated(), 2);
  CHECK(shard.data == full.data);
}

}  // namespace
}  // namespace shardir
