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

#include "shardir/shard_data.h"

#include <algorithm>

#include "shardir/common.h"

namespace shardir {

TensorValue ExtractShard(const TensorValue& full, const Sharding& sharding,
                         int64_t device_id) {
  if (sharding.replicated) return full;
  ValidateSharding(full.shape, sharding);
  PartitionShape ps = PartitionShapeOf(full.shape, sharding);
  std::vector<int64_t> offset = PartitionOffset(full.shape, sharding, device_id);
  TensorValue shard = TensorValue(ps.per_device);
  int64_t rank = full.shape.rank();
  std::vector<int64_t> idx(rank, 0);
  if (shard.data.empty()) return shard;
  do {
    bool in_range = true;
    for (int64_t d = 0; d < rank; ++d) {
      if (offset[d] + idx[d] >= full.shape.dims[d]) {
        in_range = false;
        break;
      }
    }
    if (in_range) {
      std::vector<int64_t> src(rank);
      for (int64_t d = 0; d < rank; ++d) src[d] = offset[d] + idx[d];
      shard.data[shard.LinearIndex(idx)] = full.at(src);
    }
  } while (NextIndex(ps.per_device, idx));
  return shard;
}

std::vector<TensorValue> ShardTensor(const TensorValue& full,
                                     const Sharding& sharding,
                                     int64_t num_devices) {
  std::vector<TensorValue> shards;
  shards.reserve(num_devices);
  for (int64_t d = 0; d < num_devices; ++d) {
    shards.push_back(ExtractShard(full, sharding, d));
  }
  return shards;
}

TensorValue ReassembleShards(const std::vector<TensorValue>& shards,
                             const Sharding& sharding,
                             const Shape& full_shape) {
  if (shards.empty()) throw ShardCountMismatch("no shards to reassemble");
  if (sharding.replicated) {
    if (!(shards[0].shape == full_shape)) {
      throw ShapeMismatch("replicated shard shape " +
                          shards[0].shape.ToString() + " differs from " +
                          full_shape.ToString());
    }
    return shards[0];
  }
  ValidateSharding(full_shape, sharding);
  if (static_cast<int64_t>(shards.size()) < sharding.total_partitions()) {
    throw ShardCountMismatch("need " +
                             std::to_string(sharding.total_partitions()) +
                             " shards, got " + std::to_string(shards.size()));
  }
  PartitionShape ps = PartitionShapeOf(full_shape, sharding);
  TensorValue full = TensorValue(full_shape);
  int64_t rank = full_shape.rank();
  for (int64_t device_id : sharding.assignment.device_ids) {
    const TensorValue& shard = shards[device_id];
    if (!(shard.shape == ps.per_device)) {
      throw ShapeMismatch("shard for device " + std::to_string(device_id) +
                          " has shape " + shard.shape.ToString() +
                          ", expected " + ps.per_device.ToString());
    }
    std::vector<int64_t> offset =
        PartitionOffset(full_shape, sharding, device_id);
    std::vector<int64_t> idx(rank, 0);
    if (shard.data.empty()) continue;
    do {
      bool in_range = true;
      std::vector<int64_t> dst(rank);
      for (int64_t d = 0; d < rank; ++d) {
        dst[d] = offset[d] + idx[d];
        if (dst[d] >= full_shape.dims[d]) {
          in_range = false;
          break;
        }
      }
      if (in_range) full.at(dst) = shard.data[shard.LinearIndex(idx)];
    } while (NextIndex(ps.per_device, idx));
  }
  return full;
}

std::vector<std::map<std::string, TensorValue>> ShardInputs(
    const std::map<std::string, TensorValue>& full,
    const std::vector<SpmdBinding>& bindings, int64_t num_devices) {
  std::vector<std::map<std::string, TensorValue>> per_device(num_devices);
  for (const SpmdBinding& b : bindings) {
    auto it = full.find(b.name);
    if (it == full.end()) {
      throw MissingInput("no tensor bound for input '" + b.name + "'");
    }
    if (!(it->second.shape == b.full_shape)) {
      throw ShapeMismatch("input '" + b.name + "' has shape " +
                          it->second.shape.ToString() + ", bound as " +
                          b.full_shape.ToString());
    }
    std::vector<TensorValue> shards =
        ShardTensor(it->second, b.sharding, num_devices);
    for (int64_t d = 0; d < num_devices; ++d) {
      per_device[d][b.name] = std::move(shards[d]);
    }
  }
  return per_device;
}

std::map<std::string, TensorValue> ReassembleOutputs(
    const std::vector<std::map<std::string, TensorValue>>& per_device,
    const std::vector<SpmdBinding>& bindings) {
  std::map<std::string, TensorValue> full;
  for (const SpmdBinding& b : bindings) {
    std::vector<TensorValue> shards;
    shards.reserve(per_device.size());
    for (const auto& dev : per_device) {
      auto it = dev.find(b.name);
      if (it == dev.end()) {
        throw MissingInput("device output missing root '" + b.name + "'");
      }
      shards.push_back(it->second);
    }
    full[b.name] = ReassembleShards(shards, b.sharding, b.full_shape);
  }
  return full;
}

}  // namespace shardir
