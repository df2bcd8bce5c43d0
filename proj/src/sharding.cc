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

#include "shardir/sharding.h"

#include <algorithm>
#include <numeric>

namespace shardir {

Sharding Sharding::SplitDim(int64_t rank, int64_t dim, int64_t num_partitions) {
  DeviceAssignment a;
  a.dims.assign(rank, 1);
  a.dims.at(dim) = num_partitions;
  a.device_ids.resize(num_partitions);
  std::iota(a.device_ids.begin(), a.device_ids.end(), 0);
  return Tiled(std::move(a));
}

std::vector<int64_t> Sharding::tiled_dims() const {
  std::vector<int64_t> result;
  if (replicated) return result;
  for (size_t d = 0; d < assignment.dims.size(); ++d) {
    if (assignment.dims[d] > 1) result.push_back(static_cast<int64_t>(d));
  }
  return result;
}

std::string Sharding::ToString() const {
  if (replicated) return "{replicated}";
  std::string s = "{devices=[";
  for (size_t i = 0; i < assignment.dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(assignment.dims[i]);
  }
  s += "] ids=[";
  for (size_t i = 0; i < assignment.device_ids.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(assignment.device_ids[i]);
  }
  s += "]}";
  return s;
}

void ValidateSharding(const Shape& shape, const Sharding& s) {
  if (s.replicated) return;
  const DeviceAssignment& a = s.assignment;
  if (static_cast<int64_t>(a.dims.size()) != shape.rank()) {
    throw InvalidSharding("assignment rank " + std::to_string(a.dims.size()) +
                          " != tensor rank " + std::to_string(shape.rank()));
  }
  int64_t total = 1;
  for (int64_t d : a.dims) {
    if (d <= 0) throw InvalidSharding("non-positive partition count");
    total *= d;
  }
  if (static_cast<int64_t>(a.device_ids.size()) != total) {
    throw InvalidSharding("device id count " +
                          std::to_string(a.device_ids.size()) +
                          " != total partitions " + std::to_string(total));
  }
  std::vector<int64_t> sorted = a.device_ids;
  std::sort(sorted.begin(), sorted.end());
  for (int64_t i = 0; i < total; ++i) {
    if (sorted[i] != i) {
      throw InvalidSharding("device ids are not a permutation of 0.." +
                            std::to_string(total - 1));
    }
  }
}

PartitionShape PartitionShapeOf(const Shape& full, const Sharding& s) {
  PartitionShape result;
  result.per_device = full;
  result.padded_full = full;
  if (s.replicated) return result;
  for (int64_t d = 0; d < full.rank(); ++d) {
    int64_t parts = s.assignment.dims[d];
    int64_t per = CeilDiv(full.dims[d], parts);
    result.per_device.dims[d] = per;
    result.padded_full.dims[d] = per * parts;
    if (per * parts != full.dims[d]) result.has_padding = true;
  }
  return result;
}

std::vector<int64_t> DeviceGridPosition(const DeviceAssignment& a,
                                        int64_t device_id) {
  int64_t flat = -1;
  for (size_t i = 0; i < a.device_ids.size(); ++i) {
    if (a.device_ids[i] == device_id) {
      flat = static_cast<int64_t>(i);
      break;
    }
  }
  if (flat < 0) {
    throw InvalidSharding("device " + std::to_string(device_id) +
                          " not in assignment");
  }
  std::vector<int64_t> pos(a.dims.size(), 0);
  for (int64_t d = static_cast<int64_t>(a.dims.size()) - 1; d >= 0; --d) {
    pos[d] = flat % a.dims[d];
    flat /= a.dims[d];
  }
  return pos;
}

std::vector<int64_t> PartitionOffset(const Shape& full, const Sharding& s,
                                     int64_t device_id) {
  std::vector<int64_t> offsets(full.rank(), 0);
  if (s.replicated) return offsets;
  PartitionShape ps = PartitionShapeOf(full, s);
  std::vector<int64_t> pos = DeviceGridPosition(s.assignment, device_id);
  for (int64_t d = 0; d < full.rank(); ++d) {
    offsets[d] = pos[d] * ps.per_device.dims[d];
  }
  return offsets;
}

}  // namespace shardir
