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

#ifndef SHARDIR_SHARDING_H_
#define SHARDIR_SHARDING_H_

#include <cstdint>
#include <string>
#include <vector>

#include "shardir/common.h"
#include "shardir/shape.h"

namespace shardir {

// Multi-dimensional device assignment: same rank as the tensor it annotates;
// dims[i] = number of partitions of tensor dim i; device_ids lists, in
// row-major order over dims, which device owns each slice. device_ids is a
// permutation of 0..P-1 where P = product(dims).
struct DeviceAssignment {
  std::vector<int64_t> dims;
  std::vector<int64_t> device_ids;

  int64_t num_partitions() const {
    int64_t n = 1;
    for (int64_t d : dims) n *= d;
    return n;
  }
  bool operator==(const DeviceAssignment&) const = default;
};

struct Sharding {
  bool replicated = true;
  DeviceAssignment assignment;  // meaningful only when !replicated

  static Sharding Replicated() { return Sharding{}; }
  static Sharding Tiled(DeviceAssignment a) {
    Sharding s;
    s.replicated = false;
    s.assignment = std::move(a);
    return s;
  }
  // 1-D tiling of `dim` into `num_partitions` slices, natural device order,
  // for a tensor of rank `rank`.
  static Sharding SplitDim(int64_t rank, int64_t dim, int64_t num_partitions);

  bool operator==(const Sharding&) const = default;

  // Partition count along tensor dim d (1 when replicated).
  int64_t partitions_of_dim(int64_t d) const {
    return replicated ? 1 : assignment.dims.at(d);
  }
  int64_t total_partitions() const {
    return replicated ? 1 : assignment.num_partitions();
  }
  // Dims with more than one partition.
  std::vector<int64_t> tiled_dims() const;

  std::string ToString() const;
};

// Throws InvalidSharding unless `s` is structurally valid for `shape`:
// matching rank, positive partition counts, ids a permutation of 0..P-1.
void ValidateSharding(const Shape& shape, const Sharding& s);

// Per-device slice extents and the padded full extents. Every partition gets
// ceil(full/parts) elements per dim; the trailing partitions of an uneven dim
// hold padding.
struct PartitionShape {
  Shape per_device;
  Shape padded_full;
  bool has_padding = false;
};

PartitionShape PartitionShapeOf(const Shape& full, const Sharding& s);

// Grid coordinates (one per tensor dim) of `device_id` in the assignment.
// Throws InvalidSharding when the device does not appear.
std::vector<int64_t> DeviceGridPosition(const DeviceAssignment& a,
                                        int64_t device_id);

// Element offsets (per dim) of the slice `device_id` owns.
std::vector<int64_t> PartitionOffset(const Shape& full, const Sharding& s,
                                     int64_t device_id);

}  // namespace shardir

#endif  // SHARDIR_SHARDING_H_
