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

#ifndef SHARDIR_SHARD_DATA_H_
#define SHARDIR_SHARD_DATA_H_

#include <map>
#include <string>
#include <vector>

#include "shardir/sharding.h"
#include "shardir/spmd.h"
#include "shardir/tensor.h"

namespace shardir {

// Extracts the shard of `full` owned by `device_id` under `sharding`.
// Every shard has the same (ceil-divided) shape; positions that fall past the
// true extent are zero-filled.
TensorValue ExtractShard(const TensorValue& full, const Sharding& sharding,
                         int64_t device_id);

// Shards `full` for all devices of the assignment, indexed by device id.
// For replicated shardings, every device receives a copy.
std::vector<TensorValue> ShardTensor(const TensorValue& full,
                                     const Sharding& sharding,
                                     int64_t num_devices);

// Inverse of ShardTensor: stitches per-device shards (indexed by device id)
// back into a tensor of shape `full_shape`, dropping zero padding. For
// replicated shardings the device 0 copy is returned.
TensorValue ReassembleShards(const std::vector<TensorValue>& shards,
                             const Sharding& sharding,
                             const Shape& full_shape);

// Shards every bound input of an SPMD program. Throws MissingInput if `full`
// lacks a bound name.
std::vector<std::map<std::string, TensorValue>> ShardInputs(
    const std::map<std::string, TensorValue>& full,
    const std::vector<SpmdBinding>& bindings, int64_t num_devices);

// Reassembles every bound output from per-device result maps.
std::map<std::string, TensorValue> ReassembleOutputs(
    const std::vector<std::map<std::string, TensorValue>>& per_device,
    const std::vector<SpmdBinding>& bindings);

}  // namespace shardir

#endif  // SHARDIR_SHARD_DATA_H_
