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

#ifndef SHARDIR_SPMD_H_
#define SHARDIR_SPMD_H_

#include <string>
#include <vector>

#include "shardir/graph.h"
#include "shardir/sharding.h"

namespace shardir {

// How a full tensor maps to the per-device parameter / root of an SPMD
// program: its logical shape plus the sharding the program expects.
struct SpmdBinding {
  std::string name;
  Shape full_shape;
  Sharding sharding;
};

// A single program executed by every device. Device-dependent behavior is
// expressed inside the graph via partition_id; the node count is independent
// of how many devices run it.
struct SpmdProgram {
  Graph graph;
  int64_t num_partitions = 1;
  std::vector<SpmdBinding> inputs;
  std::vector<SpmdBinding> outputs;
};

}  // namespace shardir

#endif  // SHARDIR_SPMD_H_
