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

#ifndef SHARDIR_CORPUS_H_
#define SHARDIR_CORPUS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "shardir/graph.h"
#include "shardir/partitioner.h"

namespace shardir {

// One ready-to-partition workload: an annotated (not yet propagated) graph
// plus the partition options it is meant to run with. Tensor extents scale
// with the device count, so a family instantiated at different counts yields
// per-device programs of identical structure and size.
struct CorpusEntry {
  std::string name;
  Graph graph;
  PartitionOptions options;
};

// All workload families instantiated for num_devices devices:
//   elementwise_chain    add/mul/relu/compare/select over [4D,6]
//   einsum_contracting   AB,BC->AC with the contracting dim sharded (B=4D)
//   einsum_dispatch      GSEC,GSM->EGCM resharded from groups to experts
//   einsum_gather        mismatched shardings, replicate-one-side strategy
//   einsum_loop          mismatched shardings, rotating-loop strategy
//   reduce_uneven        add and max reductions of [15] with tail masking
//   format_chain         reverse, strided slice, interior pad over [8D]
//   reshape_uneven       [3D/2,2] -> [3D], uneven input to even output
//   conv_halo            size-3 stride-2 convolution over [3D]
//   conv_base_dilation_{1,2,3}  the three dilated lowering layouts
//   conv_window_dilation dilated kernel over [4D]
//   moe                  full mixture-of-experts layer with G = E = D
std::vector<CorpusEntry> BuildCorpus(int64_t num_devices);

// Single family by name. Throws UnknownPattern for names not listed above.
CorpusEntry BuildCorpusEntry(const std::string& name, int64_t num_devices);

std::vector<std::string> CorpusNames();

}  // namespace shardir

#endif  // SHARDIR_CORPUS_H_
