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

#ifndef SHARDIR_PROPAGATION_H_
#define SHARDIR_PROPAGATION_H_

#include "shardir/graph.h"

namespace shardir {

// Fills in the sharding of every unannotated node by iterative data-flow
// analysis; user annotations are never overwritten. Deterministic: forward
// then backward sweeps to a fixed point, first assignment wins, remaining
// nodes become replicated.
//
// Preference order when several candidates exist:
//   1. keep the operand's sharding through elementwise/shape-preserving ops;
//   2. einsum dims in priority order batch, lhs non-contracting, rhs
//      non-contracting, contracting;
//   3. otherwise replicate.
//
// Elementwise ops require one common sharding across operands and result;
// two different user annotations inside such a component raise
// ConflictingAnnotations. Ops with communication rules (einsum, windowed,
// formatting) absorb mismatches instead, so user annotations there never
// conflict.
//
// Running propagate on an already fully annotated graph changes nothing.
void Propagate(Graph& graph, int64_t num_devices);

}  // namespace shardir

#endif  // SHARDIR_PROPAGATION_H_
