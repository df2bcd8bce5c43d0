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

#ifndef SHARDIR_INTERPRETER_H_
#define SHARDIR_INTERPRETER_H_

#include <map>
#include <string>
#include <vector>

#include "shardir/graph.h"
#include "shardir/tensor.h"

namespace shardir {

// Single-device reference semantics. Deterministic: floating-point reductions
// accumulate in ascending index order, top-k breaks ties toward the lowest
// index. This is the oracle the partitioned runtime is checked against.

// Evaluates one context-free op (anything except parameters, collectives,
// partition_id and loop plumbing) from materialized operands.
std::vector<TensorValue> EvalPureOp(const Node& node,
                                    const std::vector<const TensorValue*>& operands);

// Evaluates a full graph. Outputs are the root nodes (nodes with no users),
// keyed by node name when set, "%<id>" otherwise.
// Throws MissingInput / ShapeMismatch / UnsupportedOp.
std::map<std::string, TensorValue> Evaluate(
    const Graph& graph, const std::map<std::string, TensorValue>& inputs);

// N-dimensional windowed sum-of-products with striding, padding, base
// dilation and window dilation on every dimension. Exposed directly for
// oracle tests.
TensorValue EvaluateWindowed(const TensorValue& input,
                             const TensorValue& kernel,
                             const std::vector<WindowDimConfig>& window);

}  // namespace shardir

#endif  // SHARDIR_INTERPRETER_H_
