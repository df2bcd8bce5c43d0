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

#ifndef SHARDIR_IR_TEXT_H_
#define SHARDIR_IR_TEXT_H_

#include <string>

#include "shardir/graph.h"

namespace shardir {

// Text form, one node per line:
//
//   %<id> = <opkind> <attrs> (%operand, ...) : <shape> <sharding>
//
// - <opkind> for elementwise nodes is the operation name itself (add, mul,
//   select, compare, ...).
// - <attrs> are key=value pairs; strings are double-quoted, integer lists are
//   bracketed ([1,2]), permute pairs look like pairs=[(0,1),(1,2)], window
//   configs like window=[{size=3,stride=2,pad_low=1,pad_high=0,
//   base_dilation=1,window_dilation=1}].
// - <shape> is [d0,d1,...]; [] is a scalar.
// - <sharding> is optional: {replicated} or {devices=[1,2,4] ids=[0,...,7]}.
// - sharded_loop nodes carry their body inline:
//     %7 = sharded_loop trips=4 (%1, %2) : [4,2] body={
//       %0 = loop_param index=0 : [4,2]
//       ...
//       %5 = yield (%3, %4) : [4,2]
//     }
//   The body has its own node-id space.
// - Lines starting with // or # are comments.
//
// Node ids must be unique per scope; operands must reference earlier nodes.

std::string SerializeGraph(const Graph& graph);

// Throws SyntaxError with line:column context on malformed input.
Graph ParseGraph(const std::string& text);

std::string SerializeSharding(const Sharding& s);

}  // namespace shardir

#endif  // SHARDIR_IR_TEXT_H_
