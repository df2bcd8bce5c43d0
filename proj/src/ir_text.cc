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

#include "shardir/ir_text.h"

#include <cctype>
#include <cstdlib>
#include <map>
#include <sstream>

#include "shardir/tensor.h"

namespace shardir {

namespace {

std::string ShapeList(const std::vector<int64_t>& v) {
  std::string s = "[";
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s + "]";
}

void AppendAttrs(const Node& n, std::string& out) {
  auto attr = [&out](const std::string& key, const std::string& value) {
    out += " " + key + "=" + value;
  };
  switch (n.op) {
    case OpKind::kConstant: {
      std::string v = "[";
      for (size_t i = 0; i < n.literal.size(); ++i) {
        if (i) v += ",";
        v += FloatToString(n.literal[i]);
      }
      attr("value", v + "]");
      break;
    }
    case OpKind::kIota:
      attr("dim", std::to_string(n.dim));
      break;
    case OpKind::kElementwise:
      if (n.elem_kind == ElementwiseKind::kCompare) {
        attr("cmp", CompareKindToString(n.cmp_kind));
      }
      break;
    case OpKind::kEinsum:
      attr("spec", "\"" + n.einsum_spec + "\"");
      break;
    case OpKind::kConvolution: {
      std::string v = "[";
      for (size_t i = 0; i < n.window.size(); ++i) {
        const WindowDimConfig& w = n.window[i];
        if (i) v += ",";
        v += "{size=" + std::to_string(w.size) +
             ",stride=" + std::to_string(w.stride) +
             ",pad_low=" + std::to_string(w.padding_low) +
             ",pad_high=" + std::to_string(w.padding_high) +
             ",base_dilation=" + std::to_string(w.base_dilation) +
             ",window_dilation=" + std::to_string(w.window_dilation) + "}";
      }
      attr("window", v + "]");
      break;
    }
    case OpKind::kPad:
      attr("low", ShapeList(n.pad_low));
      attr("high", ShapeList(n.pad_high));
      attr("interior", ShapeList(n.pad_interior));
      break;
    case OpKind::kSlice:
      attr("starts", ShapeList(n.slice_starts));
      attr("limits", ShapeList(n.slice_limits));
      attr("strides", ShapeList(n.slice_strides));
      break;
    case OpKind::kReverse:
      attr("dims", ShapeList(n.dims));
      break;
    case OpKind::kReduce:
      attr("op", ReduceKindToString(n.reduce_kind));
      attr("dims", ShapeList(n.dims));
      break;
    case OpKind::kCumsum:
      attr("dim", std::to_string(n.dim));
      attr("exclusive", n.exclusive ? "true" : "false");
      break;
    case OpKind::kTopK:
      attr("k", std::to_string(n.k));
      attr("dim", std::to_string(n.dim));
      break;
    case OpKind::kSoftmax:
      attr("dim", std::to_string(n.dim));
      break;
    case OpKind::kOneHot:
      attr("depth", std::to_string(n.depth));
      attr("dim", std::to_string(n.dim));
      break;
    case OpKind::kDynamicSlice:
      attr("sizes", ShapeList(n.dynamic_sizes));
      break;
    case OpKind::kGetOutput:
    case OpKind::kLoopParam:
      attr("index", std::to_string(n.index));
      break;
    case OpKind::kShardedLoop:
      attr("trips", std::to_string(n.trips));
      break;
    case OpKind::kAllReduce:
      attr("op", ReduceKindToString(n.reduce_kind));
      break;
    case OpKind::kAllGather:
      attr("dim", std::to_string(n.dim));
      break;
    case OpKind::kAllToAll:
      attr("split", std::to_string(n.split_dim));
      attr("concat", std::to_string(n.concat_dim));
      break;
    case OpKind::kCollectivePermute: {
      std::string v = "[";
      for (size_t i = 0; i < n.pairs.size(); ++i) {
        if (i) v += ",";
        v += "(" + std::to_string(n.pairs[i].first) + "," +
             std::to_string(n.pairs[i].second) + ")";
      }
      attr("pairs", v + "]");
      break;
    }
    default:
      break;
  }
  if ((n.op == OpKind::kAllReduce || n.op == OpKind::kAllGather ||
       n.op == OpKind::kAllToAll) &&
      !n.groups.empty()) {
    std::string v = "[";
    for (size_t i = 0; i < n.groups.size(); ++i) {
      if (i) v += ",";
      v += ShapeList(n.groups[i]);
    }
    attr("groups", v + "]");
  }
  if (!n.name.empty()) attr("name", "\"" + n.name + "\"");
}

std::string OpToken(const Node& n) {
  if (n.op == OpKind::kElementwise) {
    return ElementwiseKindToString(n.elem_kind);
  }
  return OpKindToString(n.op);
}

void SerializeInto(const Graph& g, std::string& out, const std::string& indent) {
  for (const Node& n : g.nodes) {
    out += indent + "%" + std::to_string(n.id) + " = " + OpToken(n);
    AppendAttrs(n, out);
    if (!n.operands.empty()) {
      out += " (";
      for (size_t i = 0; i < n.operands.size(); ++i) {
        if (i) out += ", ";
        out += "%" + std::to_string(n.operands[i]);
      }
      out += ")";
    }
    out += " : " + n.shape().ToString();
    if (n.sharding.has_value()) out += " " + n.sharding->ToString();
    if (n.op == OpKind::kShardedLoop) {
      out += " body={\n";
      SerializeInto(*n.body, out, indent + "  ");
      out += indent + "}";
    }
    out += "\n";
  }
}

// --- Parsing ----------------------------------------------------------------

struct Cursor {
  const std::string& text;
  size_t pos = 0;
  int line = 1;
  int col = 1;

  explicit Cursor(const std::string& t) : text(t) {}

  [[noreturn]] void Fail(const std::string& message) const {
    throw SyntaxError(std::to_string(line) + ":" + std::to_string(col) + ": " +
                      message);
  }

  bool AtEnd() const { return pos >= text.size(); }
  char Peek() const { return AtEnd() ? '\0' : text[pos]; }

  char Next() {
    char c = text[pos++];
    if (c == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    return c;
  }

  // Skips spaces/tabs and comments, not newlines.
  void SkipSpace() {
    while (!AtEnd()) {
      char c = Peek();
      if (c == ' ' || c == '\t' || c == '\r') {
        Next();
      } else if (c == '/' && pos + 1 < text.size() && text[pos + 1] == '/') {
        while (!AtEnd() && Peek() != '\n') Next();
      } else if (c == '#') {
        while (!AtEnd() && Peek() != '\n') Next();
      } else {
        break;
      }
    }
  }

  void SkipBlank() {
    while (true) {
      SkipSpace();
      if (!AtEnd() && Peek() == '\n') {
        Next();
      } else {
        break;
      }
    }
  }

  void Expect(char c) {
    SkipSpace();
    if (AtEnd() || Peek() != c) {
      Fail(std::string("expected '") + c + "'");
    }
    Next();
  }

  bool TryConsume(char c) {
    SkipSpace();
    if (!AtEnd() && Peek() == c) {
      Next();
      return true;
    }
    return false;
  }

  std::string Ident() {
    SkipSpace();
    std::string s;
    while (!AtEnd() && (std::isalnum(static_cast<unsigned char>(Peek())) ||
                        Peek() == '_')) {
      s += Next();
    }
    if (s.empty()) Fail("expected identifier");
    return s;
  }

  int64_t Int() {
    SkipSpace();
    std::string s;
    if (Peek() == '-' || Peek() == '+') s += Next();
    while (!AtEnd() && std::isdigit(static_cast<unsigned char>(Peek()))) {
      s += Next();
    }
    if (s.empty() || s == "-" || s == "+") Fail("expected integer");
    return std::strtoll(s.c_str(), nullptr, 10);
  }

  float Float() {
    SkipSpace();
    std::string s;
    while (!AtEnd() && (std::isdigit(static_cast<unsigned char>(Peek())) ||
                        Peek() == '-' || Peek() == '+' || Peek() == '.' ||
                        Peek() == 'e' || Peek() == 'E' || Peek() == 'n' ||
                        Peek() == 'a' || Peek() == 'i' || Peek() == 'f')) {
      s += Next();
    }
    if (s.empty()) Fail("expected number");
    return std::strtof(s.c_str(), nullptr);
  }

  std::string QuotedString() {
    SkipSpace();
    if (Peek() != '"') Fail("expected quoted string");
    Next();
    std::string s;
    while (!AtEnd() && Peek() != '"') {
      if (Peek() == '\n') Fail("unterminated string");
      s += Next();
    }
    if (AtEnd()) Fail("unterminated string");
    Next();
    return s;
  }

  std::vector<int64_t> IntList() {
    Expect('[');
    std::vector<int64_t> v;
    SkipSpace();
    if (TryConsume(']')) return v;
    while (true) {
      v.push_back(Int());
      if (TryConsume(']')) break;
      Expect(',');
    }
    return v;
  }

  std::vector<float> FloatList() {
    Expect('[');
    std::vector<float> v;
    SkipSpace();
    if (TryConsume(']')) return v;
    while (true) {
      v.push_back(Float());
      if (TryConsume(']')) break;
      Expect(',');
    }
    return v;
  }
};

int64_t NodeRef(Cursor& c, const std::map<int64_t, int64_t>& id_map) {
  c.Expect('%');
  int64_t declared = c.Int();
  auto it = id_map.find(declared);
  if (it == id_map.end()) {
    c.Fail("operand %" + std::to_string(declared) + " not defined yet");
  }
  return it->second;
}

Sharding ParseShardingBody(Cursor& c) {
  // Caller consumed '{'.
  c.SkipSpace();
  std::string word = c.Ident();
  if (word == "replicated") {
    c.Expect('}');
    return Sharding::Replicated();
  }
  if (word != "devices") c.Fail("expected 'replicated' or 'devices'");
  c.Expect('=');
  DeviceAssignment a;
  a.dims = c.IntList();
  std::string ids = c.Ident();
  if (ids != "ids") c.Fail("expected 'ids'");
  c.Expect('=');
  a.device_ids = c.IntList();
  c.Expect('}');
  return Sharding::Tiled(std::move(a));
}

OpKind OpKindFromToken(Cursor& c, const std::string& token,
                       ElementwiseKind& elem_kind) {
  static const std::map<std::string, ElementwiseKind> kElementwise = {
      {"add", ElementwiseKind::kAdd},     {"sub", ElementwiseKind::kSub},
      {"mul", ElementwiseKind::kMul},     {"div", ElementwiseKind::kDiv},
      {"max", ElementwiseKind::kMax},     {"exp", ElementwiseKind::kExp},
      {"relu", ElementwiseKind::kRelu},   {"select", ElementwiseKind::kSelect},
      {"compare", ElementwiseKind::kCompare},
      {"floor", ElementwiseKind::kFloor},
  };
  auto ew = kElementwise.find(token);
  if (ew != kElementwise.end()) {
    elem_kind = ew->second;
    return OpKind::kElementwise;
  }
  static const std::map<std::string, OpKind> kOps = {
      {"parameter", OpKind::kParameter},
      {"constant", OpKind::kConstant},
      {"iota", OpKind::kIota},
      {"einsum", OpKind::kEinsum},
      {"convolution", OpKind::kConvolution},
      {"pad", OpKind::kPad},
      {"slice", OpKind::kSlice},
      {"reshape", OpKind::kReshape},
      {"reverse", OpKind::kReverse},
      {"reduce", OpKind::kReduce},
      {"cumsum", OpKind::kCumsum},
      {"topk", OpKind::kTopK},
      {"softmax", OpKind::kSoftmax},
      {"one_hot", OpKind::kOneHot},
      {"dynamic_slice", OpKind::kDynamicSlice},
      {"broadcast", OpKind::kBroadcast},
      {"partition_id", OpKind::kPartitionId},
      {"dynamic_update_slice", OpKind::kDynamicUpdateSlice},
      {"all_reduce", OpKind::kAllReduce},
      {"all_gather", OpKind::kAllGather},
      {"all_to_all", OpKind::kAllToAll},
      {"collective_permute", OpKind::kCollectivePermute},
      {"sharded_loop", OpKind::kShardedLoop},
      {"loop_param", OpKind::kLoopParam},
      {"loop_index", OpKind::kLoopIndex},
      {"yield", OpKind::kYield},
      {"get_output", OpKind::kGetOutput},
  };
  auto it = kOps.find(token);
  if (it == kOps.end()) c.Fail("unknown op '" + token + "'");
  return it->second;
}

CompareKind CompareKindFromToken(Cursor& c, const std::string& token) {
  static const std::map<std::string, CompareKind> kCmp = {
      {"lt", CompareKind::kLt}, {"le", CompareKind::kLe},
      {"gt", CompareKind::kGt}, {"ge", CompareKind::kGe},
      {"eq", CompareKind::kEq}, {"ne", CompareKind::kNe},
  };
  auto it = kCmp.find(token);
  if (it == kCmp.end()) c.Fail("unknown compare kind '" + token + "'");
  return it->second;
}

ReduceKind ReduceKindFromToken(Cursor& c, const std::string& token) {
  static const std::map<std::string, ReduceKind> kReduce = {
      {"add", ReduceKind::kAdd},
      {"max", ReduceKind::kMax},
      {"min", ReduceKind::kMin},
  };
  auto it = kReduce.find(token);
  if (it == kReduce.end()) c.Fail("unknown reduce kind '" + token + "'");
  return it->second;
}

std::vector<WindowDimConfig> ParseWindowList(Cursor& c) {
  std::vector<WindowDimConfig> result;
  c.Expect('[');
  if (c.TryConsume(']')) return result;
  while (true) {
    c.Expect('{');
    WindowDimConfig w;
    while (true) {
      std::string key = c.Ident();
      c.Expect('=');
      int64_t v = c.Int();
      if (key == "size") w.size = v;
      else if (key == "stride") w.stride = v;
      else if (key == "pad_low") w.padding_low = v;
      else if (key == "pad_high") w.padding_high = v;
      else if (key == "base_dilation") w.base_dilation = v;
      else if (key == "window_dilation") w.window_dilation = v;
      else c.Fail("unknown window key '" + key + "'");
      if (c.TryConsume('}')) break;
      c.Expect(',');
    }
    result.push_back(w);
    if (c.TryConsume(']')) break;
    c.Expect(',');
  }
  return result;
}

std::vector<std::pair<int64_t, int64_t>> ParsePairList(Cursor& c) {
  std::vector<std::pair<int64_t, int64_t>> result;
  c.Expect('[');
  if (c.TryConsume(']')) return result;
  while (true) {
    c.Expect('(');
    int64_t a = c.Int();
    c.Expect(',');
    int64_t b = c.Int();
    c.Expect(')');
    result.emplace_back(a, b);
    if (c.TryConsume(']')) break;
    c.Expect(',');
  }
  return result;
}

std::vector<std::vector<int64_t>> ParseGroupList(Cursor& c) {
  std::vector<std::vector<int64_t>> result;
  c.Expect('[');
  if (c.TryConsume(']')) return result;
  while (true) {
    result.push_back(c.IntList());
    if (c.TryConsume(']')) break;
    c.Expect(',');
  }
  return result;
}

Graph ParseScope(Cursor& c, bool nested);

// Parses one node line (cursor sits at '%'). Returns false when the scope's
// closing '}' was found instead.
bool ParseNodeLine(Cursor& c, Graph& g, std::map<int64_t, int64_t>& id_map,
                   bool nested) {
  c.SkipBlank();
  if (c.AtEnd()) {
    if (nested) c.Fail("missing '}' closing loop body");
    return false;
  }
  if (nested && c.Peek() == '}') {
    c.Next();
    return false;
  }
  c.Expect('%');
  int64_t declared_id = c.Int();
  if (id_map.count(declared_id)) {
    c.Fail("duplicate node id %" + std::to_string(declared_id));
  }
  c.Expect('=');
  Node n;
  std::string token = c.Ident();
  n.op = OpKindFromToken(c, token, n.elem_kind);

  bool has_body_marker = false;
  // Attributes until '(' operands, ':' shape, or end of line.
  while (true) {
    c.SkipSpace();
    char ch = c.Peek();
    if (ch == '(' || ch == ':' || ch == '\n' || c.AtEnd()) break;
    std::string key = c.Ident();
    c.Expect('=');
    if (key == "name") n.name = c.QuotedString();
    else if (key == "spec") n.einsum_spec = c.QuotedString();
    else if (key == "value") n.literal = c.FloatList();
    else if (key == "dim") n.dim = c.Int();
    else if (key == "dims") n.dims = c.IntList();
    else if (key == "k") n.k = c.Int();
    else if (key == "depth") n.depth = c.Int();
    else if (key == "index") n.index = c.Int();
    else if (key == "trips") n.trips = c.Int();
    else if (key == "split") n.split_dim = c.Int();
    else if (key == "concat") n.concat_dim = c.Int();
    else if (key == "low") n.pad_low = c.IntList();
    else if (key == "high") n.pad_high = c.IntList();
    else if (key == "interior") n.pad_interior = c.IntList();
    else if (key == "starts") n.slice_starts = c.IntList();
    else if (key == "limits") n.slice_limits = c.IntList();
    else if (key == "strides") n.slice_strides = c.IntList();
    else if (key == "sizes") n.dynamic_sizes = c.IntList();
    else if (key == "cmp") n.cmp_kind = CompareKindFromToken(c, c.Ident());
    else if (key == "op") n.reduce_kind = ReduceKindFromToken(c, c.Ident());
    else if (key == "exclusive") {
      std::string v = c.Ident();
      if (v != "true" && v != "false") c.Fail("exclusive must be true|false");
      n.exclusive = (v == "true");
    } else if (key == "window") n.window = ParseWindowList(c);
    else if (key == "pairs") n.pairs = ParsePairList(c);
    else if (key == "groups") n.groups = ParseGroupList(c);
    else c.Fail("unknown attribute '" + key + "'");
  }

  if (c.TryConsume('(')) {
    if (!c.TryConsume(')')) {
      while (true) {
        n.operands.push_back(NodeRef(c, id_map));
        if (c.TryConsume(')')) break;
        c.Expect(',');
      }
    }
  }

  c.Expect(':');
  Shape declared_shape{c.IntList()};
  n.out_shapes = {declared_shape};

  // Optional sharding, then optional body marker.
  c.SkipSpace();
  if (!c.AtEnd() && c.Peek() == '{') {
    c.Next();
    n.sharding = ParseShardingBody(c);
  }
  c.SkipSpace();
  if (!c.AtEnd() && c.Peek() == 'b') {
    std::string word = c.Ident();
    if (word != "body") c.Fail("expected 'body'");
    c.Expect('=');
    c.Expect('{');
    has_body_marker = true;
  }
  if (has_body_marker != (n.op == OpKind::kShardedLoop)) {
    c.Fail("body={...} is required exactly for sharded_loop");
  }
  if (has_body_marker) {
    n.body = std::make_shared<Graph>(ParseScope(c, /*nested=*/true));
  }

  // Tuple-producing ops re-infer their full shape list after insertion.
  int64_t new_id = g.Add(std::move(n));
  id_map[declared_id] = new_id;
  Node& added = g.node(new_id);
  if (added.op == OpKind::kTopK || added.op == OpKind::kShardedLoop ||
      added.op == OpKind::kYield) {
    try {
      added.out_shapes = InferShapes(g, added);
    } catch (const Error& e) {
      c.Fail(e.what());
    }
  }
  c.SkipSpace();
  if (!c.AtEnd() && c.Peek() != '\n') c.Fail("trailing characters");
  return true;
}

Graph ParseScope(Cursor& c, bool nested) {
  Graph g;
  std::map<int64_t, int64_t> id_map;
  while (ParseNodeLine(c, g, id_map, nested)) {
  }
  return g;
}

}  // namespace

std::string SerializeGraph(const Graph& graph) {
  std::string out;
  SerializeInto(graph, out, "");
  return out;
}

Graph ParseGraph(const std::string& text) {
  Cursor c(text);
  Graph g = ParseScope(c, /*nested=*/false);
  c.SkipBlank();
  if (!c.AtEnd()) c.Fail("unexpected trailing input");
  return g;
}

std::string SerializeSharding(const Sharding& s) { return s.ToString(); }

}  // namespace shardir
