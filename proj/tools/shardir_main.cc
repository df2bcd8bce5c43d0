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

// Command-line driver: parse -> propagate -> partition -> simulate -> report.
// Subcommands: partition, verify, cost, moe, corpus. All output is
// deterministic: same flags and seed produce byte-identical stdout and dump
// files regardless of SHARDIR_THREADS.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "shardir/common.h"
#include "shardir/corpus.h"
#include "shardir/cost_model.h"
#include "shardir/graph.h"
#include "shardir/ir_text.h"
#include "shardir/moe.h"
#include "shardir/partitioner.h"
#include "shardir/propagation.h"
#include "shardir/sharding.h"
#include "shardir/simulator.h"
#include "shardir/spmd.h"
#include "shardir/tensor.h"
#include "shardir/verify.h"

namespace shardir {
namespace {

std::string Num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string ReadFileOrThrow(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open \"" + path + "\"");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileOrThrow(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write \"" + path + "\"");
  out << text;
}

void CountCollectives(const Graph& g, std::map<std::string, int64_t>& counts) {
  for (const Node& n : g.nodes) {
    switch (n.op) {
      case OpKind::kAllReduce:
      case OpKind::kAllGather:
      case OpKind::kAllToAll:
      case OpKind::kCollectivePermute:
        ++counts[OpKindToString(n.op)];
        break;
      case OpKind::kShardedLoop:
        if (n.body) CountCollectives(*n.body, counts);
        break;
      default:
        break;
    }
  }
}

int64_t CountNodes(const Graph& g) {
  int64_t total = static_cast<int64_t>(g.nodes.size());
  for (const Node& n : g.nodes) {
    if (n.op == OpKind::kShardedLoop && n.body) total += CountNodes(*n.body);
  }
  return total;
}

std::string CollectiveSummary(const std::map<std::string, int64_t>& counts) {
  static const char* kKinds[] = {"all_gather", "all_reduce", "all_to_all",
                                 "collective_permute"};
  int64_t total = 0;
  std::string line = "collectives:";
  for (const char* kind : kKinds) {
    auto it = counts.find(kind);
    int64_t c = it == counts.end() ? 0 : it->second;
    total += c;
    line += " " + std::string(kind) + "=" + std::to_string(c);
  }
  line += " total=" + std::to_string(total);
  return line;
}

// Graph text prefixed with the partition count and the input/output bindings
// that tell each device which shard of every full tensor it holds.
std::string ProgramText(const SpmdProgram& program) {
  std::string text = "// spmd partitions=" +
                     std::to_string(program.num_partitions) + "\n";
  for (const SpmdBinding& b : program.inputs) {
    text += "// input " + b.name + " : " + b.full_shape.ToString() + " " +
            SerializeSharding(b.sharding) + "\n";
  }
  for (const SpmdBinding& b : program.outputs) {
    text += "// output " + b.name + " : " + b.full_shape.ToString() + " " +
            SerializeSharding(b.sharding) + "\n";
  }
  text += SerializeGraph(program.graph);
  return text;
}

SpmdProgram LoadAndPartition(const std::string& path, int64_t devices,
                             const PartitionOptions& options, Graph* source) {
  Graph graph = ParseGraph(ReadFileOrThrow(path));
  if (source) *source = graph;
  Propagate(graph, devices);
  return PartitionGraph(graph, devices, options);
}

// ---------------------------------------------------------------------------
// partition

int RunPartition(const std::string& path, int64_t devices,
                 const std::string& dump, int64_t memory_budget) {
  PartitionOptions options;
  options.memory_budget_bytes = memory_budget;
  SpmdProgram program = LoadAndPartition(path, devices, options, nullptr);
  std::string text = ProgramText(program);
  std::cout << text;
  std::cout << "nodes: " << CountNodes(program.graph) << "\n";
  std::map<std::string, int64_t> counts;
  CountCollectives(program.graph, counts);
  std::cout << CollectiveSummary(counts) << "\n";
  if (!dump.empty()) WriteFileOrThrow(dump, text);
  return 0;
}

// ---------------------------------------------------------------------------
// verify

std::string IndexToString(const std::vector<int64_t>& idx) {
  std::string s = "[";
  for (size_t i = 0; i < idx.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(idx[i]);
  }
  return s + "]";
}

int RunVerify(const std::string& path, int64_t devices, uint64_t seed,
              double tolerance, const std::string& dump,
              const std::string& format, int64_t memory_budget, bool perturb) {
  Graph graph = ParseGraph(ReadFileOrThrow(path));
  PartitionOptions options;
  options.memory_budget_bytes = memory_budget;
  VerifyResult result =
      VerifyPartitioning(graph, devices, seed, options, perturb);
  std::cout << "devices: " << devices << " seed: " << seed
            << " tolerance: " << Num(tolerance) << "\n";
  std::cout << "nodes: " << result.partitioned_node_count << "\n";
  std::cout << CollectiveSummary(result.collective_counts) << "\n";
  std::cout << "max_rel_error: " << Num(result.max_rel_error) << "\n";
  if (result.worst_output.empty()) {
    std::cout << "worst: none\n";
  } else {
    std::cout << "worst: " << result.worst_output
              << IndexToString(result.worst_index)
              << " reference=" << FloatToString(result.reference_value)
              << " partitioned=" << FloatToString(result.partitioned_value)
              << "\n";
  }
  if (!dump.empty()) {
    for (const auto& [name, tensor] : result.outputs) {
      if (format == "binary") {
        WriteTensorFile(dump + "." + name + ".bin", tensor);
      } else {
        WriteFileOrThrow(dump + "." + name + ".txt", TensorToText(tensor));
      }
    }
  }
  bool ok = result.max_rel_error <= tolerance;
  std::cout << "result: " << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? 0 : 2;
}

// ---------------------------------------------------------------------------
// cost

double EinsumComputeUnits(const Graph& g, const Node& n) {
  auto arrow = n.einsum_spec.find("->");
  std::string in = n.einsum_spec.substr(0, arrow);
  auto comma = in.find(',');
  std::string lhs = in.substr(0, comma);
  std::string rhs = in.substr(comma + 1);
  std::map<char, int64_t> extent;
  const Shape& ls = g.node(n.operands[0]).shape();
  const Shape& rs = g.node(n.operands[1]).shape();
  for (size_t i = 0; i < lhs.size(); ++i) extent[lhs[i]] = ls.dims[i];
  for (size_t i = 0; i < rhs.size(); ++i) extent[rhs[i]] = rs.dims[i];
  double units = 2.0;  // multiply + add per cell of the iteration space
  for (const auto& [letter, e] : extent) units *= static_cast<double>(e);
  return units;
}

double NodeComputeUnits(const Graph& g, const Node& n) {
  switch (n.op) {
    case OpKind::kParameter:
    case OpKind::kConstant:
    case OpKind::kPartitionId:
    case OpKind::kGetOutput:
    case OpKind::kLoopParam:
    case OpKind::kLoopIndex:
    case OpKind::kYield:
    case OpKind::kAllReduce:
    case OpKind::kAllGather:
    case OpKind::kAllToAll:
    case OpKind::kCollectivePermute:
    case OpKind::kShardedLoop:
      return 0.0;
    case OpKind::kEinsum:
      return EinsumComputeUnits(g, n);
    case OpKind::kConvolution: {
      double units = 2.0 * static_cast<double>(n.shape().num_elements());
      for (const WindowDimConfig& w : n.window) {
        units *= static_cast<double>(w.size);
      }
      return units;
    }
    case OpKind::kReduce:
    case OpKind::kCumsum:
      return static_cast<double>(g.node(n.operands[0]).shape().num_elements());
    case OpKind::kSoftmax:
      // One max, subtract, exp, and normalize pass per element.
      return 4.0 * static_cast<double>(n.shape().num_elements());
    case OpKind::kTopK:
      return static_cast<double>(n.k) *
             static_cast<double>(g.node(n.operands[0]).shape().num_elements());
    default:
      return static_cast<double>(n.shape().num_elements());
  }
}

struct CostTotals {
  double compute = 0.0;
  double comm = 0.0;
  std::map<std::string, std::pair<int64_t, double>> per_kind;  // count, time
};

void PrintCostRows(const Graph& g, int64_t devices, const DeviceMesh& mesh,
                   const CostModelOptions& options, double multiplier,
                   const std::string& indent, CostTotals& totals) {
  for (const Node& n : g.nodes) {
    std::string op = n.op == OpKind::kElementwise
                         ? ElementwiseKindToString(n.elem_kind)
                         : OpKindToString(n.op);
    double compute = multiplier * NodeComputeUnits(g, n);
    double comm = 0.0;
    std::string primitive = "none";
    switch (n.op) {
      case OpKind::kAllReduce:
      case OpKind::kAllGather:
      case OpKind::kAllToAll:
      case OpKind::kCollectivePermute: {
        double bytes = static_cast<double>(
            g.node(n.operands[0]).shape().num_elements() * sizeof(float));
        comm = multiplier * CollectiveCost(op, bytes, devices, mesh, options);
        primitive = op;
        auto& entry = totals.per_kind[op];
        entry.first += static_cast<int64_t>(multiplier);
        entry.second += comm;
        break;
      }
      default:
        break;
    }
    totals.compute += compute;
    totals.comm += comm;
    char line[256];
    std::snprintf(line, sizeof(line), "%s%%%-4" PRId64 " %-20s %-18s %14s %14s  %s",
                  indent.c_str(), n.id, op.c_str(),
                  n.shape().ToString().c_str(), Num(compute).c_str(),
                  Num(comm).c_str(), primitive.c_str());
    std::cout << line << "\n";
    if (n.op == OpKind::kShardedLoop && n.body) {
      // Body rows are charged once per trip.
      PrintCostRows(*n.body, devices, mesh, options,
                    multiplier * static_cast<double>(n.trips), indent + "  ",
                    totals);
    }
  }
}

// The dispatch einsum (tokens, routing tensor -> per-expert buffers) has a
// unique structure: rank-4 x rank-3 -> rank-4 sharing its first two letters.
// When present, its shapes pin down every gating dimension and unlock the
// layer-level cost breakdown.
std::optional<MoEConfig> DetectMoe(const Graph& g) {
  for (const Node& n : g.nodes) {
    if (n.op != OpKind::kEinsum) continue;
    auto arrow = n.einsum_spec.find("->");
    std::string in = n.einsum_spec.substr(0, arrow);
    std::string out = n.einsum_spec.substr(arrow + 2);
    auto comma = in.find(',');
    std::string lhs = in.substr(0, comma);
    std::string rhs = in.substr(comma + 1);
    if (lhs.size() != 4 || rhs.size() != 3 || out.size() != 4) continue;
    if (rhs[0] != lhs[0] || rhs[1] != lhs[1]) continue;
    if (lhs.find(rhs[2]) != std::string::npos) continue;
    std::string expect = {lhs[2], lhs[0], lhs[3], rhs[2]};
    if (out != expect) continue;
    const Shape& ls = g.node(n.operands[0]).shape();
    const Shape& rs = g.node(n.operands[1]).shape();
    int64_t groups = ls.dims[0], group_size = ls.dims[1];
    int64_t experts = ls.dims[2], capacity = ls.dims[3];
    int64_t model_dim = rs.dims[2];
    for (const Node& m : g.nodes) {
      // The expert input layer consumes the dispatch result against a
      // [experts, model_dim, hidden] weight; its last extent is hidden.
      if (m.op != OpKind::kEinsum || m.operands[0] != n.id) continue;
      const Shape& ws = g.node(m.operands[1]).shape();
      if (ws.rank() != 3 || ws.dims[0] != experts || ws.dims[1] != model_dim) {
        continue;
      }
      return MoEConfig(groups, group_size, experts, model_dim, ws.dims[2],
                       0.0, capacity);
    }
  }
  return std::nullopt;
}

int RunCost(const std::string& path, int64_t devices, const DeviceMesh& mesh,
            double latency_bound, int64_t memory_budget) {
  PartitionOptions poptions;
  poptions.memory_budget_bytes = memory_budget;
  Graph source;
  SpmdProgram program = LoadAndPartition(path, devices, poptions, &source);
  CostModelOptions coptions;
  coptions.latency_bound_bytes = latency_bound;
  std::cout << "devices: " << devices << " mesh: " << mesh.rows << "x"
            << mesh.cols << "\n";
  char header[256];
  std::snprintf(header, sizeof(header), "%-5s %-20s %-18s %14s %14s  %s", "node",
                "op", "shape", "compute", "comm", "primitive");
  std::cout << header << "\n";
  CostTotals totals;
  PrintCostRows(program.graph, devices, mesh, coptions, 1.0, "", totals);
  std::cout << "totals: compute=" << Num(totals.compute)
            << " comm=" << Num(totals.comm) << "\n";
  for (const auto& [kind, entry] : totals.per_kind) {
    std::cout << "  " << kind << ": count=" << entry.first
              << " time=" << Num(entry.second) << "\n";
  }
  if (std::optional<MoEConfig> config = DetectMoe(source)) {
    MoeCostBreakdown mc = MoeLayerCost(*config, devices, mesh, coptions);
    std::cout << "moe breakdown: ffn=" << Num(mc.ffn_compute)
              << " gate_einsum=" << Num(mc.gate_einsum_compute)
              << " gating_sequential=" << Num(mc.gating_sequential_compute)
              << " dispatch_combine_comm=" << Num(mc.dispatch_combine_comm)
              << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// moe

int RunMoe(int64_t groups, int64_t group_size, int64_t experts,
           int64_t model_dim, int64_t hidden_dim, int64_t capacity,
           int64_t devices, uint64_t seed) {
  std::optional<int64_t> cap;
  if (capacity > 0) cap = capacity;
  MoEConfig config(groups, group_size, experts, model_dim, hidden_dim, 0.01,
                   cap, seed);
  if (devices <= 0) devices = experts;
  Graph graph = BuildMoeGraph(config, devices);
  std::cout << "moe config: groups=" << config.groups
            << " group_size=" << config.group_size
            << " experts=" << config.experts
            << " model_dim=" << config.model_dim
            << " hidden_dim=" << config.hidden_dim
            << " capacity=" << config.capacity << " seed=" << config.seed
            << " devices=" << devices << "\n";
  std::cout << SerializeGraph(graph);

  std::map<std::string, TensorValue> inputs;
  inputs["inputs"] =
      SeededInput(Shape{{groups, group_size, model_dim}}, "inputs", seed);
  ExpertWeights weights;
  weights.wg = SeededInput(Shape{{model_dim, experts}}, "wg", seed);
  weights.wi = SeededInput(Shape{{experts, model_dim, hidden_dim}}, "wi", seed);
  weights.wo = SeededInput(Shape{{experts, hidden_dim, model_dim}}, "wo", seed);
  inputs["wg"] = weights.wg;
  inputs["wi"] = weights.wi;
  inputs["wo"] = weights.wo;
  inputs["rnd"] = GatingRandoms(config);

  VerifyResult result = VerifyPartitioningWithInputs(graph, devices, inputs);
  auto [numeric_out, numeric_aux] =
      MoeForwardNumeric(inputs["inputs"], weights, config);
  double max_abs = 0.0;
  const TensorValue& part_out = result.outputs.at("moe_out");
  for (int64_t i = 0; i < numeric_out.shape.num_elements(); ++i) {
    max_abs = std::max(max_abs,
                       std::abs(static_cast<double>(part_out.data[i]) -
                                static_cast<double>(numeric_out.data[i])));
  }
  std::cout << "partitioned max_rel_error: " << Num(result.max_rel_error)
            << "\n";
  std::cout << CollectiveSummary(result.collective_counts) << "\n";
  std::cout << "numeric_vs_partitioned max_abs: " << Num(max_abs) << "\n";
  std::cout << "aux_loss: numeric=" << FloatToString(numeric_aux)
            << " partitioned="
            << FloatToString(result.outputs.at("aux_loss").data[0]) << "\n";
  MoeFlopCounts flops = CountFlops(config, devices);
  std::cout << "flops: softmax=" << flops.softmax << " gating=" << flops.gating
            << " dispatch_combine=" << flops.dispatch_combine
            << " ffn=" << flops.ffn << "\n";
  std::cout << "per_device: softmax=" << flops.per_device_softmax
            << " gating=" << flops.per_device_gating
            << " dispatch_combine=" << flops.per_device_dispatch_combine
            << " ffn=" << flops.per_device_ffn << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// corpus

int RunCorpus(int64_t devices, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  for (const std::string& name : CorpusNames()) {
    CorpusEntry entry = BuildCorpusEntry(name, devices);
    std::string path = out_dir + "/" + name + ".sir";
    WriteFileOrThrow(path, SerializeGraph(entry.graph));
    std::cout << "wrote " << path << "\n";
  }
  return 0;
}

}  // namespace
}  // namespace shardir

int main(int argc, char** argv) {
  CLI::App app{"shardir: SPMD partitioner for static tensor graphs"};
  app.require_subcommand(1);

  std::string graph_file, dump, format = "text", out_dir = ".";
  std::string mesh_spec;
  int64_t devices = 2;
  uint64_t seed = 0;
  double tolerance = 1e-5, latency_bound = 0.0;
  int64_t memory_budget = shardir::PartitionOptions().memory_budget_bytes;
  bool perturb = false;
  int64_t groups = 4, group_size = 8, experts = 4, model_dim = 4,
          hidden_dim = 8, capacity = 0, moe_devices = 0;

  auto add_common = [&](CLI::App* sub, bool with_file) {
    if (with_file) {
      sub->add_option("graph_file", graph_file, "graph in IR text form")
          ->required()
          ->check(CLI::ExistingFile);
    }
    sub->add_option("--devices", devices, "number of devices");
    sub->add_option("--memory-budget", memory_budget,
                    "per-operand byte budget before loop lowering");
  };

  CLI::App* partition = app.add_subcommand(
      "partition", "partition a graph and print the per-device program");
  add_common(partition, true);
  partition->add_option("--dump", dump, "also write the program text here");

  CLI::App* verify = app.add_subcommand(
      "verify", "check partitioned output against the reference interpreter");
  add_common(verify, true);
  verify->add_option("--seed", seed, "seed for generated inputs");
  verify->add_option("--tolerance", tolerance, "max relative error accepted");
  verify->add_option("--dump", dump, "write reassembled outputs to PATH.<root>");
  verify->add_option("--format", format, "dump encoding")
      ->check(CLI::IsMember({"text", "binary"}));
  verify
      ->add_flag("--perturb", perturb,
                 "corrupt one input shard (negative control)")
      ->group("");

  CLI::App* cost = app.add_subcommand(
      "cost", "per-node cost table for the partitioned program");
  add_common(cost, true);
  cost->add_option("--mesh", mesh_spec, "device mesh as RxC");
  cost->add_option("--latency-bound", latency_bound,
                   "bytes under which a collective stays latency bound");

  CLI::App* moe = app.add_subcommand(
      "moe", "build the mixture-of-experts demo layer and cross-check it");
  moe->add_option("--groups", groups, "routing groups");
  moe->add_option("--group-size", group_size, "tokens per group");
  moe->add_option("--experts", experts, "expert count");
  moe->add_option("--model-dim", model_dim, "token feature size");
  moe->add_option("--hidden-dim", hidden_dim, "expert hidden size");
  moe->add_option("--capacity", capacity, "buffer slots per (group, expert)");
  moe->add_option("--devices", moe_devices, "devices (default: one per expert)");
  moe->add_option("--seed", seed, "seed for weights and random dispatch");

  CLI::App* corpus = app.add_subcommand(
      "corpus", "write the built-in example graphs as .sir files");
  corpus->add_option("--devices", devices, "device count the graphs target");
  corpus->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (partition->parsed()) {
      return shardir::RunPartition(graph_file, devices, dump, memory_budget);
    }
    if (verify->parsed()) {
      return shardir::RunVerify(graph_file, devices, seed, tolerance, dump,
                                format, memory_budget, perturb);
    }
    if (cost->parsed()) {
      shardir::DeviceMesh mesh = shardir::DeviceMesh::Linear(devices);
      if (!mesh_spec.empty()) {
        auto x = mesh_spec.find('x');
        if (x == std::string::npos) {
          throw shardir::InvalidAttribute("mesh must look like RxC");
        }
        mesh.rows = std::stoll(mesh_spec.substr(0, x));
        mesh.cols = std::stoll(mesh_spec.substr(x + 1));
        mesh.total_devices = devices;
        shardir::ValidateMesh(mesh);
      }
      return shardir::RunCost(graph_file, devices, mesh, latency_bound,
                              memory_budget);
    }
    if (moe->parsed()) {
      return shardir::RunMoe(groups, group_size, experts, model_dim,
                             hidden_dim, capacity, moe_devices, seed);
    }
    if (corpus->parsed()) {
      return shardir::RunCorpus(devices, out_dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
