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

// End-to-end tests of the command line tool as a subprocess: exit codes,
// error reporting, byte-stable output against frozen goldens.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace {

std::string TempDir() {
  static std::string dir = [] {
    char templ[] = "/tmp/shardir_cli_test_XXXXXX";
    const char* d = mkdtemp(templ);
    REQUIRE(d != nullptr);
    return std::string(d);
  }();
  return dir;
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void WriteFile(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

// Runs the tool with `args` through the shell; `env` may carry variable
// assignments such as "SHARDIR_THREADS=4".
RunResult Run(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  std::string out_path = TempDir() + "/out" + std::to_string(counter);
  std::string err_path = TempDir() + "/err" + std::to_string(counter);
  ++counter;
  std::string cmd = env + (env.empty() ? "" : " ") + SHARDIR_CLI_PATH + " " +
                    args + " > " + out_path + " 2> " + err_path;
  int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = ReadFile(out_path);
  r.err = ReadFile(err_path);
  return r;
}

std::string Golden(const std::string& name) {
  return std::string(SHARDIR_GOLDEN_DIR) + "/" + name;
}

TEST_CASE("partition output matches the golden byte for byte") {
  RunResult r = Run("partition " + Golden("elementwise_chain_d4.sir") +
                    " --devices 4");
  CHECK(r.exit_code == 0);
  CHECK(r.err.empty());
  CHECK(r.out == ReadFile(Golden("partition_elementwise_d4.golden")));
}

TEST_CASE("verify output matches the golden and passes") {
  RunResult r = Run("verify " + Golden("einsum_contracting_d4.sir") +
                    " --devices 4 --seed 7");
  CHECK(r.exit_code == 0);
  CHECK(r.out == ReadFile(Golden("verify_einsum_d4.golden")));
  CHECK(r.out.find("result: PASS") != std::string::npos);
}

TEST_CASE("cost output matches the golden") {
  RunResult r = Run("cost " + Golden("einsum_contracting_d4.sir") +
                    " --devices 4");
  CHECK(r.exit_code == 0);
  CHECK(r.out == ReadFile(Golden("cost_einsum_d4.golden")));
}

TEST_CASE("syntax errors report the line and column and exit 1") {
  std::string bad = TempDir() + "/bad.sir";
  WriteFile(bad,
            "%0 = parameter name=\"x\" : [4,4]\n"
            "%1 = bogus (%0 : [4,4]\n");
  RunResult r = Run("partition " + bad + " --devices 4");
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("error:") != std::string::npos);
  CHECK(r.err.find("2:") != std::string::npos);  // line of the bad node
}

TEST_CASE("a corrupted shard makes verify fail with exit 2") {
  RunResult r = Run("verify " + Golden("einsum_contracting_d4.sir") +
                    " --devices 4 --seed 7 --perturb");
  CHECK(r.exit_code == 2);
  CHECK(r.out.find("result: FAIL") != std::string::npos);
}

TEST_CASE("missing files and missing subcommands exit nonzero") {
  CHECK(Run("partition /nonexistent/graph.sir --devices 4").exit_code != 0);
  CHECK(Run("").exit_code != 0);
  CHECK(Run("partition").exit_code != 0);
}

TEST_CASE("the mixture demo reports two all_to_all on eight devices") {
  RunResult r = Run("moe --devices 8");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("all_to_all=2") != std::string::npos);
  CHECK(r.out.find("all_reduce=1") != std::string::npos);
  CHECK(r.out.find("numeric_vs_partitioned max_abs: 0\n") !=
        std::string::npos);
}

TEST_CASE("verify output is byte identical across runs and thread counts") {
  std::string args = "verify " + Golden("einsum_contracting_d4.sir") +
                     " --devices 4 --seed 11";
  RunResult first = Run(args);
  CHECK(first.exit_code == 0);
  CHECK(Run(args).out == first.out);
  CHECK(Run(args, "SHARDIR_THREADS=1").out == first.out);
  CHECK(Run(args, "SHARDIR_THREADS=4").out == first.out);
}

TEST_CASE("corpus writes graphs that partition cleanly") {
  std::string dir = TempDir() + "/corpus";
  RunResult r = Run("corpus --out " + dir + " --devices 4");
  CHECK(r.exit_code == 0);
  for (const char* name : {"conv_halo", "moe", "einsum_loop"}) {
    CAPTURE(name);
    RunResult p = Run("partition " + dir + "/" + std::string(name) +
                      ".sir --devices 4");
    CHECK(p.exit_code == 0);
  }
}

TEST_CASE("partition --dump writes the program to a file") {
  std::string dump = TempDir() + "/program.txt";
  RunResult r = Run("partition " + Golden("elementwise_chain_d4.sir") +
                    " --devices 4 --dump " + dump);
  CHECK(r.exit_code == 0);
  std::string text = ReadFile(dump);
  CHECK(text.rfind("// spmd partitions=4", 0) == 0);
  CHECK(text.find("%0 = parameter") != std::string::npos);
}

}  // namespace
