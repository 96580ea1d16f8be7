#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "pdmm/problem_io.hpp"
#include "pdmm/scenarios.hpp"

using namespace pdmm;

namespace {

std::string cli_path() {
  const char* path = std::getenv("PDMM_CLI");
  return path == nullptr ? std::string{} : std::string{path};
}

int run_cli(const std::string& args) {
  const std::string cmd = cli_path() + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

struct TempDir {
  std::string path;
  TempDir() {
    char tmpl[] = "/tmp/pdmm_cli_test_XXXXXX";
    path = mkdtemp(tmpl);
  }
  ~TempDir() {
    if (std::system(("rm -rf " + path).c_str()) != 0) std::perror("cleanup");
  }
};

}  // namespace

#define REQUIRE_CLI()                                        \
  do {                                                       \
    if (cli_path().empty()) {                                \
      FAIL("PDMM_CLI is not set; run through ctest");        \
    }                                                        \
  } while (0)

TEST_CASE("generated toy file parses back to the generator's graph") {
  REQUIRE_CLI();
  TempDir dir;
  const std::string out = dir.path + "/toy.prob";
  CHECK(run_cli("generate toy --seed 7 -o " + out) == 0);
  CHECK(graphs_equal(load_problem(out), gen_toy(7)));
}

TEST_CASE("geometric generation writes a 50 node connected spec") {
  REQUIRE_CLI();
  TempDir dir;
  const std::string out = dir.path + "/geo.prob";
  CHECK(run_cli("generate geometric --n 50 --seed 1 -o " + out) == 0);
  const ProblemGraph g = load_problem(out);
  CHECK(g.num_nodes() == 50);
}

TEST_CASE("localisation generation writes five programs") {
  REQUIRE_CLI();
  TempDir dir;
  const std::string stem = dir.path + "/loc";
  CHECK(run_cli("generate localisation --sensors 4 --seed 3 -o " + stem) == 0);
  CHECK(load_problem(stem + ".cheb.prob").num_nodes() == 4);
  for (int k = 0; k < 4; ++k) {
    CHECK(load_problem(stem + ".rect" + std::to_string(k) + ".prob").num_nodes() == 4);
  }
}

TEST_CASE("solve with oracle converges and writes a trace") {
  REQUIRE_CLI();
  TempDir dir;
  const std::string prob = dir.path + "/toy.prob";
  const std::string trace = dir.path + "/trace.csv";
  REQUIRE(run_cli("generate toy --seed 7 -o " + prob) == 0);
  CHECK(run_cli("solve " + prob + " --mode sync --alpha 1 --c 0.5 --oracle --trace " +
                trace) == 0);
  const std::string csv = slurp(trace);
  CHECK(csv.rfind("iter,primal_error,fixed_point_residual,max_violation,objective\n",
                  0) == 0);
}

TEST_CASE("stochastic solve with losses converges") {
  REQUIRE_CLI();
  TempDir dir;
  const std::string prob = dir.path + "/toy.prob";
  REQUIRE(run_cli("generate toy --seed 7 -o " + prob) == 0);
  CHECK(run_cli("solve " + prob +
                " --mode stoch --active-prob 0.5 --loss-rate 0.5 --alpha 1 --seed 2"
                " --iters 50000 --tol-primal 1e-5 --oracle") == 0);
}

TEST_CASE("verify exits zero on the toy defaults") {
  REQUIRE_CLI();
  TempDir dir;
  const std::string prob = dir.path + "/toy.prob";
  REQUIRE(run_cli("generate toy --seed 7 -o " + prob) == 0);
  CHECK(run_cli("verify " + prob + " --tol-primal 1e-8 --iters 20000") == 0);
}

TEST_CASE("usage errors exit with code one") {
  REQUIRE_CLI();
  TempDir dir;
  const std::string prob = dir.path + "/toy.prob";
  REQUIRE(run_cli("generate toy --seed 7 -o " + prob) == 0);
  SUBCASE("alpha outside its range") {
    CHECK(run_cli("solve " + prob + " --alpha 0") == 1);
  }
  SUBCASE("unknown flag") {
    CHECK(run_cli("solve " + prob + " --warp-speed 9") == 1);
  }
  SUBCASE("missing problem file") {
    CHECK(run_cli("solve " + dir.path + "/absent.prob") == 1);
  }
  SUBCASE("unparseable problem file") {
    const std::string bad = dir.path + "/bad.prob";
    std::ofstream(bad) << "nodes { gibberish }";
    CHECK(run_cli("solve " + bad) == 1);
  }
}

TEST_CASE("equality-only consensus verifies to a tight tolerance") {
  REQUIRE_CLI();
  TempDir dir;
  const std::string prob = dir.path + "/consensus.prob";
  ProblemGraph g;
  const double obs[3] = {0.4, -1.1, 0.9};
  for (double a : obs) {
    Matrix Q(1, 1);
    Q << 1.0;
    Vector q(1);
    q << -a;
    g.nodes.push_back(Node{1, QuadraticObjective{Q, q}});
  }
  for (int i = 0; i + 1 < 3; ++i) {
    Matrix one(1, 1), minus(1, 1);
    one << 1.0;
    minus << -1.0;
    g.edges.push_back(EdgeConstraintBlock{i, i + 1, one, minus, Vector::Zero(1),
                                          {ConstraintKind::Equality}, false});
  }
  save_problem(build_problem(std::move(g)), prob);
  CHECK(run_cli("verify " + prob + " --alpha 0.5 --tol-primal 1e-10 --iters 20000"
                " --kkt-tol 1e-8") == 0);
}

TEST_CASE("infeasible problems exit with code two") {
  REQUIRE_CLI();
  TempDir dir;
  const std::string prob = dir.path + "/infeasible.prob";
  ProblemGraph g;
  Matrix Q(1, 1);
  Q << 1.0;
  g.nodes.push_back(Node{1, QuadraticObjective{Q, Vector::Zero(1)}});
  Matrix A(2, 1);
  A << 1.0, -1.0;
  Vector b(2);
  b << 0.0, -1.0;  // x <= 0 and x >= 1
  g.node_constraints.push_back(NodeConstraintBlock{
      0, A, b, {ConstraintKind::Inequality, ConstraintKind::Inequality}});
  save_problem(build_problem(std::move(g)), prob);
  CHECK(run_cli("verify " + prob) == 2);
}

TEST_CASE("exhausted budget exits with code three") {
  REQUIRE_CLI();
  TempDir dir;
  const std::string prob = dir.path + "/toy.prob";
  REQUIRE(run_cli("generate toy --seed 7 -o " + prob) == 0);
  CHECK(run_cli("solve " + prob + " --oracle --iters 3 --tol-primal 1e-12") == 3);
}

TEST_CASE("initial slot values load from a file") {
  REQUIRE_CLI();
  TempDir dir;
  const std::string prob = dir.path + "/toy.prob";
  REQUIRE(run_cli("generate toy --seed 7 -o " + prob) == 0);
  const std::string z0 = dir.path + "/z0.txt";
  std::ofstream(z0) << "0 0 0 0 0 0 0 0 0 0\n";
  CHECK(run_cli("solve " + prob + " --oracle --z0 " + z0) == 0);
  std::ofstream(z0, std::ios::trunc) << "1 2 3\n";
  CHECK(run_cli("solve " + prob + " --oracle --z0 " + z0) == 1);
}

TEST_CASE("identical flags produce byte-identical traces") {
  REQUIRE_CLI();
  TempDir dir;
  const std::string prob = dir.path + "/toy.prob";
  REQUIRE(run_cli("generate toy --seed 7 -o " + prob) == 0);
  const std::string flags = " --mode stoch --active-prob 0.6 --loss-rate 0.2 --seed 11"
                            " --iters 2000 --oracle --trace ";
  REQUIRE(run_cli("solve " + prob + flags + dir.path + "/a.csv") == 0);
  REQUIRE(run_cli("solve " + prob + flags + dir.path + "/b.csv") == 0);
  CHECK(slurp(dir.path + "/a.csv") == slurp(dir.path + "/b.csv"));
}
