#include <doctest.h>

#include <cmath>

#include "pdmm/engine.hpp"
#include "pdmm/oracle.hpp"
#include "pdmm/reflection.hpp"
#include "pdmm/scenarios.hpp"
#include "support/builders.hpp"

using namespace pdmm;
using namespace pdmm::test;

namespace {

Vector random_slots(Rng& rng, Index n, double radius = 3.0) {
  Vector z(n);
  for (Index s = 0; s < n; ++s) z[s] = rng.uniform(-radius, radius);
  return z;
}

}  // namespace

TEST_CASE("operator application on a two-node consensus, evaluated by hand") {
  // f_i = 0.5 (x_i - a_i)^2 with a = (1, 3), one equality row x0 = x1, c = 0.5,
  // z = 0: x_i = a_i / (1 + c), y = (2c x0, -2c x1), exchange swaps the pair.
  const ProblemGraph g = two_node_consensus(1.0, 3.0);
  const Engine engine(g, 0.5);
  std::vector<Vector> x;
  Vector y, mu, z_next;
  engine.apply_T(Vector::Zero(2), x, y, mu, z_next);
  CHECK(x[0][0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(x[1][0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(y[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(y[1] == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(z_next[0] == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(z_next[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("the dual half-step is the reflected resolvent") {
  // y = 2 mu - z must hold exactly for every slot.
  Rng rng(40);
  const ProblemGraph g = gen_toy(9);
  const Engine engine(g, 0.5);
  const Vector z = random_slots(rng, engine.layout().num_slots());
  std::vector<Vector> x;
  Vector y, mu, z_next;
  engine.apply_T(z, x, y, mu, z_next);
  CHECK((y - (2.0 * mu - z)).cwiseAbs().maxCoeff() <= 1e-14);
  // And the exchange step is the reflection of y.
  CHECK((z_next - reflect_all(y, engine.layout())).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a converged slot vector is a fixed point of the operator") {
  const ProblemGraph g = gen_toy(7);
  const Engine engine(g, 0.5);
  ScheduleConfig cfg;
  cfg.alpha = 0.5;
  cfg.c = 0.5;
  cfg.max_iters = 20000;
  cfg.tol_residual = 1e-13;
  const RunResult result = engine.run(cfg);
  REQUIRE(result.trace.converged);

  std::vector<Vector> x;
  Vector y, mu, z_next;
  engine.apply_T(result.state.z, x, y, mu, z_next);
  CHECK((z_next - result.state.z).norm() <= 1e-9);
}

TEST_CASE("alpha one is the bare operator step") {
  const ProblemGraph g = gen_toy(3);
  const Engine engine(g, 0.5);
  Rng rng(4);
  IterationState state = engine.initial_state();
  state.z = random_slots(rng, engine.layout().num_slots());

  std::vector<Vector> x;
  Vector y, mu, t_z;
  engine.apply_T(state.z, x, y, mu, t_z);
  engine.step_synchronous(state, 1.0);
  CHECK((state.z - t_z).cwiseAbs().maxCoeff() == 0.0);
  CHECK(state.k == 1);
}

TEST_CASE("averaging keeps a fixed point fixed") {
  const ProblemGraph g = gen_toy(7);
  const Engine engine(g, 0.5);
  ScheduleConfig cfg;
  cfg.alpha = 0.5;
  cfg.c = 0.5;
  cfg.max_iters = 30000;
  cfg.tol_residual = 1e-14;
  const RunResult result = engine.run(cfg);
  REQUIRE(result.trace.converged);

  IterationState state = engine.initial_state(&result.state.z);
  engine.step_synchronous(state, 0.5);
  CHECK((state.z - result.state.z).norm() <= 1e-9);
}

TEST_CASE("full mask reproduces the synchronous step bit for bit") {
  const ProblemGraph g = gen_toy(5);
  const Engine engine(g, 0.5);
  Rng rng(8);
  const Vector z0 = random_slots(rng, engine.layout().num_slots());

  IterationState sync = engine.initial_state(&z0);
  IterationState masked = engine.initial_state(&z0);
  for (int k = 0; k < 5; ++k) {
    engine.step_synchronous(sync, 0.7);
    engine.step_stochastic(masked, UpdateMask::full(engine.layout().num_slots()), 0.7);
  }
  CHECK((sync.z - masked.z).cwiseAbs().maxCoeff() == 0.0);
  CHECK((sync.y - masked.y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("an empty mask leaves the slot vector unchanged") {
  const ProblemGraph g = gen_toy(5);
  const Engine engine(g, 0.5);
  Rng rng(9);
  const Vector z0 = random_slots(rng, engine.layout().num_slots());
  IterationState state = engine.initial_state(&z0);
  UpdateMask none{std::vector<std::uint8_t>(
      static_cast<std::size_t>(engine.layout().num_slots()), 0)};
  engine.step_stochastic(state, none, 1.0);
  CHECK((state.z - z0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(state.k == 1);
}

TEST_CASE("degenerate sampling gives the synchronous mask") {
  const ProblemGraph g = gen_toy(5);
  const Engine engine(g, 0.5);
  ScheduleConfig cfg;
  cfg.mode = ScheduleMode::Stochastic;
  cfg.node_active_prob = 1.0;
  cfg.loss_rate = 0.0;
  Rng rng(1);
  const UpdateMask mask = engine.sample_mask(rng, cfg);
  for (const auto bit : mask.bits) CHECK(bit == 1);
}

TEST_CASE("mask sampling is reproducible for a fixed seed") {
  const ProblemGraph g = gen_toy(42);
  const Engine engine(g, 0.5);
  ScheduleConfig cfg;
  cfg.mode = ScheduleMode::Stochastic;
  cfg.node_active_prob = 0.6;
  cfg.loss_rate = 0.3;
  Rng rng_a(42);
  Rng rng_b(42);
  for (int k = 0; k < 100; ++k) {
    const UpdateMask a = engine.sample_mask(rng_a, cfg);
    const UpdateMask b = engine.sample_mask(rng_b, cfg);
    CHECK(a.bits == b.bits);
  }
}

TEST_CASE("mask frequencies follow activation times survival") {
  const ProblemGraph g = gen_toy(13);
  const Engine engine(g, 0.5);
  const auto& layout = engine.layout();
  ScheduleConfig cfg;
  cfg.mode = ScheduleMode::Stochastic;
  cfg.node_active_prob = 0.5;
  cfg.loss_rate = 0.25;
  Rng rng(77);
  const int draws = 40000;
  std::vector<long> hits(static_cast<std::size_t>(layout.num_slots()), 0);
  for (int k = 0; k < draws; ++k) {
    const UpdateMask mask = engine.sample_mask(rng, cfg);
    for (std::size_t s = 0; s < mask.bits.size(); ++s) hits[s] += mask.bits[s];
  }
  for (Index s = 0; s < layout.num_slots(); ++s) {
    const auto& slot = layout.slots[static_cast<std::size_t>(s)];
    const bool colocated =
        engine.graph().edges[static_cast<std::size_t>(slot.edge)].colocated;
    // A slot refreshes when its neighbour transmits; colocated slots skip the
    // loss draw and follow the host alone.
    const double expected = colocated ? 0.5 : 0.5 * 0.75;
    const double freq = static_cast<double>(hits[static_cast<std::size_t>(s)]) / draws;
    CHECK(freq == doctest::Approx(expected).epsilon(0.05));
  }
}

TEST_CASE("loss rate one is rejected by config validation") {
  ScheduleConfig cfg;
  cfg.loss_rate = 1.0;
  CHECK_THROWS_AS(validate(cfg), Error);
  cfg.loss_rate = 0.5;
  cfg.node_active_prob = 0.0;
  CHECK_THROWS_AS(validate(cfg), Error);
  cfg.node_active_prob = 0.5;
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(validate(cfg), Error);
}

TEST_CASE("synchronous runs reach the oracle on the toy problem") {
  const ProblemGraph toy = gen_toy(7);
  const auto oracle = solve_active_set(toy);
  const Engine engine(toy, 0.5);

  SUBCASE("bare operator") {
    ScheduleConfig cfg;
    cfg.alpha = 1.0;
    cfg.c = 0.5;
    cfg.max_iters = 5000;
    cfg.tol_primal = 1e-6;
    const RunResult result = engine.run(cfg, &oracle.x);
    CHECK(result.trace.converged);
    CHECK(*result.trace.rows.back().primal_error <= 1e-6);
  }
  SUBCASE("half-averaged") {
    ScheduleConfig cfg;
    cfg.alpha = 0.5;
    cfg.c = 0.5;
    cfg.max_iters = 20000;
    cfg.tol_primal = 1e-6;
    const RunResult result = engine.run(cfg, &oracle.x);
    CHECK(result.trace.converged);
  }
}

TEST_CASE("stochastic run with losses still converges") {
  const ProblemGraph toy = gen_toy(7);
  const auto oracle = solve_active_set(toy);
  const Engine engine(toy, 0.5);
  ScheduleConfig cfg;
  cfg.mode = ScheduleMode::Stochastic;
  cfg.alpha = 1.0;
  cfg.c = 0.5;
  cfg.node_active_prob = 0.5;
  cfg.loss_rate = 0.25;
  cfg.seed = 5;
  cfg.max_iters = 20000;
  cfg.tol_primal = 1e-5;
  const RunResult result = engine.run(cfg, &oracle.x);
  CHECK(result.trace.converged);
}

TEST_CASE("averaged fixed-point residual is non-increasing") {
  const ProblemGraph toy = gen_toy(7);
  const Engine engine(toy, 0.5);
  ScheduleConfig cfg;
  cfg.alpha = 0.5;
  cfg.c = 0.5;
  cfg.max_iters = 3000;
  cfg.tol_residual = 1e-12;
  const RunResult result = engine.run(cfg);
  for (std::size_t r = 1; r < result.trace.rows.size(); ++r) {
    CHECK(result.trace.rows[r].fixed_point_residual <=
          result.trace.rows[r - 1].fixed_point_residual + 1e-12);
  }
}

TEST_CASE("operator is nonexpansive") {
  const ProblemGraph toy = gen_toy(7);
  const Engine engine(toy, 0.5);
  Rng rng(55);
  std::vector<Vector> x;
  Vector y, mu, t1, t2;
  for (int trial = 0; trial < 200; ++trial) {
    const Vector z1 = random_slots(rng, engine.layout().num_slots());
    const Vector z2 = random_slots(rng, engine.layout().num_slots());
    engine.apply_T(z1, x, y, mu, t1);
    engine.apply_T(z2, x, y, mu, t2);
    CHECK((t1 - t2).norm() <= (1.0 + 1e-12) * (z1 - z2).norm());
  }
}

TEST_CASE("converged toy run satisfies the optimality system") {
  const ProblemGraph toy = gen_toy(7);
  const auto oracle = solve_active_set(toy);
  const Engine engine(toy, 0.5);
  ScheduleConfig cfg;
  cfg.alpha = 1.0;
  cfg.c = 0.5;
  cfg.max_iters = 20000;
  cfg.tol_primal = 1e-8;
  const RunResult result = engine.run(cfg, &oracle.x);
  REQUIRE(result.trace.converged);

  const Vector duals = engine.recover_row_duals(result.state);
  const auto report = kkt_check(engine.graph(), result.state.x, duals);
  CHECK(report.primal_eq_residual <= 1e-6);
  CHECK(report.primal_ineq_violation <= 1e-6);
  CHECK(report.dual_negativity <= 1e-8);
  CHECK(report.complementarity <= 1e-6);
  CHECK(report.stationarity <= 1e-6);
}

TEST_CASE("identical configuration gives identical traces") {
  const ProblemGraph toy = gen_toy(7);
  const auto oracle = solve_active_set(toy);
  const Engine engine(toy, 0.5);
  ScheduleConfig cfg;
  cfg.mode = ScheduleMode::Stochastic;
  cfg.alpha = 1.0;
  cfg.c = 0.5;
  cfg.node_active_prob = 0.7;
  cfg.loss_rate = 0.2;
  cfg.seed = 99;
  cfg.max_iters = 3000;
  cfg.tol_primal = 1e-9;
  const std::string a = trace_to_csv(engine.run(cfg, &oracle.x).trace);
  const std::string b = trace_to_csv(engine.run(cfg, &oracle.x).trace);
  CHECK(a == b);
}

TEST_CASE("worker count does not change the trace") {
  const ProblemGraph toy = gen_toy(7);
  const auto oracle = solve_active_set(toy);
  const Engine engine(toy, 0.5);
  ScheduleConfig cfg;
  cfg.alpha = 0.5;
  cfg.c = 0.5;
  cfg.max_iters = 500;
  cfg.tol_primal = 1e-12;
  cfg.threads = 1;
  const std::string one = trace_to_csv(engine.run(cfg, &oracle.x).trace);
  cfg.threads = 4;
  const std::string four = trace_to_csv(engine.run(cfg, &oracle.x).trace);
  CHECK(one == four);
}

TEST_CASE("trace csv carries the contract header and stride") {
  const ProblemGraph toy = gen_toy(7);
  const Engine engine(toy, 0.5);
  ScheduleConfig cfg;
  cfg.alpha = 0.5;
  cfg.c = 0.5;
  cfg.max_iters = 10;
  cfg.tol_residual = 1e-30;
  cfg.trace_every = 4;
  const RunResult result = engine.run(cfg);
  const std::string csv = trace_to_csv(result.trace);
  CHECK(csv.rfind("iter,primal_error,fixed_point_residual,max_violation,objective\n", 0) == 0);
  // Rows at k = 1, 5, 9, plus the final iteration 10.
  REQUIRE(result.trace.rows.size() == 4);
  CHECK(result.trace.rows[0].iter == 1);
  CHECK(result.trace.rows[1].iter == 5);
  CHECK(result.trace.rows[3].iter == 10);
  // Without an oracle the primal_error field stays empty.
  CHECK(csv.find("\n1,,") != std::string::npos);
}

TEST_CASE("penalty mismatch between config and engine is rejected") {
  const Engine engine(gen_toy(1), 0.5);
  ScheduleConfig cfg;
  cfg.c = 1.0;
  CHECK_THROWS_AS(engine.run(cfg), Error);
}

TEST_CASE("bare-operator convergence is primal only") {
  // At alpha = 1 the slot vector settles into an alternating pair, so the
  // fixed-point residual stays bounded away from zero while x converges.
  const ProblemGraph toy = gen_toy(7);
  const auto oracle = solve_active_set(toy);
  const Engine engine(toy, 0.5);
  ScheduleConfig cfg;
  cfg.alpha = 1.0;
  cfg.c = 0.5;
  cfg.max_iters = 5000;
  cfg.tol_primal = 1e-9;
  const RunResult result = engine.run(cfg, &oracle.x);
  CHECK(result.trace.converged);
  CHECK(result.trace.rows.back().fixed_point_residual > 1e-3);
}

TEST_CASE("vector nodes with mixed-sense rows reach the oracle") {
  // Two 2-d nodes, one edge whose block mixes an equality row with an
  // inequality row, plus a node bound lowered to a dummy edge.
  ProblemGraph g;
  Matrix Q0(2, 2);
  Q0 << 2.0, 0.3, 0.3, 1.0;
  Vector q0(2);
  q0 << -1.0, 0.4;
  g.nodes.push_back(Node{2, QuadraticObjective{Q0, q0}});
  Matrix Q1 = Matrix::Identity(2, 2);
  Vector q1(2);
  q1 << 0.2, -1.5;
  g.nodes.push_back(Node{2, QuadraticObjective{Q1, q1}});

  EdgeConstraintBlock e;
  e.i = 0;
  e.j = 1;
  e.A_ij = Matrix(2, 2);
  e.A_ij << 1.0, 0.0, 0.5, -1.0;
  e.A_ji = Matrix(2, 2);
  e.A_ji << -1.0, 0.0, 0.0, 1.0;
  e.b = Vector(2);
  e.b << 0.0, 0.3;
  e.kind = {ConstraintKind::Equality, ConstraintKind::Inequality};
  g.edges.push_back(e);

  Matrix bound(1, 2);
  bound << 1.0, 1.0;
  g.node_constraints.push_back(
      NodeConstraintBlock{0, bound, vec1(0.8), {ConstraintKind::Inequality}});

  const ProblemGraph built = build_problem(std::move(g));
  const auto oracle = solve_active_set(built);
  const Engine engine(built, 0.5);
  ScheduleConfig cfg;
  cfg.alpha = 1.0;
  cfg.c = 0.5;
  cfg.max_iters = 50000;
  cfg.tol_primal = 1e-8;
  const RunResult result = engine.run(cfg, &oracle.x);
  REQUIRE(result.trace.converged);
  const auto report =
      kkt_check(engine.graph(), result.state.x, engine.recover_row_duals(result.state));
  CHECK(report.max_residual() <= 1e-6);
}

TEST_CASE("authored edge orientation does not matter") {
  // The same consensus authored as (0,1) and as (1,0) must agree.
  ProblemGraph reversed;
  reversed.nodes.push_back(tracking_node(1.0));
  reversed.nodes.push_back(tracking_node(3.0));
  reversed.edges.push_back(scalar_edge(1, 0, -1.0, 1.0, 0.0, ConstraintKind::Equality));
  const Engine engine(build_problem(std::move(reversed)), 0.5);
  ScheduleConfig cfg;
  cfg.alpha = 0.5;
  cfg.c = 0.5;
  cfg.max_iters = 10000;
  cfg.tol_residual = 1e-12;
  const RunResult result = engine.run(cfg);
  REQUIRE(result.trace.converged);
  CHECK(result.state.x[0][0] == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(result.state.x[1][0] == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("a single unconstrained node degenerates cleanly") {
  ProblemGraph g;
  g.nodes.push_back(tracking_node(2.5));
  const Engine engine(build_problem(std::move(g)), 0.5);
  CHECK(engine.layout().num_slots() == 0);
  ScheduleConfig cfg;
  cfg.c = 0.5;
  cfg.max_iters = 100;
  const RunResult result = engine.run(cfg);
  CHECK(result.state.x[0][0] == doctest::Approx(2.5).epsilon(1e-12));
}
