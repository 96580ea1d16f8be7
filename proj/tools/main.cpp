// Command-line front end: scenario generation, solves, oracle comparison and
// KKT verification. Exit codes: 0 success, 1 usage or input error,
// 2 numerical failure, 3 non-convergence.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pdmm/engine.hpp"
#include "pdmm/oracle.hpp"
#include "pdmm/problem_io.hpp"
#include "pdmm/scenarios.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitNoConvergence = 3;

struct SolveFlags {
  std::string problem_path;
  std::string mode = "sync";
  double alpha = 1.0;
  double c = 0.5;
  long iters = 10000;
  std::uint64_t seed = 0;
  double loss_rate = 0.0;
  double active_prob = 1.0;
  bool with_oracle = false;
  std::string trace_path;
  long trace_every = 1;
  double tol_primal = 1e-6;
  double tol_residual = 1e-8;
  int threads = 1;
  std::string z0_path;
};

void add_solve_flags(CLI::App* cmd, SolveFlags& f) {
  cmd->add_option("problem", f.problem_path, "problem description file")->required();
  cmd->add_option("--mode", f.mode, "update schedule: sync or stoch")
      ->check(CLI::IsMember({"sync", "stoch"}));
  cmd->add_option("--alpha", f.alpha, "averaging weight in (0,1]");
  cmd->add_option("--c", f.c, "penalty parameter");
  cmd->add_option("--iters", f.iters, "iteration budget");
  cmd->add_option("--seed", f.seed, "schedule seed");
  cmd->add_option("--loss-rate", f.loss_rate, "transmission loss probability");
  cmd->add_option("--active-prob", f.active_prob, "node activation probability");
  cmd->add_flag("--oracle", f.with_oracle, "compare against the ground-truth solver");
  cmd->add_option("--trace", f.trace_path, "write per-iteration CSV trace here");
  cmd->add_option("--trace-every", f.trace_every, "record every Nth iteration");
  cmd->add_option("--tol-primal", f.tol_primal, "primal error tolerance");
  cmd->add_option("--tol-residual", f.tol_residual, "fixed-point residual tolerance");
  cmd->add_option("--threads", f.threads, "worker threads (results are identical)");
  cmd->add_option("--z0", f.z0_path, "file of 2m initial z values");
}

pdmm::ScheduleConfig to_config(const SolveFlags& f) {
  pdmm::ScheduleConfig cfg;
  cfg.mode = f.mode == "stoch" ? pdmm::ScheduleMode::Stochastic
                               : pdmm::ScheduleMode::Synchronous;
  cfg.alpha = f.alpha;
  cfg.c = f.c;
  cfg.node_active_prob = f.active_prob;
  cfg.loss_rate = f.loss_rate;
  cfg.seed = f.seed;
  cfg.max_iters = f.iters;
  cfg.tol_primal = f.tol_primal;
  cfg.tol_residual = f.tol_residual;
  cfg.trace_every = f.trace_every;
  cfg.threads = f.threads;
  return cfg;
}

std::vector<double> load_doubles(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw pdmm::Error("cannot open '" + path + "'");
  std::vector<double> values;
  double v = 0.0;
  while (in >> v) values.push_back(v);
  return values;
}

/// Quadratic objectives go to the active-set solver, all-linear problems to
/// the vertex solver (which also returns no duals).
struct OracleResult {
  std::vector<pdmm::Vector> x;
  std::optional<pdmm::Vector> row_duals;
};

OracleResult run_oracle(const pdmm::ProblemGraph& g) {
  bool all_linear = true;
  for (const auto& node : g.nodes) {
    if (std::holds_alternative<pdmm::QuadraticObjective>(node.objective)) {
      all_linear = false;
      break;
    }
  }
  if (all_linear) return {pdmm::solve_lp_vertex(g), std::nullopt};
  auto sol = pdmm::solve_active_set(g);
  return {std::move(sol.x), std::move(sol.row_duals)};
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw pdmm::Error("cannot write '" + path + "'");
  out << content;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

int cmd_solve(const SolveFlags& flags, bool verify_kkt, double kkt_tol,
              const std::string& solution_path) {
  const pdmm::ProblemGraph g = pdmm::load_problem(flags.problem_path);
  const pdmm::ScheduleConfig cfg = to_config(flags);
  pdmm::validate(cfg);

  std::optional<OracleResult> oracle;
  if (flags.with_oracle || verify_kkt) oracle = run_oracle(g);

  const pdmm::Engine engine(g, cfg.c);

  std::optional<pdmm::Vector> z0;
  if (!flags.z0_path.empty()) {
    const auto values = load_doubles(flags.z0_path);
    z0 = Eigen::Map<const pdmm::Vector>(values.data(),
                                        static_cast<pdmm::Index>(values.size()));
  }
  if (z0 && z0->size() != engine.layout().num_slots()) {
    throw pdmm::Error("--z0 expects " + std::to_string(engine.layout().num_slots()) +
                      " values");
  }

  // A provided solution is checked directly instead of running the engine.
  if (!solution_path.empty()) {
    const auto values = load_doubles(solution_path);
    std::vector<pdmm::Vector> x;
    std::size_t at = 0;
    for (int i = 0; i < g.num_nodes(); ++i) {
      const auto dim = static_cast<std::size_t>(g.nodes[static_cast<std::size_t>(i)].dim);
      if (at + dim > values.size()) throw pdmm::Error("solution file too short");
      x.push_back(Eigen::Map<const pdmm::Vector>(values.data() + at,
                                                 static_cast<pdmm::Index>(dim)));
      at += dim;
    }
    if (!oracle || !oracle->row_duals) {
      throw pdmm::Error("--solution verification needs oracle duals (quadratic objective)");
    }
    const auto report = pdmm::kkt_check(g, x, *oracle->row_duals);
    std::cout << "stationarity=" << fmt(report.stationarity)
              << " eq_residual=" << fmt(report.primal_eq_residual)
              << " ineq_violation=" << fmt(report.primal_ineq_violation)
              << " dual_negativity=" << fmt(report.dual_negativity)
              << " complementarity=" << fmt(report.complementarity) << "\n";
    return report.max_residual() <= kkt_tol ? kExitOk : kExitNumerical;
  }

  const auto start = std::chrono::steady_clock::now();
  const pdmm::RunResult result =
      engine.run(cfg, oracle ? &oracle->x : nullptr, z0 ? &*z0 : nullptr);
  const double wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
          .count();

  if (!flags.trace_path.empty()) {
    write_file(flags.trace_path, pdmm::trace_to_csv(result.trace));
  }

  const auto& last = result.trace.rows.back();
  std::cout << "converged=" << (result.trace.converged ? "true" : "false")
            << " iters=" << result.trace.iterations
            << " stop=" << result.trace.stop_reason;
  if (last.primal_error) std::cout << " primal_error=" << fmt(*last.primal_error);
  std::cout << " residual=" << fmt(last.fixed_point_residual)
            << " max_violation=" << fmt(last.max_violation)
            << " objective=" << fmt(last.objective) << " wall_ms=" << fmt(wall_ms)
            << "\n";

  if (verify_kkt) {
    const auto duals = engine.recover_row_duals(result.state);
    const auto report = pdmm::kkt_check(engine.graph(), result.state.x, duals);
    std::cout << "kkt stationarity=" << fmt(report.stationarity)
              << " eq_residual=" << fmt(report.primal_eq_residual)
              << " ineq_violation=" << fmt(report.primal_ineq_violation)
              << " dual_negativity=" << fmt(report.dual_negativity)
              << " complementarity=" << fmt(report.complementarity) << "\n";
    if (!result.trace.converged) return kExitNoConvergence;
    return report.max_residual() <= kkt_tol ? kExitOk : kExitNumerical;
  }
  return result.trace.converged ? kExitOk : kExitNoConvergence;
}

int cmd_generate(const std::string& kind, int n, int sensors, std::uint64_t seed,
                 double noise, double half_angle, const std::string& out) {
  if (kind == "toy") {
    pdmm::save_problem(pdmm::gen_toy(seed), out);
    std::cout << "wrote " << out << "\n";
  } else if (kind == "geometric") {
    const auto scenario = pdmm::gen_geometric(n, seed);
    pdmm::save_problem(scenario.graph, out);
    std::cout << "wrote " << out << " (radius " << fmt(scenario.radius) << ", "
              << scenario.graph.edges.size() << " edges)\n";
  } else {
    const auto scenario = pdmm::gen_localisation(sensors, seed, noise, half_angle);
    const std::string cheb = out + ".cheb.prob";
    pdmm::save_problem(scenario.chebyshev, cheb);
    std::cout << "wrote " << cheb << "\n";
    for (std::size_t k = 0; k < scenario.rectangles.size(); ++k) {
      const std::string rect = out + ".rect" + std::to_string(k) + ".prob";
      pdmm::save_problem(scenario.rectangles[k], rect);
      std::cout << "wrote " << rect << "\n";
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distributed solver for separable convex programs with linear "
               "equality and inequality constraints over a graph"};
  app.require_subcommand(1);

  // generate
  auto* generate = app.add_subcommand("generate", "emit a problem description file");
  generate->require_subcommand(1);
  std::uint64_t gen_seed = 0;
  int gen_n = 50;
  int gen_sensors = 4;
  double gen_noise = 0.05;
  double gen_half_angle = 0.15;
  std::string gen_out;
  auto* gen_toy_cmd = generate->add_subcommand("toy", "three-node mixed-constraint problem");
  gen_toy_cmd->add_option("--seed", gen_seed, "observation seed");
  gen_toy_cmd->add_option("-o,--out", gen_out, "output path")->required();
  auto* gen_geo_cmd = generate->add_subcommand("geometric", "random geometric ordering problem");
  gen_geo_cmd->add_option("--n", gen_n, "node count")->check(CLI::PositiveNumber);
  gen_geo_cmd->add_option("--seed", gen_seed, "placement/observation seed");
  gen_geo_cmd->add_option("-o,--out", gen_out, "output path")->required();
  auto* gen_loc_cmd = generate->add_subcommand("localisation", "beam-intersection programs");
  gen_loc_cmd->add_option("--sensors", gen_sensors, "sensor count")->check(CLI::PositiveNumber);
  gen_loc_cmd->add_option("--seed", gen_seed, "scenario seed");
  gen_loc_cmd->add_option("--noise", gen_noise, "angular noise std (radians)");
  gen_loc_cmd->add_option("--half-angle", gen_half_angle, "beam half angle (radians)");
  gen_loc_cmd->add_option("-o,--out", gen_out, "output stem")->required();

  // solve
  SolveFlags solve_flags;
  auto* solve = app.add_subcommand("solve", "run the iteration on a problem file");
  add_solve_flags(solve, solve_flags);

  // verify
  SolveFlags verify_flags;
  double kkt_tol = 1e-6;
  std::string solution_path;
  auto* verify = app.add_subcommand("verify", "solve and check the optimality system");
  add_solve_flags(verify, verify_flags);
  verify->add_option("--kkt-tol", kkt_tol, "largest admissible KKT residual");
  verify->add_option("--solution", solution_path,
                     "check this solution file instead of running the engine");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (generate->parsed()) {
      const std::string kind = gen_toy_cmd->parsed()       ? "toy"
                               : gen_geo_cmd->parsed()     ? "geometric"
                                                           : "localisation";
      return cmd_generate(kind, gen_n, gen_sensors, gen_seed, gen_noise,
                          gen_half_angle, gen_out);
    }
    if (solve->parsed()) return cmd_solve(solve_flags, false, 0.0, "");
    if (verify->parsed()) return cmd_solve(verify_flags, true, kkt_tol, solution_path);
  } catch (const pdmm::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const pdmm::SingularSystem& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const pdmm::Infeasible& e) {
    std::cerr << "error: infeasible: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const pdmm::Unbounded& e) {
    std::cerr << "error: unbounded: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const pdmm::TooManyRows& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const pdmm::EmptyIntersection& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const pdmm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
