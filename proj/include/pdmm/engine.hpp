#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pdmm/local_solver.hpp"
#include "pdmm/problem.hpp"
#include "pdmm/rng.hpp"

namespace pdmm {

enum class ScheduleMode { Synchronous, Stochastic };

struct ScheduleConfig {
  ScheduleMode mode = ScheduleMode::Synchronous;
  double alpha = 1.0;             // averaging weight in (0, 1]
  double c = 0.5;                 // penalty, > 0
  double node_active_prob = 1.0;  // in (0, 1]
  double loss_rate = 0.0;         // in [0, 1)
  std::uint64_t seed = 0;
  long max_iters = 10000;
  double tol_primal = 1e-6;
  double tol_residual = 1e-8;
  long trace_every = 1;
  int threads = 1;
};

/// Throws Error on out-of-range values. The ranges imply that every slot has
/// a nonzero update probability in stochastic mode.
void validate(const ScheduleConfig& cfg);

/// Per-iteration update mask; the bit at slot (j|i) means z_{j|i} is
/// refreshed this iteration.
struct UpdateMask {
  std::vector<std::uint8_t> bits;

  static UpdateMask full(Index num_slots) {
    return UpdateMask{std::vector<std::uint8_t>(static_cast<std::size_t>(num_slots), 1)};
  }
};

struct IterationState {
  std::vector<Vector> x;  // per node
  Vector y;               // 2m
  Vector z;               // 2m
  Vector mu;              // 2m, mu = z_prev + c (Cx - d), kept for diagnostics
  Vector mu_prev;         // mu of the preceding iteration
  long k = 0;
};

struct TraceRow {
  long iter = 0;
  std::optional<double> primal_error;  // only when an oracle solution is given
  double fixed_point_residual = 0.0;   // ||z - T(z)|| before the step's blend
  double max_violation = 0.0;
  double objective = 0.0;
};

struct Trace {
  std::vector<TraceRow> rows;
  bool converged = false;
  long iterations = 0;
  std::string stop_reason;  // "primal_tol", "residual_tol", "stalled", "max_iters"
};

/// Serializes rows as CSV with header
/// `iter,primal_error,fixed_point_residual,max_violation,objective`; a missing
/// oracle leaves the primal_error field empty. Formatting is locale-free and
/// reproducible byte-for-byte.
std::string trace_to_csv(const Trace& trace);

struct RunResult {
  Trace trace;
  IterationState state;
};

/// Fixed-point iteration on the lifted dual vector. Construction lowers node
/// constraints, builds the slot layout and factorizes every node system for
/// the given penalty; instances are immutable afterwards and a run never
/// mutates the engine, so one engine may serve concurrent runs.
class Engine {
 public:
  /// `g` must already be validated by build_problem. Throws SingularSystem if
  /// any node update is not positive definite under this penalty.
  Engine(ProblemGraph g, double c);

  // Edge views point into the stored graph.
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  const ProblemGraph& graph() const { return graph_; }
  const DirectedEdgeLayout& layout() const { return layout_; }
  double penalty() const { return c_; }

  /// One full operator application: every node solve, every dual half-step,
  /// then the pairwise exchange. Outputs are written in place; `threads`
  /// splits the node and edge loops without changing any result.
  void apply_T(const Vector& z, std::vector<Vector>& x, Vector& y, Vector& mu,
               Vector& z_next, int threads = 1) const;

  IterationState initial_state(const Vector* z0 = nullptr) const;

  /// z <- (1 - alpha) z + alpha T(z); x, y, mu refreshed from the application.
  void step_synchronous(IterationState& state, double alpha, int threads = 1) const;

  /// Full T(z) is computed from the current z, then only masked slots blend;
  /// unmasked slots keep their value. A full mask reproduces the synchronous
  /// step exactly.
  void step_stochastic(IterationState& state, const UpdateMask& mask, double alpha,
                       int threads = 1) const;

  /// Node activations and per-directed-edge transmission survival. Draw order
  /// is fixed: one activation draw per real node in id order, then two loss
  /// draws per non-colocated edge in edge order (low-to-high direction
  /// first). Colocated edges follow their host node's activation and skip the
  /// loss draws entirely.
  UpdateMask sample_mask(Rng& rng, const ScheduleConfig& cfg) const;

  /// Iterates until max_iters or convergence, starting from z0 (zeros when
  /// omitted). With an oracle solution the run stops on primal error; without
  /// one it stops on the fixed-point residual when alpha < 1 and on primal
  /// stagnation when alpha = 1 (the auxiliary vector need not settle there).
  RunResult run(const ScheduleConfig& cfg,
                const std::vector<Vector>* oracle_x = nullptr,
                const Vector* z0 = nullptr) const;

  double objective_value(const std::vector<Vector>& x) const;
  /// Infinity norm of equality residuals and positive parts of inequality
  /// residuals over all rows.
  double max_constraint_violation(const std::vector<Vector>& x) const;
  /// Per-row duals recovered as the average of the two directed slots.
  Vector recover_row_duals(const Vector& mu) const;
  /// Same recovery evaluated at the midpoint of the last two mu iterates.
  /// Non-averaged runs settle into an alternating pair of states whose
  /// midpoint is the fixed point, so the midpoint duals converge even when a
  /// single iterate's duals do not.
  Vector recover_row_duals(const IterationState& state) const;
  /// Primal distance to a reference solution over its node count.
  double primal_error(const std::vector<Vector>& x,
                      const std::vector<Vector>& reference) const;

 private:
  struct EdgeView {
    const Matrix* A_low = nullptr;   // matrix of the lower node id
    const Matrix* A_high = nullptr;
    const Vector* b = nullptr;
    int low = 0;
    int high = 0;
    Index base = 0;  // first slot; low side occupies [base, base+m)
    Index m = 0;
    bool colocated = false;
    int host = 0;  // activation gate for colocated edges
  };

  void refresh_edges(const Vector& z, const std::vector<Vector>& x, Vector& y,
                     Vector& mu, int threads) const;

  ProblemGraph graph_;
  DirectedEdgeLayout layout_;
  std::vector<NodeSystem> systems_;
  std::vector<EdgeView> edge_views_;
  double c_ = 0.0;
};

}  // namespace pdmm
