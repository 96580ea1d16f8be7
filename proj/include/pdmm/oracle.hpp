#pragma once

#include <vector>

#include "pdmm/problem.hpp"

namespace pdmm {

/// Dense stacked form of a whole problem graph:
///   minimize 0.5 x'Qx + q'x   s.t.  A_eq x = b_eq,  A_in x <= b_in,
/// with x the concatenation of all node variables. Rows follow the canonical
/// layout order (edges sorted, rows in block order), split by sense;
/// eq_rows/in_rows map each split row back to its global row index.
struct StackedProblem {
  Matrix Q;
  Vector q;
  Matrix A_eq;
  Vector b_eq;
  Matrix A_in;
  Vector b_in;
  std::vector<Index> eq_rows;
  std::vector<Index> in_rows;
  std::vector<Index> node_offset;  // per node column offset, plus total at the end
  Index total_rows = 0;
};

/// Lowers node constraints, then stacks. `g` must be validated.
StackedProblem stack_problem(const ProblemGraph& g);

struct ActiveSetSolution {
  std::vector<Vector> x;  // one vector per node of the input graph
  Vector row_duals;       // per global constraint row
  double objective = 0.0;
};

/// Ground-truth solver by exhaustive active-set enumeration: every subset of
/// inequality rows is treated as active in turn and the resulting equality
/// KKT system solved; a candidate that is primal feasible with non-negative
/// multipliers on its active rows is a certified global optimum by convexity.
///
/// Intended for desk-scale acceptance problems. Throws TooManyRows above 25
/// inequality rows, Infeasible or Unbounded otherwise when no candidate is
/// certified.
ActiveSetSolution solve_active_set(const ProblemGraph& g);

/// A small dense LP: minimize g'x subject to A x <= b.
struct DenseLp {
  Vector g;
  Matrix A;
  Vector b;
};

/// Ground-truth LP solver by vertex enumeration over all dim-sized subsets of
/// rows. A large bounding box is appended internally; an optimum landing on
/// the box is reported as Unbounded. Dimension must be at most 4 and rows at
/// most 25. Throws Infeasible when no vertex satisfies all rows.
Vector solve_lp_vertex(const DenseLp& lp);

/// Graph overload for linear objectives: equality rows are eliminated through
/// the nullspace (consensus constraints collapse to the shared variable),
/// duplicate inequality rows are merged keeping the tighter bound, and the
/// reduced LP is solved by vertex enumeration. The reduced dimension must be
/// at most 4.
std::vector<Vector> solve_lp_vertex(const ProblemGraph& g);

struct KktReport {
  double primal_eq_residual = 0.0;    // max |A x - b| over equality rows
  double primal_ineq_violation = 0.0; // max positive part over inequality rows
  double dual_negativity = 0.0;       // max(0, -lambda) over inequality rows
  double complementarity = 0.0;       // max |lambda * (A x - b)| over inequality rows
  double stationarity = 0.0;          // max-norm of grad f + A' lambda per node

  double max_residual() const;
};

/// Evaluates the optimality system of the stacked problem at (x, row_duals).
/// `x` holds one vector per node of `g`; `row_duals` holds one multiplier per
/// global constraint row in canonical order.
KktReport kkt_check(const ProblemGraph& g, const std::vector<Vector>& x,
                    const Vector& row_duals);

}  // namespace pdmm
