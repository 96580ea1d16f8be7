#include "pdmm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace pdmm {

namespace {

constexpr double kFeasTol = 1e-9;
constexpr double kDualTol = 1e-9;
constexpr double kBoxBound = 1e6;
constexpr Index kMaxIneqRows = 25;
constexpr Index kMaxLpDim = 4;

struct Candidate {
  Vector x;
  Vector duals;  // per stacked row: eq rows then chosen lambda placement
  double objective = std::numeric_limits<double>::infinity();
  bool found = false;
};

/// Enumerates active subsets for  min 0.5 x'Qx + q'x, A_eq x = b_eq,
/// A_in x <= b_in  and returns the best certified candidate. `duals` in the
/// result holds b_eq.size() equality multipliers followed by one multiplier
/// per inequality row.
///
/// Redundant equality rows (consensus cycles produce them) would make every
/// KKT matrix singular, so an independent row subset enters the system while
/// feasibility is still checked against all rows; dropped rows keep a zero
/// multiplier.
Candidate enumerate_active_sets(const Matrix& Q, const Vector& q,
                                const Matrix& A_eq, const Vector& b_eq,
                                const Matrix& A_in, const Vector& b_in) {
  const Index n = q.size();
  const Index n_in = b_in.size();

  std::vector<Index> eq_sel;
  if (b_eq.size() > 0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(A_eq.transpose());
    const auto& perm = qr.colsPermutation().indices();
    for (Index r = 0; r < qr.rank(); ++r) eq_sel.push_back(perm[r]);
    std::sort(eq_sel.begin(), eq_sel.end());
  }
  const auto n_eq = static_cast<Index>(eq_sel.size());
  Matrix A_eq_red(n_eq, n);
  Vector b_eq_red(n_eq);
  for (Index r = 0; r < n_eq; ++r) {
    A_eq_red.row(r) = A_eq.row(eq_sel[static_cast<std::size_t>(r)]);
    b_eq_red[r] = b_eq[eq_sel[static_cast<std::size_t>(r)]];
  }

  Candidate best;
  for (std::uint32_t mask = 0; mask < (1u << n_in); ++mask) {
    const int n_act = __builtin_popcount(mask);
    const Index dim = n + n_eq + n_act;
    Matrix kkt = Matrix::Zero(dim, dim);
    Vector rhs(dim);
    kkt.topLeftCorner(n, n) = Q;
    rhs.head(n) = -q;
    kkt.block(n, 0, n_eq, n) = A_eq_red;
    kkt.block(0, n, n, n_eq) = A_eq_red.transpose();
    rhs.segment(n, n_eq) = b_eq_red;
    Index at = n + n_eq;
    for (Index r = 0; r < n_in; ++r) {
      if (!(mask & (1u << r))) continue;
      kkt.block(at, 0, 1, n) = A_in.row(r);
      kkt.block(0, at, n, 1) = A_in.row(r).transpose();
      rhs[at] = b_in[r];
      ++at;
    }

    Eigen::FullPivLU<Matrix> lu(kkt);
    if (!lu.isInvertible()) continue;
    const Vector sol = lu.solve(rhs);
    const Vector x = sol.head(n);

    // Row-wise tolerance so the huge internal box rows do not loosen the
    // check on ordinary rows.
    if (n_eq > 0 && ((A_eq * x - b_eq).cwiseAbs().array() -
                     kFeasTol * (1.0 + b_eq.cwiseAbs().array()))
                            .maxCoeff() > 0.0) {
      continue;
    }
    if (n_in > 0 && ((A_in * x - b_in).array() -
                     kFeasTol * (1.0 + b_in.cwiseAbs().array()))
                            .maxCoeff() > 0.0) {
      continue;
    }
    bool dual_ok = true;
    {
      Index lam_at = n + n_eq;
      for (Index r = 0; r < n_in && dual_ok; ++r) {
        if (mask & (1u << r)) dual_ok = sol[lam_at++] >= -kDualTol;
      }
    }
    if (!dual_ok) continue;

    const double obj = 0.5 * x.dot(Q * x) + q.dot(x);
    if (!best.found || obj < best.objective) {
      best.found = true;
      best.objective = obj;
      best.x = x;
      best.duals = Vector::Zero(b_eq.size() + n_in);
      for (Index r = 0; r < n_eq; ++r) {
        best.duals[eq_sel[static_cast<std::size_t>(r)]] = sol[n + r];
      }
      Index lam_at = n + n_eq;
      for (Index r = 0; r < n_in; ++r) {
        if (mask & (1u << r)) best.duals[b_eq.size() + r] = std::max(sol[lam_at++], 0.0);
      }
    }
  }
  return best;
}

/// Positive definiteness of Q restricted to the nullspace of A_eq; a problem
/// with this property and a nonempty feasible set always has a certified
/// optimum, so enumeration failure then means infeasibility.
bool strongly_convex_on_feasible_subspace(const Matrix& Q, const Matrix& A_eq) {
  Matrix basis;
  if (A_eq.rows() == 0) {
    basis = Matrix::Identity(Q.rows(), Q.cols());
  } else {
    basis = Eigen::FullPivLU<Matrix>(A_eq).kernel();
  }
  if (basis.cols() == 0) return true;  // feasible set is a point
  const Matrix reduced = basis.transpose() * Q * basis;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(reduced, Eigen::EigenvaluesOnly);
  const double scale = 1.0 + reduced.cwiseAbs().maxCoeff();
  return eig.eigenvalues().minCoeff() > 1e-10 * scale;
}

std::vector<Vector> split_by_node(const Vector& x, const std::vector<Index>& offsets,
                                  int count) {
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    out.push_back(x.segment(offsets[idx], offsets[idx + 1] - offsets[idx]));
  }
  return out;
}

}  // namespace

StackedProblem stack_problem(const ProblemGraph& g) {
  const ProblemGraph lowered = lower_node_constraints(g);
  StackedProblem st;

  st.node_offset.resize(lowered.nodes.size() + 1);
  Index n = 0;
  for (std::size_t i = 0; i < lowered.nodes.size(); ++i) {
    st.node_offset[i] = n;
    n += lowered.nodes[i].dim;
  }
  st.node_offset.back() = n;

  st.Q = Matrix::Zero(n, n);
  st.q = Vector::Zero(n);
  for (std::size_t i = 0; i < lowered.nodes.size(); ++i) {
    const Index off = st.node_offset[i];
    const Index dim = lowered.nodes[i].dim;
    if (const auto* quad = std::get_if<QuadraticObjective>(&lowered.nodes[i].objective)) {
      st.Q.block(off, off, dim, dim) = quad->Q;
      st.q.segment(off, dim) = quad->q;
    } else {
      st.q.segment(off, dim) = std::get<LinearObjective>(lowered.nodes[i].objective).g;
    }
  }

  st.total_rows = 0;
  for (const auto& e : lowered.edges) st.total_rows += e.rows();

  Index n_eq = 0;
  Index n_in = 0;
  for (const auto& e : lowered.edges) {
    for (const auto k : e.kind) {
      (k == ConstraintKind::Equality ? n_eq : n_in) += 1;
    }
  }
  st.A_eq = Matrix::Zero(n_eq, n);
  st.b_eq = Vector::Zero(n_eq);
  st.A_in = Matrix::Zero(n_in, n);
  st.b_in = Vector::Zero(n_in);

  Index global = 0;
  Index eq_at = 0;
  Index in_at = 0;
  for (const auto& e : lowered.edges) {
    const Index off_i = st.node_offset[static_cast<std::size_t>(e.i)];
    const Index off_j = st.node_offset[static_cast<std::size_t>(e.j)];
    for (Index r = 0; r < e.rows(); ++r, ++global) {
      const bool eq = e.kind[static_cast<std::size_t>(r)] == ConstraintKind::Equality;
      Matrix& A = eq ? st.A_eq : st.A_in;
      Vector& b = eq ? st.b_eq : st.b_in;
      const Index at = eq ? eq_at++ : in_at++;
      A.block(at, off_i, 1, e.A_ij.cols()) = e.A_ij.row(r);
      A.block(at, off_j, 1, e.A_ji.cols()) = e.A_ji.row(r);
      b[at] = e.b[r];
      (eq ? st.eq_rows : st.in_rows).push_back(global);
    }
  }
  return st;
}

ActiveSetSolution solve_active_set(const ProblemGraph& g) {
  const StackedProblem st = stack_problem(g);
  if (st.b_in.size() > kMaxIneqRows) {
    throw TooManyRows("active-set enumeration limited to 25 inequality rows, got " +
                      std::to_string(st.b_in.size()));
  }

  Candidate best = enumerate_active_sets(st.Q, st.q, st.A_eq, st.b_eq, st.A_in, st.b_in);
  if (!best.found) {
    if (strongly_convex_on_feasible_subspace(st.Q, st.A_eq)) {
      throw Infeasible("no feasible point satisfies all constraints");
    }
    // Flat directions exist; retry inside a large box to separate an empty
    // feasible set from an unbounded objective.
    const Index n = st.q.size();
    if (st.b_in.size() + 2 * n > kMaxIneqRows) {
      throw Error("cannot classify failure: too many rows after boxing");
    }
    Matrix A_boxed(st.A_in.rows() + 2 * n, n);
    Vector b_boxed(st.b_in.size() + 2 * n);
    A_boxed.topRows(st.A_in.rows()) = st.A_in;
    A_boxed.middleRows(st.A_in.rows(), n) = Matrix::Identity(n, n);
    A_boxed.bottomRows(n) = -Matrix::Identity(n, n);
    b_boxed.head(st.b_in.size()) = st.b_in;
    b_boxed.tail(2 * n).setConstant(kBoxBound);
    Candidate boxed = enumerate_active_sets(st.Q, st.q, st.A_eq, st.b_eq, A_boxed, b_boxed);
    if (boxed.found) throw Unbounded("objective decreases without bound");
    throw Infeasible("no feasible point satisfies all constraints");
  }

  ActiveSetSolution sol;
  sol.objective = best.objective;
  sol.x = split_by_node(best.x, st.node_offset, g.num_nodes());
  sol.row_duals = Vector::Zero(st.total_rows);
  for (std::size_t r = 0; r < st.eq_rows.size(); ++r) {
    sol.row_duals[st.eq_rows[r]] = best.duals[static_cast<Index>(r)];
  }
  for (std::size_t r = 0; r < st.in_rows.size(); ++r) {
    sol.row_duals[st.in_rows[r]] = best.duals[st.b_eq.size() + static_cast<Index>(r)];
  }
  return sol;
}

Vector solve_lp_vertex(const DenseLp& lp) {
  const Index dim = lp.g.size();
  if (dim < 1 || dim > kMaxLpDim) {
    throw Error("vertex enumeration supports dimensions 1 to 4, got " +
                std::to_string(dim));
  }
  if (lp.b.size() > kMaxIneqRows) {
    throw TooManyRows("vertex enumeration limited to 25 rows, got " +
                      std::to_string(lp.b.size()));
  }
  if (lp.A.cols() != dim || lp.A.rows() != lp.b.size()) {
    throw DimensionMismatch("LP row shapes are inconsistent");
  }

  const Index m = lp.b.size() + 2 * dim;
  Matrix A(m, dim);
  Vector b(m);
  A.topRows(lp.A.rows()) = lp.A;
  A.middleRows(lp.A.rows(), dim) = Matrix::Identity(dim, dim);
  A.bottomRows(dim) = -Matrix::Identity(dim, dim);
  b.head(lp.b.size()) = lp.b;
  b.tail(2 * dim).setConstant(kBoxBound);

  const Eigen::ArrayXd row_tol = kFeasTol * (1.0 + b.cwiseAbs().array());

  Vector best_x;
  double best_obj = std::numeric_limits<double>::infinity();
  bool found = false;

  std::vector<Index> pick(static_cast<std::size_t>(dim));
  std::iota(pick.begin(), pick.end(), Index{0});
  while (true) {
    Matrix basis(dim, dim);
    Vector rhs(dim);
    for (Index r = 0; r < dim; ++r) {
      basis.row(r) = A.row(pick[static_cast<std::size_t>(r)]);
      rhs[r] = b[pick[static_cast<std::size_t>(r)]];
    }
    Eigen::FullPivLU<Matrix> lu(basis);
    if (lu.isInvertible()) {
      const Vector x = lu.solve(rhs);
      if (((A * x - b).array() - row_tol).maxCoeff() <= 0.0) {
        const double obj = lp.g.dot(x);
        if (!found || obj < best_obj - 1e-12 * (1.0 + std::abs(best_obj))) {
          found = true;
          best_obj = obj;
          best_x = x;
        }
      }
    }

    // Next lexicographic dim-combination of row indices.
    Index i = dim - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == m - dim + i) --i;
    if (i < 0) break;
    ++pick[static_cast<std::size_t>(i)];
    for (Index j = i + 1; j < dim; ++j) {
      pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
    }
  }

  if (!found) throw Infeasible("no vertex satisfies all rows");
  if (best_x.cwiseAbs().maxCoeff() >= kBoxBound * (1.0 - 1e-6)) {
    throw Unbounded("optimum lies on the internal bounding box");
  }
  return best_x;
}

std::vector<Vector> solve_lp_vertex(const ProblemGraph& g) {
  const StackedProblem st = stack_problem(g);
  if (st.Q.size() > 0 && st.Q.cwiseAbs().maxCoeff() != 0.0) {
    throw Error("vertex oracle requires a linear objective");
  }

  const Index n = st.q.size();
  Vector x0;
  Matrix basis;
  if (st.b_eq.size() > 0) {
    Eigen::FullPivLU<Matrix> lu(st.A_eq);
    x0 = lu.solve(st.b_eq);
    const double scale = 1.0 + st.b_eq.cwiseAbs().maxCoeff();
    if ((st.A_eq * x0 - st.b_eq).cwiseAbs().maxCoeff() > kFeasTol * scale) {
      throw Infeasible("equality constraints are inconsistent");
    }
    basis = lu.kernel();
  } else {
    x0 = Vector::Zero(n);
    basis = Matrix::Identity(n, n);
  }

  const Index reduced_dim = basis.cols();
  if (reduced_dim == 0) {
    // Equalities pin every variable; x0 is the only candidate.
    if (st.b_in.size() > 0 &&
        ((st.A_in * x0 - st.b_in).array() -
         kFeasTol * (1.0 + st.b_in.cwiseAbs().array())).maxCoeff() > 0.0) {
      throw Infeasible("the pinned point violates an inequality row");
    }
    return split_by_node(x0, st.node_offset, g.num_nodes());
  }
  if (reduced_dim > kMaxLpDim) {
    throw Error("reduced LP dimension " + std::to_string(reduced_dim) +
                " above the supported bound 4");
  }

  Matrix A_t = st.A_in * basis;
  Vector b_t = st.b_in - st.A_in * x0;

  // Consensus problems replicate the same half-planes at every node; after
  // elimination those rows coincide, so merge near-identical rows keeping the
  // tighter bound.
  std::vector<Index> keep;
  for (Index r = 0; r < A_t.rows(); ++r) {
    const double norm = A_t.row(r).norm();
    if (norm <= 1e-14) {
      if (b_t[r] < -kFeasTol) throw Infeasible("a constraint row excludes every point");
      continue;
    }
    bool merged = false;
    for (const Index k : keep) {
      const double knorm = A_t.row(k).norm();
      if ((A_t.row(r) / norm - A_t.row(k) / knorm).cwiseAbs().maxCoeff() < 1e-9) {
        if (b_t[r] / norm < b_t[k] / knorm) {
          A_t.row(k) = A_t.row(r);
          b_t[k] = b_t[r];
        }
        merged = true;
        break;
      }
    }
    if (!merged) keep.push_back(r);
  }

  Matrix A_kept(static_cast<Index>(keep.size()), reduced_dim);
  Vector b_kept(static_cast<Index>(keep.size()));
  for (std::size_t r = 0; r < keep.size(); ++r) {
    A_kept.row(static_cast<Index>(r)) = A_t.row(keep[r]);
    b_kept[static_cast<Index>(r)] = b_t[keep[r]];
  }

  const Vector t = solve_lp_vertex(DenseLp{basis.transpose() * st.q, A_kept, b_kept});
  return split_by_node(x0 + basis * t, st.node_offset, g.num_nodes());
}

double KktReport::max_residual() const {
  return std::max({primal_eq_residual, primal_ineq_violation, dual_negativity,
                   complementarity, stationarity});
}

KktReport kkt_check(const ProblemGraph& g, const std::vector<Vector>& x,
                    const Vector& row_duals) {
  const ProblemGraph lowered = lower_node_constraints(g);
  std::vector<Vector> xs = x;
  for (std::size_t i = xs.size(); i < lowered.nodes.size(); ++i) {
    xs.push_back(Vector::Zero(lowered.nodes[i].dim));
  }

  Index total_rows = 0;
  for (const auto& e : lowered.edges) total_rows += e.rows();
  if (row_duals.size() != total_rows) {
    throw DimensionMismatch("dual vector length does not match row count");
  }

  KktReport report;
  std::vector<Vector> grad(lowered.nodes.size());
  for (std::size_t i = 0; i < lowered.nodes.size(); ++i) {
    grad[i] = objective_gradient(lowered.nodes[i].objective, xs[i]);
  }

  Index global = 0;
  for (const auto& e : lowered.edges) {
    const Vector residual = e.A_ij * xs[static_cast<std::size_t>(e.i)] +
                            e.A_ji * xs[static_cast<std::size_t>(e.j)] - e.b;
    const Vector lambda = row_duals.segment(global, e.rows());
    grad[static_cast<std::size_t>(e.i)].noalias() += e.A_ij.transpose() * lambda;
    grad[static_cast<std::size_t>(e.j)].noalias() += e.A_ji.transpose() * lambda;
    for (Index r = 0; r < e.rows(); ++r) {
      if (e.kind[static_cast<std::size_t>(r)] == ConstraintKind::Equality) {
        report.primal_eq_residual = std::max(report.primal_eq_residual, std::abs(residual[r]));
      } else {
        report.primal_ineq_violation = std::max(report.primal_ineq_violation,
                                                std::max(residual[r], 0.0));
        report.dual_negativity = std::max(report.dual_negativity, -lambda[r]);
        report.complementarity = std::max(report.complementarity,
                                          std::abs(lambda[r] * residual[r]));
      }
    }
    global += e.rows();
  }
  report.dual_negativity = std::max(report.dual_negativity, 0.0);
  for (const auto& gvec : grad) {
    if (gvec.size() > 0) {
      report.stationarity = std::max(report.stationarity, gvec.cwiseAbs().maxCoeff());
    }
  }
  return report;
}

}  // namespace pdmm
