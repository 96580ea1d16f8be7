#pragma once

#include <vector>

#include "pdmm/problem.hpp"

namespace pdmm {

/// Per-directed-edge dual half-step: y = z + 2c (A x - b/2).
inline Vector y_update(const Vector& z, const Matrix& A, const Vector& b,
                       const Vector& x, double c) {
  return z + 2.0 * c * (A * x - 0.5 * b);
}

/// Cached normal-equation system for one node's primal update. The quadratic
/// form of the update is the same every iteration, only its linear term moves,
/// so the Cholesky factor of
///
///   H = Q + c * sum_j A_ij' A_ij
///
/// is computed once and reused. The update solves
///
///   H x = rhs_static - sum_j A_ij' z_{i|j},  rhs_static = -q + (c/2) sum_j A_ij' b_ij.
class NodeSystem {
 public:
  /// Factorizes the system for `node` of a lowered graph. Throws
  /// SingularSystem naming the node when H is not positive definite.
  NodeSystem(const ProblemGraph& g, const DirectedEdgeLayout& layout, int node,
             double c);

  /// Solves the node update given the full 2m slot vector z.
  Vector x_update(const Vector& z) const;

  Index dim() const { return dim_; }
  const Matrix& H() const { return H_; }
  const Vector& rhs_static() const { return rhs_static_; }

 private:
  struct IncidentBlock {
    Matrix A_transposed;  // n_i x rows
    Index slot_begin = 0; // this node's slots for the block are contiguous
  };

  Index dim_ = 0;
  Matrix H_;
  Vector rhs_static_;
  Eigen::LLT<Matrix> llt_;
  std::vector<IncidentBlock> incident_;
};

/// Factorized systems for every node of a lowered graph.
std::vector<NodeSystem> build_node_systems(const ProblemGraph& g,
                                           const DirectedEdgeLayout& layout,
                                           double c);

}  // namespace pdmm
