#pragma once

#include <utility>
#include <variant>
#include <vector>

#include "pdmm/errors.hpp"
#include "pdmm/types.hpp"

namespace pdmm {

/// f(x) = 0.5 x'Qx + q'x with Q symmetric positive semidefinite.
struct QuadraticObjective {
  Matrix Q;
  Vector q;
};

/// f(x) = g'x.
struct LinearObjective {
  Vector g;
};

using LocalObjective = std::variant<QuadraticObjective, LinearObjective>;

double objective_value(const LocalObjective& f, const Vector& x);
Vector objective_gradient(const LocalObjective& f, const Vector& x);
Index objective_dim(const LocalObjective& f);

struct Node {
  Index dim = 0;
  LocalObjective objective = LinearObjective{Vector(0)};
};

/// Constraint rows A_ij x_i + A_ji x_j (= or <=) b shared by nodes i and j.
/// `kind` has one entry per row so a single edge may mix senses.
struct EdgeConstraintBlock {
  int i = 0;
  int j = 0;
  Matrix A_ij;  // rows x n_i
  Matrix A_ji;  // rows x n_j
  Vector b;
  std::vector<ConstraintKind> kind;
  /// True on blocks produced from node constraints. The far endpoint is a
  /// dummy that lives inside node i, so no transmission is simulated for it.
  bool colocated = false;

  Index rows() const { return b.size(); }
};

/// Constraint rows A x_i (= or <=) b on a single node.
struct NodeConstraintBlock {
  int i = 0;
  Matrix A;
  Vector b;
  std::vector<ConstraintKind> kind;

  Index rows() const { return b.size(); }
};

struct ProblemGraph {
  std::vector<Node> nodes;
  std::vector<EdgeConstraintBlock> edges;
  std::vector<NodeConstraintBlock> node_constraints;
  /// Nodes at index >= num_real_nodes are dummies added by
  /// lower_node_constraints(). Zero means "not set yet"; build_problem fills
  /// it in.
  int num_real_nodes = 0;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  Index total_dim() const;
  Index total_constraint_rows() const;
};

/// True when the undirected edge pairs connect all of `num_nodes` vertices.
/// A single vertex with no edges counts as connected.
bool is_connected(int num_nodes, const std::vector<std::pair<int, int>>& edges);

/// Validates every model invariant and returns the graph in canonical form
/// (edges sorted by unordered node pair, node constraints by node id).
///
/// Throws DimensionMismatch, DisconnectedGraph, NonSymmetricQ,
/// NotPositiveSemidefinite or DuplicateEdge.
ProblemGraph build_problem(ProblemGraph g);

/// Rewrites each node constraint block on node i as an edge block between i
/// and a fresh zero-dimensional dummy node i'. The dummy contributes nothing
/// to the constraint (its coefficient matrix has zero columns) and its slot
/// updates are co-located with node i. Idempotent.
ProblemGraph lower_node_constraints(ProblemGraph g);

/// Slot bookkeeping for the 2m-dimensional lifted dual vector. Every
/// constraint row of every edge owns two slots, one per direction; partnered
/// slots swap under the permutation half of the exchange operator.
struct DirectedEdgeLayout {
  struct Slot {
    int edge = 0;     // index into ProblemGraph::edges
    Index row = 0;    // row within the edge block
    int owner = 0;    // node whose matrix feeds this slot
    int neighbour = 0;
  };

  Index total_rows = 0;                  // m
  std::vector<Slot> slots;               // size 2m
  std::vector<Index> partner;            // involution on [0, 2m)
  std::vector<Index> edge_row_offset;    // per edge, global index of row 0
  std::vector<ConstraintKind> row_kind;  // size m
  std::vector<ConstraintKind> slot_kind; // size 2m
  Vector d;                              // size 2m; d = b/2 on both directions

  Index num_slots() const { return static_cast<Index>(slots.size()); }

  /// First slot of the run owned by `owner` on edge `edge`; the block's rows
  /// occupy consecutive slots starting there.
  Index slot_base(int edge, int owner) const;
  Index slot(int edge, Index row, int owner) const {
    return slot_base(edge, owner) + row;
  }
  Index global_row(int edge, Index row) const {
    return edge_row_offset[static_cast<std::size_t>(edge)] + row;
  }
};

/// Builds the canonical slot layout of a lowered graph: edges in stored
/// (sorted) order, rows in block order, the lower node id's slots first.
/// Throws Error if node constraints have not been lowered.
DirectedEdgeLayout build_layout(const ProblemGraph& g);

}  // namespace pdmm
