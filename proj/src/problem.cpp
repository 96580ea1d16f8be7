#include "pdmm/problem.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <string>

namespace pdmm {

namespace {

std::string node_tag(int i) { return "node " + std::to_string(i); }

std::string edge_tag(const EdgeConstraintBlock& e) {
  return "edge (" + std::to_string(e.i) + "," + std::to_string(e.j) + ")";
}

void check_kind_rows(Index rows, const std::vector<ConstraintKind>& kind,
                     const std::string& where) {
  if (static_cast<Index>(kind.size()) != rows) {
    throw DimensionMismatch(where + ": kind list has " +
                            std::to_string(kind.size()) + " entries for " +
                            std::to_string(rows) + " rows");
  }
}

void validate_objective(const Node& node, int id) {
  if (objective_dim(node.objective) != node.dim) {
    throw DimensionMismatch(node_tag(id) + ": objective dimension " +
                            std::to_string(objective_dim(node.objective)) +
                            " does not match dim " + std::to_string(node.dim));
  }
  if (const auto* quad = std::get_if<QuadraticObjective>(&node.objective)) {
    if (quad->Q.rows() != quad->Q.cols()) {
      throw DimensionMismatch(node_tag(id) + ": Q is not square");
    }
    if (quad->Q.rows() != quad->q.size()) {
      throw DimensionMismatch(node_tag(id) + ": Q and q sizes differ");
    }
    const double scale = 1.0 + (quad->Q.size() > 0 ? quad->Q.cwiseAbs().maxCoeff() : 0.0);
    if (quad->Q.size() > 0 &&
        (quad->Q - quad->Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw NonSymmetricQ(node_tag(id) + ": Q is not symmetric");
    }
    if (quad->Q.size() > 0) {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(quad->Q, Eigen::EigenvaluesOnly);
      if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
        throw NotPositiveSemidefinite(node_tag(id) +
                                      ": Q has a negative eigenvalue");
      }
    }
  }
}

}  // namespace

double objective_value(const LocalObjective& f, const Vector& x) {
  if (const auto* quad = std::get_if<QuadraticObjective>(&f)) {
    return 0.5 * x.dot(quad->Q * x) + quad->q.dot(x);
  }
  return std::get<LinearObjective>(f).g.dot(x);
}

Vector objective_gradient(const LocalObjective& f, const Vector& x) {
  if (const auto* quad = std::get_if<QuadraticObjective>(&f)) {
    return quad->Q * x + quad->q;
  }
  return std::get<LinearObjective>(f).g;
}

Index objective_dim(const LocalObjective& f) {
  if (const auto* quad = std::get_if<QuadraticObjective>(&f)) {
    return quad->q.size();
  }
  return std::get<LinearObjective>(f).g.size();
}

Index ProblemGraph::total_dim() const {
  Index n = 0;
  for (const auto& node : nodes) n += node.dim;
  return n;
}

Index ProblemGraph::total_constraint_rows() const {
  Index m = 0;
  for (const auto& e : edges) m += e.rows();
  for (const auto& c : node_constraints) m += c.rows();
  return m;
}

bool is_connected(int num_nodes, const std::vector<std::pair<int, int>>& edges) {
  if (num_nodes <= 1) return num_nodes == 1;
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(num_nodes));
  for (const auto& [a, b] : edges) {
    adj[static_cast<std::size_t>(a)].push_back(b);
    adj[static_cast<std::size_t>(b)].push_back(a);
  }
  std::vector<char> seen(static_cast<std::size_t>(num_nodes), 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!frontier.empty()) {
    const int v = frontier.front();
    frontier.pop();
    for (int w : adj[static_cast<std::size_t>(v)]) {
      if (!seen[static_cast<std::size_t>(w)]) {
        seen[static_cast<std::size_t>(w)] = 1;
        ++reached;
        frontier.push(w);
      }
    }
  }
  return reached == num_nodes;
}

ProblemGraph build_problem(ProblemGraph g) {
  const int n = g.num_nodes();
  if (n == 0) throw Error("problem has no nodes");
  if (g.num_real_nodes == 0) g.num_real_nodes = n;
  if (g.num_real_nodes > n) throw Error("num_real_nodes exceeds node count");

  for (int i = 0; i < n; ++i) {
    if (g.nodes[static_cast<std::size_t>(i)].dim < 0) {
      throw DimensionMismatch(node_tag(i) + ": negative dimension");
    }
    validate_objective(g.nodes[static_cast<std::size_t>(i)], i);
  }

  std::set<std::pair<int, int>> seen_pairs;
  std::vector<std::pair<int, int>> pairs;
  for (const auto& e : g.edges) {
    if (e.i < 0 || e.i >= n || e.j < 0 || e.j >= n) {
      throw Error(edge_tag(e) + ": node id out of range");
    }
    if (e.i == e.j) throw Error(edge_tag(e) + ": loops are not allowed");
    const auto key = std::minmax(e.i, e.j);
    if (!seen_pairs.insert(key).second) {
      throw DuplicateEdge(edge_tag(e) + ": pair already has a block");
    }
    pairs.push_back(key);

    const Index m = e.rows();
    if (m == 0) throw DimensionMismatch(edge_tag(e) + ": block has no rows");
    if (e.A_ij.rows() != m || e.A_ji.rows() != m) {
      throw DimensionMismatch(edge_tag(e) + ": A_ij/A_ji/b row counts differ");
    }
    if (e.A_ij.cols() != g.nodes[static_cast<std::size_t>(e.i)].dim ||
        e.A_ji.cols() != g.nodes[static_cast<std::size_t>(e.j)].dim) {
      throw DimensionMismatch(edge_tag(e) + ": column counts do not match node dims");
    }
    check_kind_rows(m, e.kind, edge_tag(e));
  }

  for (const auto& c : g.node_constraints) {
    if (c.i < 0 || c.i >= n) {
      throw Error("node constraint: node id " + std::to_string(c.i) + " out of range");
    }
    const Index m = c.rows();
    if (m == 0) throw DimensionMismatch(node_tag(c.i) + ": constraint block has no rows");
    if (c.A.rows() != m) {
      throw DimensionMismatch(node_tag(c.i) + ": constraint A/b row counts differ");
    }
    if (c.A.cols() != g.nodes[static_cast<std::size_t>(c.i)].dim) {
      throw DimensionMismatch(node_tag(c.i) + ": constraint column count mismatch");
    }
    check_kind_rows(m, c.kind, node_tag(c.i) + " constraint");
  }

  if (!is_connected(n, pairs)) {
    throw DisconnectedGraph("graph is not connected");
  }

  std::stable_sort(g.edges.begin(), g.edges.end(),
                   [](const EdgeConstraintBlock& a, const EdgeConstraintBlock& b) {
                     return std::minmax(a.i, a.j) < std::minmax(b.i, b.j);
                   });
  std::stable_sort(g.node_constraints.begin(), g.node_constraints.end(),
                   [](const NodeConstraintBlock& a, const NodeConstraintBlock& b) {
                     return a.i < b.i;
                   });
  return g;
}

ProblemGraph lower_node_constraints(ProblemGraph g) {
  if (g.node_constraints.empty()) return g;
  for (auto& c : g.node_constraints) {
    const int dummy = g.num_nodes();
    g.nodes.push_back(Node{0, LinearObjective{Vector(0)}});
    EdgeConstraintBlock e;
    e.i = c.i;
    e.j = dummy;
    e.A_ij = std::move(c.A);
    e.A_ji = Matrix(e.A_ij.rows(), 0);
    e.b = std::move(c.b);
    e.kind = std::move(c.kind);
    e.colocated = true;
    g.edges.push_back(std::move(e));
  }
  g.node_constraints.clear();
  return build_problem(std::move(g));
}

Index DirectedEdgeLayout::slot_base(int edge, int owner) const {
  const auto e = static_cast<std::size_t>(edge);
  const Index base = 2 * edge_row_offset[e];
  const Index m = (e + 1 < edge_row_offset.size() ? edge_row_offset[e + 1] : total_rows) -
                  edge_row_offset[e];
  // Lower node id owns the first run of slots.
  const Index first_owner = slots[static_cast<std::size_t>(base)].owner;
  return owner == first_owner ? base : base + m;
}

DirectedEdgeLayout build_layout(const ProblemGraph& g) {
  if (!g.node_constraints.empty()) {
    throw Error("lower node constraints before building a layout");
  }
  DirectedEdgeLayout layout;
  layout.edge_row_offset.reserve(g.edges.size());

  Index m_total = 0;
  for (const auto& e : g.edges) {
    layout.edge_row_offset.push_back(m_total);
    m_total += e.rows();
  }
  layout.total_rows = m_total;
  layout.slots.resize(static_cast<std::size_t>(2 * m_total));
  layout.partner.resize(static_cast<std::size_t>(2 * m_total));
  layout.row_kind.resize(static_cast<std::size_t>(m_total));
  layout.slot_kind.resize(static_cast<std::size_t>(2 * m_total));
  layout.d.resize(2 * m_total);

  for (int ei = 0; ei < static_cast<int>(g.edges.size()); ++ei) {
    const auto& e = g.edges[static_cast<std::size_t>(ei)];
    const Index m = e.rows();
    const Index base = 2 * layout.edge_row_offset[static_cast<std::size_t>(ei)];
    const int low = std::min(e.i, e.j);
    const int high = std::max(e.i, e.j);
    for (Index r = 0; r < m; ++r) {
      const auto s_low = static_cast<std::size_t>(base + r);
      const auto s_high = static_cast<std::size_t>(base + m + r);
      layout.slots[s_low] = {ei, r, low, high};
      layout.slots[s_high] = {ei, r, high, low};
      layout.partner[s_low] = base + m + r;
      layout.partner[s_high] = base + r;
      const ConstraintKind kind = e.kind[static_cast<std::size_t>(r)];
      layout.row_kind[static_cast<std::size_t>(layout.edge_row_offset[static_cast<std::size_t>(ei)] + r)] = kind;
      layout.slot_kind[s_low] = kind;
      layout.slot_kind[s_high] = kind;
      layout.d[base + r] = 0.5 * e.b[r];
      layout.d[base + m + r] = 0.5 * e.b[r];
    }
  }
  return layout;
}

}  // namespace pdmm
