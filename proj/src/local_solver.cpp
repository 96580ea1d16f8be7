#include "pdmm/local_solver.hpp"

#include <string>

namespace pdmm {

NodeSystem::NodeSystem(const ProblemGraph& g, const DirectedEdgeLayout& layout,
                       int node, double c) {
  const Node& n = g.nodes[static_cast<std::size_t>(node)];
  dim_ = n.dim;

  if (const auto* quad = std::get_if<QuadraticObjective>(&n.objective)) {
    H_ = quad->Q;
    rhs_static_ = -quad->q;
  } else {
    H_ = Matrix::Zero(dim_, dim_);
    rhs_static_ = -std::get<LinearObjective>(n.objective).g;
  }

  for (int ei = 0; ei < static_cast<int>(g.edges.size()); ++ei) {
    const auto& e = g.edges[static_cast<std::size_t>(ei)];
    if (e.i != node && e.j != node) continue;
    const Matrix& A = (e.i == node) ? e.A_ij : e.A_ji;
    H_.noalias() += c * A.transpose() * A;
    rhs_static_.noalias() += 0.5 * c * A.transpose() * e.b;
    incident_.push_back({A.transpose(), layout.slot_base(ei, node)});
  }

  llt_.compute(H_);
  if (llt_.info() != Eigen::Success) {
    throw SingularSystem("node " + std::to_string(node) +
                         ": update system is not positive definite");
  }
}

Vector NodeSystem::x_update(const Vector& z) const {
  Vector rhs = rhs_static_;
  for (const auto& blk : incident_) {
    rhs.noalias() -= blk.A_transposed * z.segment(blk.slot_begin, blk.A_transposed.cols());
  }
  return llt_.solve(rhs);
}

std::vector<NodeSystem> build_node_systems(const ProblemGraph& g,
                                           const DirectedEdgeLayout& layout,
                                           double c) {
  std::vector<NodeSystem> systems;
  systems.reserve(g.nodes.size());
  for (int i = 0; i < g.num_nodes(); ++i) {
    systems.emplace_back(g, layout, i, c);
  }
  return systems;
}

}  // namespace pdmm
