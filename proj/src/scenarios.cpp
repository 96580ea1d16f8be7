#include "pdmm/scenarios.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "pdmm/oracle.hpp"
#include "pdmm/rng.hpp"

namespace pdmm {

namespace {

Node quadratic_tracking_node(double a) {
  Matrix Q(1, 1);
  Q << 1.0;
  Vector q(1);
  q << -a;  // 0.5 (x - a)^2 up to a constant
  return Node{1, QuadraticObjective{Q, q}};
}

Matrix scalar_matrix(double v) {
  Matrix m(1, 1);
  m << v;
  return m;
}

Vector scalar_vector(double v) {
  Vector b(1);
  b << v;
  return b;
}

EdgeConstraintBlock scalar_edge(int i, int j, double a_i, double a_j, double b,
                                ConstraintKind kind) {
  return EdgeConstraintBlock{i, j, scalar_matrix(a_i), scalar_matrix(a_j),
                             scalar_vector(b), {kind}, false};
}

std::vector<std::pair<int, int>> radius_edges(const std::vector<Eigen::Vector2d>& pts,
                                              double radius) {
  std::vector<std::pair<int, int>> edges;
  const int n = static_cast<int>(pts.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if ((pts[static_cast<std::size_t>(i)] - pts[static_cast<std::size_t>(j)]).norm() <= radius) {
        edges.emplace_back(i, j);
      }
    }
  }
  return edges;
}

std::vector<Eigen::Vector2d> connected_points(int n, double radius, Rng& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<Eigen::Vector2d> pts;
    pts.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      pts.emplace_back(rng.uniform01(), rng.uniform01());
    }
    if (is_connected(n, radius_edges(pts, radius))) return pts;
  }
  throw Error("no connected placement found in 100 attempts");
}

/// Consensus LP over the geometric edges: every node holds `dim` variables
/// with objective g, all half-plane rows as node constraints, and per-edge
/// equality ties.
ProblemGraph consensus_lp_graph(const std::vector<std::pair<int, int>>& edges,
                                int num_nodes, const Vector& g, const Matrix& rows_A,
                                const Vector& rows_b) {
  ProblemGraph graph;
  const Index dim = g.size();
  for (int i = 0; i < num_nodes; ++i) {
    graph.nodes.push_back(Node{dim, LinearObjective{g}});
  }
  for (const auto& [i, j] : edges) {
    EdgeConstraintBlock e;
    e.i = i;
    e.j = j;
    e.A_ij = Matrix::Identity(dim, dim);
    e.A_ji = -Matrix::Identity(dim, dim);
    e.b = Vector::Zero(dim);
    e.kind.assign(static_cast<std::size_t>(dim), ConstraintKind::Equality);
    graph.edges.push_back(std::move(e));
  }
  for (int i = 0; i < num_nodes; ++i) {
    NodeConstraintBlock c;
    c.i = i;
    c.A = rows_A;
    c.b = rows_b;
    c.kind.assign(static_cast<std::size_t>(rows_A.rows()), ConstraintKind::Inequality);
    graph.node_constraints.push_back(std::move(c));
  }
  return build_problem(std::move(graph));
}

}  // namespace

ProblemGraph gen_toy(std::uint64_t seed) {
  Rng rng(seed);
  ProblemGraph g;
  for (int i = 0; i < 3; ++i) {
    g.nodes.push_back(quadratic_tracking_node(rng.normal()));
  }
  // x0 = x1, x1 >= x2 (as -x1 + x2 <= 0), x0 + x2 <= 2.
  g.edges.push_back(scalar_edge(0, 1, 1.0, -1.0, 0.0, ConstraintKind::Equality));
  g.edges.push_back(scalar_edge(1, 2, -1.0, 1.0, 0.0, ConstraintKind::Inequality));
  g.edges.push_back(scalar_edge(0, 2, 1.0, 1.0, 2.0, ConstraintKind::Inequality));
  // x0 >= 0 (as -x0 <= 0) and x1 = 1.
  g.node_constraints.push_back(
      NodeConstraintBlock{0, scalar_matrix(-1.0), scalar_vector(0.0),
                          {ConstraintKind::Inequality}});
  g.node_constraints.push_back(
      NodeConstraintBlock{1, scalar_matrix(1.0), scalar_vector(1.0),
                          {ConstraintKind::Equality}});
  return build_problem(std::move(g));
}

std::vector<Vector> toy_optimum(const ProblemGraph& toy) {
  // x0 = x1 forces both to the pinned value 1; x2 tracks a2 under x2 <= 1
  // (both remaining inequalities reduce to that bound once x0 = 1).
  const auto& obj = std::get<QuadraticObjective>(toy.nodes[2].objective);
  const double a2 = -obj.q[0];
  return {scalar_vector(1.0), scalar_vector(1.0),
          scalar_vector(std::min(a2, 1.0))};
}

GeometricScenario gen_geometric(int n, std::uint64_t seed) {
  if (n < 2) throw Error("geometric scenario needs at least 2 nodes");
  GeometricScenario scenario;
  scenario.radius = std::sqrt(2.0 * std::log(static_cast<double>(n)) / n);

  Rng rng(seed);
  scenario.positions = connected_points(n, scenario.radius, rng);

  ProblemGraph g;
  for (int i = 0; i < n; ++i) {
    g.nodes.push_back(quadratic_tracking_node(rng.normal()));
  }
  for (const auto& [i, j] : radius_edges(scenario.positions, scenario.radius)) {
    // Ordering constraint x_i <= x_j for i < j.
    g.edges.push_back(scalar_edge(i, j, 1.0, -1.0, 0.0, ConstraintKind::Inequality));
  }
  scenario.graph = build_problem(std::move(g));
  return scenario;
}

ChebyshevLp make_chebyshev_lp(const Matrix& A, const Vector& b) {
  const Index dim = A.cols();
  ChebyshevLp lp;
  lp.g = Vector::Zero(dim + 1);
  lp.g[dim] = -1.0;
  lp.A.resize(A.rows(), dim + 1);
  lp.A.leftCols(dim) = A;
  for (Index r = 0; r < A.rows(); ++r) {
    lp.A(r, dim) = A.row(r).norm();
  }
  lp.b = b;
  return lp;
}

LocalisationScenario gen_localisation(int num_sensors, std::uint64_t seed,
                                      double angle_noise_std,
                                      double cone_half_angle) {
  if (num_sensors < 2) throw Error("localisation needs at least 2 sensors");

  Rng rng(seed);
  LocalisationScenario scenario;
  scenario.target = Eigen::Vector2d(rng.uniform01(), rng.uniform01());

  const double radius =
      std::sqrt(2.0 * std::log(static_cast<double>(num_sensors)) / num_sensors);
  scenario.sensors = connected_points(num_sensors, radius, rng);

  scenario.halfplane_A.resize(2 * num_sensors, 2);
  scenario.halfplane_b.resize(2 * num_sensors);
  for (int s = 0; s < num_sensors; ++s) {
    const Eigen::Vector2d& p = scenario.sensors[static_cast<std::size_t>(s)];
    const Eigen::Vector2d to_target = scenario.target - p;
    const double theta = std::atan2(to_target.y(), to_target.x()) +
                         angle_noise_std * rng.normal();
    // The beam is the wedge between the rays at theta +- half angle; each ray
    // contributes the half-plane on the beam side of it.
    const double left = theta + cone_half_angle;
    const double right = theta - cone_half_angle;
    const Eigen::Vector2d n_left(-std::sin(left), std::cos(left));
    const Eigen::Vector2d n_right(std::sin(right), -std::cos(right));
    scenario.halfplane_A.row(2 * s) = n_left.transpose();
    scenario.halfplane_b[2 * s] = n_left.dot(p);
    scenario.halfplane_A.row(2 * s + 1) = n_right.transpose();
    scenario.halfplane_b[2 * s + 1] = n_right.dot(p);
  }

  // Emptiness pre-check: the deepest point's LP is infeasible or has a
  // negative radius exactly when the beams share no point.
  const ChebyshevLp lp = make_chebyshev_lp(scenario.halfplane_A, scenario.halfplane_b);
  try {
    const Vector centre = solve_lp_vertex(DenseLp{lp.g, lp.A, lp.b});
    if (centre[2] < 0.0) {
      throw EmptyIntersection("beam intersection is empty");
    }
  } catch (const Infeasible&) {
    throw EmptyIntersection("beam intersection is empty");
  }

  const auto edges = radius_edges(scenario.sensors, radius);
  Matrix cheb_rows(scenario.halfplane_A.rows(), 3);
  cheb_rows.leftCols(2) = scenario.halfplane_A;
  for (Index r = 0; r < scenario.halfplane_A.rows(); ++r) {
    cheb_rows(r, 2) = scenario.halfplane_A.row(r).norm();
  }
  Vector g_cheb = Vector::Zero(3);
  g_cheb[2] = -1.0;  // maximise the shared radius
  scenario.chebyshev = consensus_lp_graph(edges, num_sensors, g_cheb, cheb_rows,
                                          scenario.halfplane_b);

  scenario.rect_dirs = {Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(-1.0, 0.0),
                        Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(0.0, -1.0)};
  for (std::size_t k = 0; k < scenario.rect_dirs.size(); ++k) {
    Vector g_rect(2);
    g_rect << scenario.rect_dirs[k].x(), scenario.rect_dirs[k].y();
    scenario.rectangles[k] = consensus_lp_graph(edges, num_sensors, g_rect,
                                                scenario.halfplane_A,
                                                scenario.halfplane_b);
  }
  return scenario;
}

}  // namespace pdmm
