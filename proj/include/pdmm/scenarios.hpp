#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "pdmm/problem.hpp"

namespace pdmm {

/// Three quadratic nodes on a triangle with mixed node and edge constraints:
/// x0 >= 0 and x1 = 1 on the nodes, x0 = x1, x1 >= x2 and x0 + x2 <= 2 on the
/// edges. Observations a_i are standard normal draws from the seed.
ProblemGraph gen_toy(std::uint64_t seed);

/// Closed-form optimum of the toy problem: x0 = x1 = 1 and x2 clipped at 1.
std::vector<Vector> toy_optimum(const ProblemGraph& toy);

struct GeometricScenario {
  std::vector<Eigen::Vector2d> positions;
  double radius = 0.0;
  ProblemGraph graph;
};

/// Random geometric graph on the unit square with communication radius
/// sqrt(2 log(n) / n); positions are redrawn until the graph is connected
/// (at most 100 attempts). Nodes carry 0.5 (x_i - a_i)^2 objectives and each
/// edge one ordering row x_i - x_j <= 0 for i < j.
GeometricScenario gen_geometric(int n, std::uint64_t seed);

struct LocalisationScenario {
  std::vector<Eigen::Vector2d> sensors;
  Eigen::Vector2d target = Eigen::Vector2d::Zero();
  Matrix halfplane_A;  // one row per half-plane, outward normals
  Vector halfplane_b;
  /// Consensus program for the deepest interior point: node variables
  /// (x, y, r), every node carries all half-plane rows, edges tie both the
  /// position and the radius together.
  ProblemGraph chebyshev;
  /// Bounding-rectangle programs, objective directions +e1, -e1, +e2, -e2.
  std::array<ProblemGraph, 4> rectangles;
  std::array<Eigen::Vector2d, 4> rect_dirs;
};

/// Sensors in the unit square aim a two-half-plane beam at a hidden target;
/// the beam direction carries Gaussian angular noise. Network edges follow
/// the geometric radius rule over the sensor positions. Throws
/// EmptyIntersection when the noisy beams have no common point.
LocalisationScenario gen_localisation(int num_sensors, std::uint64_t seed,
                                      double angle_noise_std = 0.05,
                                      double cone_half_angle = 0.15);

/// The centred inscribed-ball program of a polytope as a dense LP over
/// (centre, radius): maximize r subject to a'x + r ||a|| <= b per row.
struct ChebyshevLp {
  Vector g;  // (0, .., 0, -1)
  Matrix A;  // rows x (dim + 1)
  Vector b;
};
ChebyshevLp make_chebyshev_lp(const Matrix& A, const Vector& b);

}  // namespace pdmm
