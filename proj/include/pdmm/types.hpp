#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace pdmm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Sense of one constraint row. Equality rows exchange their dual values
/// unconditionally; inequality rows carry a non-negativity constraint on the
/// dual and are thresholded during the exchange.
enum class ConstraintKind : std::uint8_t { Equality, Inequality };

}  // namespace pdmm
