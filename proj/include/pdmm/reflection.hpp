#pragma once

#include <algorithm>
#include <utility>

#include "pdmm/problem.hpp"

namespace pdmm {

/// Resolvent of the normal-cone operator of the exchange set, applied to one
/// partnered slot pair (a, b). Both outputs equal the pair mean; inequality
/// rows additionally clamp the mean at zero.
template <typename Scalar>
std::pair<Scalar, Scalar> project_pair(Scalar a, Scalar b, ConstraintKind kind) {
  const Scalar mean = (a + b) / Scalar(2);
  if (kind == ConstraintKind::Inequality) {
    const Scalar clamped = std::max(mean, Scalar(0));
    return {clamped, clamped};
  }
  return {mean, mean};
}

/// Reflection 2*project - identity in branch-stable form: partner values swap
/// when their sum is positive, otherwise both negate. Equality rows reduce to
/// the pure swap. The tie a + b == 0 takes the negate branch; both branches
/// agree there in exact arithmetic.
template <typename Scalar>
std::pair<Scalar, Scalar> reflect_pair(Scalar a, Scalar b, ConstraintKind kind) {
  if (kind == ConstraintKind::Equality || a + b > Scalar(0)) return {b, a};
  return {-a, -b};
}

namespace detail {

template <typename Op>
Vector apply_pairwise(const Vector& y, const DirectedEdgeLayout& layout, Op op) {
  if (y.size() != layout.num_slots()) {
    throw DimensionMismatch("vector length does not match slot count");
  }
  Vector out(y.size());
  for (Index s = 0; s < y.size(); ++s) {
    const Index p = layout.partner[static_cast<std::size_t>(s)];
    if (s > p) continue;  // each pair handled once
    const auto [u, v] = op(y[s], y[p], layout.slot_kind[static_cast<std::size_t>(s)]);
    out[s] = u;
    out[p] = v;
  }
  return out;
}

}  // namespace detail

/// Component-wise reflection over all partnered slots.
inline Vector reflect_all(const Vector& y, const DirectedEdgeLayout& layout) {
  return detail::apply_pairwise(y, layout, [](double a, double b, ConstraintKind k) {
    return reflect_pair(a, b, k);
  });
}

/// Component-wise projection over all partnered slots.
inline Vector project_all(const Vector& y, const DirectedEdgeLayout& layout) {
  return detail::apply_pairwise(y, layout, [](double a, double b, ConstraintKind k) {
    return project_pair(a, b, k);
  });
}

}  // namespace pdmm
