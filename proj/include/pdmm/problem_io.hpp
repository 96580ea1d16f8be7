#pragma once

#include <iosfwd>
#include <string>

#include "pdmm/problem.hpp"

namespace pdmm {

/// Parses the problem description format (see docs/problem_format.md) and
/// validates the result through build_problem. Unknown keys, missing fields
/// and shape mismatches raise ParseError with a line number.
ProblemGraph parse_problem(const std::string& text);
ProblemGraph load_problem(const std::string& path);

/// Canonical text form; doubles are printed with enough digits to round-trip
/// exactly, so parse(serialize(g)) reproduces g bit for bit.
std::string serialize_problem(const ProblemGraph& g);
void save_problem(const ProblemGraph& g, const std::string& path);

/// Structural and numerical equality (exact double comparison).
bool graphs_equal(const ProblemGraph& a, const ProblemGraph& b);

}  // namespace pdmm
