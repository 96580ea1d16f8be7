#pragma once

#include <stdexcept>

namespace pdmm {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};
struct DisconnectedGraph : Error {
  using Error::Error;
};
struct NonSymmetricQ : Error {
  using Error::Error;
};
struct NotPositiveSemidefinite : Error {
  using Error::Error;
};
struct DuplicateEdge : Error {
  using Error::Error;
};
struct SingularSystem : Error {
  using Error::Error;
};
struct Infeasible : Error {
  using Error::Error;
};
struct Unbounded : Error {
  using Error::Error;
};
struct TooManyRows : Error {
  using Error::Error;
};
struct EmptyIntersection : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};

}  // namespace pdmm
