#pragma once

#include <stdexcept>
#include <string>

namespace gcr {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
  using Error::Error;
};

struct RankDeficient : Error {
  using Error::Error;
};

struct ConvergenceError : Error {
  using Error::Error;
};

// Tangent-vector precondition violated (caller bug, see rsgd.hpp).
struct TangencyError : Error {
  using Error::Error;
};

// Feature vector too close to zero to normalize or to take an angle with.
struct DegenerateFeature : Error {
  using Error::Error;
};

struct EmptyClass : Error {
  using Error::Error;
};

struct InvalidSpec : Error {
  using Error::Error;
};

struct CorruptContainer : Error {
  using Error::Error;
};

struct VersionMismatch : Error {
  using Error::Error;
};

}  // namespace gcr
