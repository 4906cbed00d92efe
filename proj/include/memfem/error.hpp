#pragma once

#include <stdexcept>
#include <string>

namespace memfem {

/// Base of every domain error raised by the library. The CLI maps these to
/// exit code 1; anything else escaping is a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SizeLimitError : public Error {
 public:
  using Error::Error;
};

class TopologyError : public Error {
 public:
  using Error::Error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

/// Raised when a constraint block is (numerically) rank deficient.
/// `row` is the index of the first constraint found dependent on earlier ones.
class RankDeficiencyError : public SolverError {
 public:
  RankDeficiencyError(const std::string& what, int row) : SolverError(what), row_(row) {}
  int row() const noexcept { return row_; }

 private:
  int row_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace memfem
