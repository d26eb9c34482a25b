#pragma once

#include <stdexcept>
#include <string>

namespace densitycp {

/// Raised when an argument violates a documented precondition.
class ParameterError : public std::invalid_argument {
public:
  explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when case files cannot be read, parsed or joined.
class IngestError : public std::runtime_error {
public:
  explicit IngestError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when an object carries no usable mass or spread (e.g. a constant
/// quantile function cannot be turned back into a density).
class DegenerateError : public std::runtime_error {
public:
  explicit DegenerateError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace densitycp
