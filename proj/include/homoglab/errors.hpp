#pragma once

#include <stdexcept>
#include <string>

namespace homoglab {

/// Bad input: invalid ensemble, integrand or config values, or a failed precondition. Maps to exit code 1.
class ValidationError : public std::invalid_argument {
public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Numerical breakdown inside a solver (NaN energy, broken descent).
class SolverError : public std::runtime_error {
public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

/// File system failures. Maps to exit code 3.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

} // namespace homoglab
