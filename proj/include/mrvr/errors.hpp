#pragma once

#include <stdexcept>
#include <string>

namespace mrvr {

// Linear algebra broke down (non-PD factorization, degenerate degrees of
// freedom, exhausted jitter escalation). Maps to CLI exit code 4.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// The optimisation cannot proceed (e.g. no basis function is worth adding).
class FitError : public NumericalError {
public:
  explicit FitError(const std::string& what) : NumericalError(what) {}
};

// Malformed input files, schema mismatches, unreadable paths. Exit code 3.
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mrvr
