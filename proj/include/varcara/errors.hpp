#pragma once

#include <stdexcept>

namespace varcara {

// Malformed or inconsistent input data (files, dimensions, series).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public DataError {
 public:
  using DataError::DataError;
};

// A numerical precondition failed (factorization, solver, optimizer).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotPositiveDefinite : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Invalid request by the caller: bad arguments, refused workloads.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace varcara
