#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dbne {

// Bad command-line usage or invalid parameter combinations. CLI exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (files, labels, indices). CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure (non-finite objective, divergence). CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A cascade whose likelihood is zero for every rate assignment: some infected
// non-seed node has no strictly earlier infected node.
class ImpossibleCascadeError : public DataError {
 public:
  explicit ImpossibleCascadeError(std::size_t cascade_index)
      : DataError("impossible cascade at index " + std::to_string(cascade_index) +
                  " (an infected node has no possible infector)"),
        cascade_index(cascade_index) {}

  std::size_t cascade_index;
};

}  // namespace dbne
