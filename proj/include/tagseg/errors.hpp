#pragma once

#include <stdexcept>
#include <string>

namespace tagseg {

/// Input or dataset problem: missing files, malformed rasters, inconsistent labels.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical breakdown: non-finite energies, mis-scaled inputs.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tagseg
