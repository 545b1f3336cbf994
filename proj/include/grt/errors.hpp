#pragma once

#include <stdexcept>
#include <string>

namespace grt {

// Malformed or inconsistent input files (scan files, checkpoints, manifests).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// A verification step (gradient check, acceptance property) did not hold.
class CheckError : public std::runtime_error {
 public:
  explicit CheckError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite value produced by a numeric primitive.
class NumericsError : public std::runtime_error {
 public:
  explicit NumericsError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace grt
