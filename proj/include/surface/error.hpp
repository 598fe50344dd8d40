#pragma once

#include <stdexcept>
#include <string>

namespace surface {

/// Raised for malformed inputs, failed invariants and unsatisfiable requests
/// on data (manifests, images, checkpoints, configs).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised by the tensor library when operand shapes do not agree.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace surface
