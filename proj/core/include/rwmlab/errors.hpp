#pragma once

#include <stdexcept>
#include <string>

namespace rwmlab {

// Raised when a caller violates a documented precondition (bad dimensions,
// non-SPD matrix, too few samples, malformed configuration, ...).
class UsageError : public std::invalid_argument {
 public:
  explicit UsageError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace rwmlab
