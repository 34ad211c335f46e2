#pragma once

#include <stdexcept>
#include <string>

namespace psv {

/// Bad input: malformed files, invalid arguments, violated preconditions.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A checkpoint or dataset was used with the wrong task.
class TaskMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values showed up during training or evaluation.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace psv
