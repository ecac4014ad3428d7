#pragma once

#include <stdexcept>
#include <string>

namespace mcfisher {

/// Distinguishes bad input (exit code 2 in the CLI) from numerical failures
/// on otherwise valid input (exit code 1).
enum class ErrorKind { validation, numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error validation_error(const std::string& what) {
  return Error(ErrorKind::validation, what);
}

inline Error numeric_error(const std::string& what) {
  return Error(ErrorKind::numeric, what);
}

}  // namespace mcfisher
