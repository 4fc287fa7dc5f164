#pragma once

#include <stdexcept>
#include <string>

namespace bdecon {

/// Raised when a precondition on an argument (size, range, sign) is violated.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MalformedFile : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// C_yy (plus ridge) could not be factored as symmetric positive definite.
class SingularMoments : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The MAP iteration produced a non-finite iterate or objective.
class Divergence : public std::runtime_error {
 public:
  Divergence(int iteration, const std::string& what)
      : std::runtime_error(what), iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

/// Malformed or incomplete experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}
}  // namespace detail

}  // namespace bdecon
