#pragma once

#include <stdexcept>
#include <string>

namespace percolab {

// Failure categories. The CLI maps these onto process exit codes: bad input
// or geometry -> 2, resource exhaustion -> 3, broken internal assumptions -> 4.
enum class ErrorKind {
  invalid_parameter,
  invalid_query,
  invalid_geometry,
  invalid_data,
  unsupported_dimension,
  resource_limit,
  contract_violation,
  internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

inline void require_that(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) fail(kind, msg);
}

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_parameter:
    case ErrorKind::invalid_query:
    case ErrorKind::invalid_geometry:
    case ErrorKind::invalid_data:
    case ErrorKind::unsupported_dimension:
      return 2;
    case ErrorKind::resource_limit:
      return 3;
    case ErrorKind::contract_violation:
    case ErrorKind::internal:
      return 4;
  }
  return 4;
}

}  // namespace percolab
