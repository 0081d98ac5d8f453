// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace chromadist {

enum class ErrorKind {
  invalid_input,
  domain,
  configuration,
  unknown_description,
  unknown_token,
  corrupt_checkpoint,
  training_failure,
  evaluation,
  invalid_state,
  io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid input";
    case ErrorKind::domain: return "domain error";
    case ErrorKind::configuration: return "configuration error";
    case ErrorKind::unknown_description: return "unknown description";
    case ErrorKind::unknown_token: return "unknown token";
    case ErrorKind::corrupt_checkpoint: return "corrupt checkpoint";
    case ErrorKind::training_failure: return "training failure";
    case ErrorKind::evaluation: return "evaluation error";
    case ErrorKind::invalid_state: return "invalid state";
    case ErrorKind::io: return "i/o error";
  }
  return "error";
}

/// Single exception type for the library; `kind()` discriminates.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Everything except training divergence and i/o trouble is caused by the
  // caller's input.
  bool is_user_error() const noexcept {
    return kind_ != ErrorKind::training_failure && kind_ != ErrorKind::io &&
           kind_ != ErrorKind::invalid_state;
  }

 private:
  ErrorKind kind_;
};

}  // namespace chromadist
