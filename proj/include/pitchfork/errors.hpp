#pragma once

#include <stdexcept>
#include <string>

namespace pitchfork {

/// Failure categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
  Dimension,   // shape mismatch, too few samples
  Validation,  // malformed input or configuration
  Numerical,   // overflow, non-finite values, degenerate spectra
  Bracket,     // root bracket without a sign change
  NoFit,       // not enough usable points for a regression
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension:
    case ErrorKind::Validation:
      return 2;
    case ErrorKind::Numerical:
    case ErrorKind::Bracket:
    case ErrorKind::NoFit:
      return 3;
    case ErrorKind::Io:
      return 4;
  }
  return 1;
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace pitchfork
