#pragma once

#include <stdexcept>
#include <string>

namespace qwalk {

enum class ErrorKind {
  Parse,        // malformed input text
  Validation,   // parameter out of its documented domain
  Size,         // memory guard exceeded
  Unsupported,  // operation not defined for this graph / channel / mode
  Contract,     // numerical or structural invariant violated at run time
  Integration,  // ODE integrator failed to converge
  Config,       // experiment configuration rejected
  Resource,     // runtime cap (basis size, sweep size) exceeded
  Degenerate,   // well-formed but meaningless request
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Size: return "size error";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::Contract: return "contract violation";
    case ErrorKind::Integration: return "integration error";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Resource: return "resource cap";
    case ErrorKind::Degenerate: return "degenerate configuration";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace qwalk
