#pragma once

#include <stdexcept>
#include <string>

namespace termrel {

enum class ErrorKind {
  Io,          // file missing / unreadable / unwritable
  Parse,       // malformed input at a specific location
  Validation,  // well-formed input violating an invariant
  Config,      // bad option or inconsistent configuration
  Numeric,     // NaN loss, dimension mismatch, diverging optimization
  Corrupt,     // truncated or version-mismatched binary artifact
};

/// All failures surface as one exception type carrying a kind tag, so
/// callers (and the CLI exit-code mapping) can branch without string
/// matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_io(const std::string& msg) {
  throw Error(ErrorKind::Io, msg);
}
[[noreturn]] inline void throw_parse(const std::string& msg) {
  throw Error(ErrorKind::Parse, msg);
}
[[noreturn]] inline void throw_validation(const std::string& msg) {
  throw Error(ErrorKind::Validation, msg);
}
[[noreturn]] inline void throw_config(const std::string& msg) {
  throw Error(ErrorKind::Config, msg);
}
[[noreturn]] inline void throw_numeric(const std::string& msg) {
  throw Error(ErrorKind::Numeric, msg);
}
[[noreturn]] inline void throw_corrupt(const std::string& msg) {
  throw Error(ErrorKind::Corrupt, msg);
}

}  // namespace termrel
