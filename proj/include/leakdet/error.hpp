#pragma once

#include <stdexcept>
#include <string>

namespace leakdet {

enum class ErrorKind {
  format,
  validation,
  bounds,
  config,
  usage,
  io,
};

const char* to_string(ErrorKind kind) noexcept;

// All library failures surface as this exception; kind() drives the CLI's
// machine-parsable error line.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace leakdet
