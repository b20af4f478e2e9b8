#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tracklabel {

enum class ErrorKind {
  InvalidParameter,
  InvalidInput,
  FullyMasked,
  ExternalDetector,
  InternalConsistency,
  Io,
  Usage,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Base exception for everything the library reports. The kind is stable and
/// is what the CLI prints in its machine-readable error line.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace tracklabel
