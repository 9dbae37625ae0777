#pragma once

#include <stdexcept>
#include <string>

namespace crs {

/// Base for every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI and the HTTP layer.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& message) : Error("parse", message) {}
};

class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& message) : Error("schema", message) {}
};

class RangeError : public Error {
 public:
  explicit RangeError(const std::string& message) : Error("range", message) {}
};

class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& message) : Error("not_found", message) {}
};

class ConflictError : public Error {
 public:
  explicit ConflictError(const std::string& message) : Error("conflict", message) {}
};

class InvalidCommandError : public Error {
 public:
  explicit InvalidCommandError(const std::string& message) : Error("invalid_command", message) {}
};

}  // namespace crs
