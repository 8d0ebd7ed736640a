#pragma once

#include <stdexcept>
#include <string>

namespace ptkit {

/// Bad configuration value or inconsistent settings. CLI maps this to exit 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Missing or unreadable file. CLI maps this to exit 2.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input record; message names the offending line/field.
class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

/// A runtime self-check failed; message names the invariant. CLI maps this
/// to exit 3.
class InvariantError : public std::runtime_error {
 public:
  explicit InvariantError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ptkit
