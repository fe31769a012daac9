#pragma once

#include <stdexcept>
#include <string>

namespace hkrm {

// Base of every error thrown by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible matrix/tensor dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Input value outside an operation's mathematical domain (empty
// distribution, class id out of range, degenerate grouping, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered in a loss or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed text input. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Binary/JSON container problems: bad magic, version mismatch, truncation.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Run-config validation failure; `key()` is the dotted key at fault.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : Error(key + ": " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace hkrm
