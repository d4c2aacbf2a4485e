#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace souschef {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A file or record that cannot be parsed at all.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Caller-supplied data breaks a documented rule. Carries every violation.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations);

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Statistical routine called outside its domain (constant series, ties, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace souschef
