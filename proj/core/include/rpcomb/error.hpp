#pragma once

#include <stdexcept>
#include <string>

namespace rpcomb {

/// Failure category. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kConfig,     // invalid parameter or configuration (exit 2)
  kData,       // unreadable, malformed or inconsistent data (exit 3)
  kNumerical,  // non-finite values, failed convergence (exit 4)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorKind::kConfig, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::kNumerical, what) {}
};

}  // namespace rpcomb
