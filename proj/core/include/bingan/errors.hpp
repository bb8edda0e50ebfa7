#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bingan {

// Process exit codes shared by the CLI and anything that maps errors to them.
enum class ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kData = 3,
  kNumerical = 4,
  kAcceptance = 5,
};

/// Base of every error the library raises. `error_class()` is the stable,
/// machine-parsable prefix printed by the CLI.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* error_class() const noexcept = 0;
  virtual ExitCode exit_code() const noexcept = 0;
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* error_class() const noexcept override { return "config_error"; }
  ExitCode exit_code() const noexcept override { return ExitCode::kConfig; }
};

/// Incompatible tensor or layer shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
  const char* error_class() const noexcept override { return "dimension_error"; }
  ExitCode exit_code() const noexcept override { return ExitCode::kData; }
};

/// A precondition on arguments was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
  const char* error_class() const noexcept override { return "contract_error"; }
  ExitCode exit_code() const noexcept override { return ExitCode::kConfig; }
};

class DataError : public Error {
 public:
  using Error::Error;
  const char* error_class() const noexcept override { return "data_error"; }
  ExitCode exit_code() const noexcept override { return ExitCode::kData; }
};

/// Malformed container file. Carries the byte offset where decoding failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  const char* error_class() const noexcept override { return "format_error"; }
  ExitCode exit_code() const noexcept override { return ExitCode::kData; }
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class NumericalError : public Error {
 public:
  using Error::Error;
  const char* error_class() const noexcept override { return "numerical_error"; }
  ExitCode exit_code() const noexcept override { return ExitCode::kNumerical; }
};

}  // namespace bingan
