#pragma once

#include <stdexcept>
#include <string>

namespace aspd {

enum class ErrorKind {
  kContract,
  kDimension,
  kIndex,
  kTape,
  kConfig,
  kIo,
  kFormat,
  kNumeric,
};

// Base of every error raised by the library. The kind decides the CLI exit
// code (see exit_code()).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(ErrorKind::kContract, what) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(ErrorKind::kDimension, what) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& what) : Error(ErrorKind::kIndex, what) {}
};

class TapeError : public Error {
 public:
  explicit TapeError(const std::string& what) : Error(ErrorKind::kTape, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

// Malformed files: bad checkpoint magic, truncation, XYZ parse failures.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorKind::kFormat, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::kNumeric, what) {}
};

// 0 success, 2 config/contract, 3 io/format, 4 numeric.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo:
    case ErrorKind::kFormat:
      return 3;
    case ErrorKind::kNumeric:
      return 4;
    default:
      return 2;
  }
}

}  // namespace aspd
