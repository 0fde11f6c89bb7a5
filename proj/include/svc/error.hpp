#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace svc {

// Base of every error the library raises on bad data, config or numerics.
// Precondition violations by callers surface as std::invalid_argument.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent or unreadable run configuration. CLI exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unreadable or malformed input data. CLI exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

// A NaN or infinite loss was produced during training. CLI exit code 3.
class DivergenceError : public Error {
 public:
  DivergenceError(std::int64_t step, const std::string& what);
  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

enum class WavErrorKind {
  kMissingFile,
  kMalformedHeader,
  kUnsupportedEncoding,
  kUnwritable,
  kOutOfRange,
};

class WavError : public DataError {
 public:
  WavError(WavErrorKind kind, const std::string& what)
      : DataError(what), kind_(kind) {}
  WavErrorKind kind() const { return kind_; }

 private:
  WavErrorKind kind_;
};

}  // namespace svc
