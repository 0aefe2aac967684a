#pragma once

#include <stdexcept>
#include <string>

namespace dssddi {

/// Base of every error raised by the library. Callers that only need to
/// report a failure can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IngestionError : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

/// Raised when a loss or gradient becomes non-finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Query drugs that cannot be joined in the interaction graph.
class QueryError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

/// Wraps a failure from one pipeline stage with the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause)
      : Error(stage + ": " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace dssddi
