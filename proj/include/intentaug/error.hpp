#pragma once

#include <stdexcept>
#include <string>

namespace intentaug {

// Base for every error raised by the library. The CLI maps these to exit
// code 1 (user error); anything else escaping is an internal error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent corpus / patch input.
class DataError : public Error {
 public:
  using Error::Error;
};

// Tokenized sequence longer than the configured maximum.
class OverflowError : public Error {
 public:
  using Error::Error;
};

// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss during optimization.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace intentaug
