#pragma once

#include <stdexcept>
#include <string>

namespace cptuning {

// Error categories map onto CLI exit codes: usage errors are handled by the
// argument parser, data errors exit 3, numeric errors exit 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SchemaError : Error {
  using Error::Error;
};

struct TemplateError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

struct ConstraintError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

struct BoundsError : Error {
  using Error::Error;
};

}  // namespace cptuning
