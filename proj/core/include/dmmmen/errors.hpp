#pragma once

#include <stdexcept>
#include <string>

namespace dmmmen {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : Error {
  using Error::Error;
};
struct DimensionError : Error {
  using Error::Error;
};
struct ValueError : Error {
  using Error::Error;
};
struct NumericalError : Error {
  using Error::Error;
};
struct LinearAlgebraError : Error {
  using Error::Error;
};
struct ConvergenceError : Error {
  using Error::Error;
};
struct ProtocolError : Error {
  using Error::Error;
};
struct ArityError : Error {
  using Error::Error;
};
struct SchemaError : Error {
  using Error::Error;
};
struct InvalidConfig : Error {
  using Error::Error;
};
struct NotImplementedError : Error {
  using Error::Error;
};

}  // namespace dmmmen
