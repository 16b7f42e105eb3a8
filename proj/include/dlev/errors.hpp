#pragma once

#include <stdexcept>
#include <string>

namespace dlev {

// Base for every error raised by the toolkit. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Bad command line or configuration (exit code 1).
class UsageError : public Error {
  public:
    using Error::Error;
};

// Input data violates a documented contract (exit code 2).
class ValidationError : public Error {
  public:
    using Error::Error;
};

// Non-finite loss or a numerically undefined quantity (exit code 3).
class NumericalError : public Error {
  public:
    using Error::Error;
};

} // namespace dlev
