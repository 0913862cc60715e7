#pragma once

#include <stdexcept>
#include <string>

namespace kshrl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: malformed data, inconsistent configuration, out-of-range
/// indices. The CLI maps these to exit code 2.
class InputError : public Error {
public:
    using Error::Error;
};

/// Numerical failure: singular systems, divergence. CLI exit code 3.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace kshrl
