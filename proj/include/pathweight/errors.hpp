#pragma once

#include <stdexcept>
#include <string>

namespace pathweight {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Rejected input: malformed configuration, dimension mismatch, non-SPD
// covariance, out-of-range parameter.
class InputError : public Error {
public:
    using Error::Error;
};

// The computation itself failed: trajectory blow-up, lost positivity in a
// PDE solve, incomplete stopped batch.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace pathweight
