#pragma once

#include <stdexcept>
#include <string>

namespace latc {

/// Base class for every error raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Operand shapes are inconsistent (never broadcast silently).
struct ShapeError : Error {
    using Error::Error;
};

/// An argument or configuration value lies outside its domain.
struct DomainError : Error {
    using Error::Error;
};

/// A numerical kernel failed (SVD did not converge, SPD factorization broke down).
struct NumericalError : Error {
    using Error::Error;
};

/// Input data could not be read or parsed.
struct DataError : Error {
    using Error::Error;
};

}  // namespace latc
