#pragma once

#include <stdexcept>
#include <string>

namespace morphkit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (bad domain, unknown id, out-of-bounds design...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed to reach its tolerance or lost definiteness.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Octagon edge walk or closure projection left a residual above tolerance.
class ClosureError : public NumericalError {
public:
    ClosureError(const std::string& what, double residual)
        : NumericalError(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

}  // namespace morphkit
