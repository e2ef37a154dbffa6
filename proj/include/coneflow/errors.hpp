#pragma once

#include <stdexcept>
#include <string>

namespace coneflow {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A precondition on user-supplied parameters or data was violated.
class ValidationError : public Error {
public:
    using Error::Error;
};

// A numerical procedure failed to converge or produced non-finite values.
class SolverError : public Error {
public:
    SolverError(const std::string& what, double last_residual = -1.0)
        : Error(what), last_residual_(last_residual) {}

    double last_residual() const noexcept { return last_residual_; }

private:
    double last_residual_;
};

// Inputs that live on different grids were combined.
class GridMismatch : public Error {
public:
    using Error::Error;
};

#define CONEFLOW_REQUIRE(cond, msg)                                    \
    do {                                                               \
        if (!(cond)) throw ::coneflow::ValidationError(msg);          \
    } while (false)

} // namespace coneflow
