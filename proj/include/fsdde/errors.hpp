#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fsdde {

/// Base class for every error thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed expression source. `offset` is the byte position of the failure.
struct ParseError : Error {
    ParseError(const std::string& msg, std::size_t at)
        : Error(msg + " (at byte " + std::to_string(at) + ")"), offset(at) {}
    std::size_t offset;
};

/// Expression evaluation failure (division by zero).
struct EvalError : Error {
    using Error::Error;
};

/// Invalid configuration or violated model contract.
struct ConfigError : Error {
    using Error::Error;
};

/// Numerical failure: non-PD covariance, grid mismatch, infeasible plan.
struct NumericError : Error {
    using Error::Error;
};

} // namespace fsdde
