#pragma once

#include <stdexcept>
#include <string>

namespace vitray {

/// Base class for every error the library throws.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Tensor or matrix dimension mismatch; the message names both shapes.
struct ShapeError : Error {
    using Error::Error;
};

/// A caller violated an operation's precondition.
struct ContractError : Error {
    using Error::Error;
};

/// A NaN or Inf was supplied to, or produced by, a numeric op.
struct NumericError : Error {
    using Error::Error;
};

/// Filesystem or stream failure.
struct IoError : Error {
    using Error::Error;
};

/// File contents could not be parsed (bad magic, truncation, bad schema).
struct FormatError : Error {
    using Error::Error;
};

/// Requested metric is undefined for the given inputs.
struct UndefinedMetricError : Error {
    using Error::Error;
};

} // namespace vitray
