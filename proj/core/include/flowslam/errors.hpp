#pragma once

#include <stdexcept>
#include <string>

namespace flowslam {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid configuration or arguments: bad parameter values, dimension
/// mismatches, violated preconditions. CLI maps this to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// File-format or filesystem failure. Messages name the file and, where
/// applicable, the offending line or byte offset. CLI exit code 3.
class IoError : public Error {
public:
    using Error::Error;
};

/// Numerical failure with no usable result (estimator starved of data,
/// disconnected graph, non-finite residual). CLI exit code 4.
class EstimationError : public Error {
public:
    using Error::Error;
};

}  // namespace flowslam
