#pragma once

#include <stdexcept>
#include <string>

namespace ivgan {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor shapes or array sizes do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// An invalid configuration value or a config/checkpoint mismatch.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// File could not be read, written, or parsed.
class IoError : public Error {
public:
    using Error::Error;
};

/// Non-finite value or another numerical breakdown.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Boundary extraction found no foreground region.
class RegionError : public Error {
public:
    using Error::Error;
};

}  // namespace ivgan
