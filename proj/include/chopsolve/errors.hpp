#pragma once

#include <stdexcept>
#include <string>

namespace chopsolve {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand lengths or operator shapes do not conform.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// gamma_n requested with n*u >= 1.
class BoundUndefinedError : public Error {
public:
    using Error::Error;
};

/// Spectral interval [sigma_L, sigma_U] unusable (non-positive, inverted).
class InvalidBoundError : public Error {
public:
    using Error::Error;
};

/// A Chebyshev coefficient denominator became non-positive.
class CoefficientError : public Error {
public:
    using Error::Error;
};

/// The Chebyshev iteration-count formula produced a non-finite value.
class CountOverflowError : public Error {
public:
    using Error::Error;
};

class SingularSystemError : public Error {
public:
    using Error::Error;
};

/// Problem geometry is inconsistent (e.g. blur bandwidth >= grid size).
class GeometryError : public Error {
public:
    using Error::Error;
};

class InvalidScaleError : public Error {
public:
    using Error::Error;
};

/// Bad user configuration: unknown preset, malformed config file, bad value.
class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace chopsolve
