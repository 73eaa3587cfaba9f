#pragma once

#include <stdexcept>
#include <string>

namespace hcr {

// Base of every error raised by the library. The CLI maps the concrete
// subclasses onto its exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

// Non-finite values, division by zero, diverging loss.
class NumericError : public Error {
public:
    using Error::Error;
};

// Malformed files: bad magic, truncation, inconsistent headers.
class FormatError : public Error {
public:
    using Error::Error;
};

// Dataset contract violations and unreadable inputs.
class DataError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace hcr
