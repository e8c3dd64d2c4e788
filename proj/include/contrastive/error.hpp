#pragma once

#include <stdexcept>
#include <string>

namespace contrastive {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// An argument lies outside the operation's domain (negative margin, empty
/// sequence, zero-norm vector, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A NaN or infinity showed up where finite values are required.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent configuration / input file.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace contrastive
