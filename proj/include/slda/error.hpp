#pragma once

#include <stdexcept>
#include <string>

namespace slda {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand extents or channel counts do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Statistics do not cover the displacement range a template needs.
class ExtentError : public Error {
public:
    using Error::Error;
};

/// Non-finite data, indefinite operators, failed factorizations.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Malformed or unreadable files.
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace slda
