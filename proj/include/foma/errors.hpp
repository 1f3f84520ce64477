#pragma once

#include <stdexcept>
#include <string>

namespace foma {

// Base of every error the library raises. The subclasses map one-to-one onto
// the CLI exit codes (see tools/foma.cpp).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or non-finite input data, shape mismatches.
class InputError : public Error {
public:
    using Error::Error;
};

/// Invalid hyper-parameters or configuration values.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A documented precondition of a numerical routine does not hold.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Data for which an estimator is undefined (e.g. coincident points).
class DegenerateDataError : public Error {
public:
    using Error::Error;
};

/// File system and parsing failures.
class IoError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    using Error::Error;
};

} // namespace foma
