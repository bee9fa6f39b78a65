#pragma once

#include <stdexcept>
#include <string>

namespace sparseloc {

/// Base of every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad invocation or argument combination (exit code 1).
class UsageError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration or model object (exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed file contents (exit code 2).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Well-formed input carrying invalid numbers, e.g. NaN (exit code 2).
class DataError : public Error {
public:
    using Error::Error;
};

/// Filesystem failures (exit code 2).
class IoError : public Error {
public:
    using Error::Error;
};

/// Numerical failure inside a solver (exit code 3 in single-solve mode).
class SolverError : public Error {
public:
    SolverError(const std::string& what, int iteration = -1)
        : Error(iteration >= 0 ? what + " at iteration " + std::to_string(iteration) : what),
          iteration_(iteration) {}

    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

} // namespace sparseloc
