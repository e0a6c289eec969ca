#pragma once

#include <stdexcept>
#include <string>

namespace afmpc {

// Base of all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad argument or violated precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// A numerical procedure produced non-finite values (plant, prediction, adaptation).
class DivergenceError : public Error {
public:
    using Error::Error;
};

// Linear algebra failure, e.g. a rank-deficient Lyapunov operator.
class LinalgError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace afmpc
