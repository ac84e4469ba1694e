#pragma once

#include <stdexcept>
#include <string>

namespace sorl {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed argument (wrong dimension, non-finite value, ...).
class InputError : public Error {
public:
    using Error::Error;
};

/// Unknown environment/algorithm name or invalid configuration key.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of a closed form.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Caller broke a documented precondition (e.g. a probability outside [0,1]).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Operation not available for this object (e.g. enumerating a continuous env).
class UnsupportedError : public Error {
public:
    using Error::Error;
};

/// An iterative computation did not converge.
class NumericalFault : public Error {
public:
    using Error::Error;
};

/// A non-finite loss or parameter appeared during training.
class TrainingFault : public Error {
public:
    TrainingFault(const std::string& what, std::string snapshot)
        : Error(what), snapshot_(std::move(snapshot)) {}

    /// Human readable state at the time of the fault.
    const std::string& snapshot() const noexcept { return snapshot_; }

private:
    std::string snapshot_;
};

}  // namespace sorl
