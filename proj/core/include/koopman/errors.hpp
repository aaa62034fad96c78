#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace koopman {

// Base of every error thrown by the library. The CLI maps subclasses onto
// process exit codes (usage 2, data/format 3, numeric 4).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::size_t iterations)
        : Error(what + " (after " + std::to_string(iterations) + " iterations)"),
          iterations_(iterations) {}
    std::size_t iterations() const noexcept { return iterations_; }

private:
    std::size_t iterations_;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class StateError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    TrainingError(const std::string& what, long last_good_epoch)
        : Error(what + " (last good epoch " + std::to_string(last_good_epoch) + ")"),
          last_good_epoch_(last_good_epoch) {}
    long last_good_epoch() const noexcept { return last_good_epoch_; }

private:
    long last_good_epoch_;
};

}  // namespace koopman
