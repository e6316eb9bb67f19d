#pragma once

#include <stdexcept>
#include <string>

namespace driftcast {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or truncated on-disk data (bad magic, version, payload length).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Filesystem-level failure (unreadable/unwritable path).
class IoError : public Error {
public:
    using Error::Error;
};

/// A value violates its documented invariants.
class InvariantError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration (unknown enum value, out-of-range setting).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Request outside the valid index/extent range.
class RangeError : public Error {
public:
    using Error::Error;
};

/// Incompatible array shapes; message names the operation and both shapes.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
public:
    using Error::Error;
};

/// backward() called again without an intervening zero_grad().
class AccumulationError : public Error {
public:
    using Error::Error;
};

/// Training loss became non-finite; carries the epoch where it happened.
class DivergenceError : public Error {
public:
    DivergenceError(int epoch, const std::string& msg) : Error(msg), epoch_(epoch) {}
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

} // namespace driftcast
