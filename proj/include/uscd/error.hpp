#pragma once

#include <stdexcept>
#include <string>

namespace uscd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inputs that violate a documented contract (shapes, invariants, headers).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Filesystem level failure (missing file, short read, unwritable path).
class IoError : public Error {
public:
    using Error::Error;
};

/// A pipeline stage failed; carries the stage name for reporting.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace uscd
