#pragma once

#include <stdexcept>
#include <string>

namespace qgda {

/// Base for all library errors. Each subclass maps to one CLI exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid input: bad parameters, mismatched grids, unknown keys.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// The numerical scheme left its stability region (CFL, NaN, singular solve).
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, long step = -1)
        : Error(step >= 0 ? what + " (step " + std::to_string(step) + ")" : what), step_(step) {}

    long step() const noexcept { return step_; }

private:
    long step_;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace qgda
