#pragma once

#include <stdexcept>
#include <string>

namespace tsg {

// Malformed or inconsistent input (files, shapes, option values). CLI exit code 2.
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: singular mass matrix, NaN state, non-finite loss. CLI exit code 3.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Symmetry validation failure: no verified action, free/constrained mixing,
// violated model assumptions. CLI exit code 4.
struct SymmetryError : std::runtime_error {
    explicit SymmetryError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tsg
