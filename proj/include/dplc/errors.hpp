#pragma once

#include <stdexcept>
#include <string>

namespace dplc {

/// Malformed or inconsistent input (bad shapes, invalid parameters, schema violations).
class InputError : public std::invalid_argument {
public:
    explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Numerical failure during estimation (non-finite values, divergence).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace dplc
