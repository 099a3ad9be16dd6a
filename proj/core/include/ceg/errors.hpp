#pragma once

#include <stdexcept>
#include <string>

namespace ceg {

// Raised when input data violates a structural invariant (monotone times,
// mark dimensions, horizon bounds, parse failures).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a computation produces or receives non-finite values, or an
// optimizer diverges.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace ceg
