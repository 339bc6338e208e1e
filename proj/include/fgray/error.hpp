#pragma once

#include <stdexcept>
#include <string>

namespace fgray {

/// Malformed or inconsistent input data (bad codes, parse failures, degenerate weights).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Floating-point failure or a broken numerical invariant.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace fgray
