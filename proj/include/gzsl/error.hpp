#pragma once

#include <stdexcept>
#include <string>

namespace gzsl {

/// Bad input: malformed files, out-of-range arguments, protocol violations.
/// The CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Failure while executing a pipeline stage (I/O, divergence).
/// The CLI maps this to exit code 2.
class RunError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace gzsl
