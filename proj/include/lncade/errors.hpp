#pragma once

#include <stdexcept>
#include <string>

namespace lncade {

// Thrown for malformed inputs, missing files, or contract violations in data.
// The CLI maps this to exit code 2.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when a computation produces non-finite values (e.g. diverging
// training). The CLI maps this to exit code 3.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad command-line usage or unusable configuration. Exit code 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace lncade
