#pragma once

#include <stdexcept>
#include <string>

namespace gcs {

// Invalid configuration: bad flags, malformed config files, out-of-range
// hyperparameters. CLI exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid or inconsistent data: missing files, schema violations, label
// range errors, dimension mismatches. CLI exit code 3.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numeric failure: non-finite loss, corrupt weights, degenerate inputs that
// cannot be recovered. CLI exit code 4.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace gcs
