#pragma once

#include <stdexcept>
#include <string>

namespace decamp {

// Exit codes used by the CLI; each error family gets its own code so scripts
// can tell a missing file from a malformed one.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitMissingFile = 2,
    kExitBadFormat = 3,
    kExitDimensionMismatch = 4,
    kExitNumeric = 5,
};

struct FileMissingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace decamp
