#pragma once

#include <stdexcept>
#include <string>

namespace dialopre {

// Error taxonomy mirrors the CLI exit codes: data errors exit 2,
// numeric failures (non-finite values) exit 3.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dialopre
