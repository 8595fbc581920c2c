#pragma once

#include <stdexcept>
#include <string>

namespace lrising {

// Each error kind maps onto one CLI exit code.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct GuardExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvariantViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum ExitCode : int { kExitOk = 0, kExitInvariant = 1, kExitConfig = 2, kExitGuard = 3 };

inline void require(bool cond, const std::string& what) {
    if (!cond) throw std::invalid_argument(what);
}

inline void guard(bool cond, const std::string& what) {
    if (!cond) throw GuardExceeded(what);
}

}  // namespace lrising
