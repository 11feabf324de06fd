// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace espo {

// Caller passed a value outside an operation's documented domain.
struct InputDomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A computation produced a non-finite value where one is not allowed.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An exact/enumeration routine was asked for a size it refuses to handle.
struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Cached state (draw records, parameter versions) disagrees with the request.
struct ConsistencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or contradictory configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace espo
