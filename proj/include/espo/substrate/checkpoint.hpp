// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "espo/substrate/params.hpp"

namespace espo::nn {

// Binary array container. Layout, all little-endian:
//   magic "ESPOCKPT" | u32 version | u32 array count |
//   per array: u32 name length, name bytes, u32 rank, u64 dims..., f32 values
// Values are stored in single precision; save -> load -> save reproduces the
// file byte for byte.
void save_arrays(const std::string& path, const ParameterSet& params);

ParameterSet load_arrays(const std::string& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace espo::nn
