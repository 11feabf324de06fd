// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "espo/errors.hpp"

namespace espo::train {

// Hardware-agnostic cost model: a forward pass is 2ND, a backward pass 4ND.
// Per sample, generation costs K forwards and every policy update costs one
// forward+backward per Monte Carlo sample; coupled sampling doubles the
// update term:
//   total = 2 N D (K + 3 mu m)   without coupling
//   total = 2 N D (K + 6 mu m)   with coupling
// Exact integer arithmetic so golden ratios are exact.
inline std::uint64_t flops_per_sample(std::uint64_t n_params, std::uint64_t seq_len,
                                      std::uint64_t denoise_steps, std::uint64_t inner_updates,
                                      std::uint64_t mc_samples, bool coupled) {
    if (n_params == 0 || seq_len == 0 || denoise_steps == 0 || inner_updates == 0 ||
        mc_samples == 0) {
        throw InputDomainError("flops_per_sample: all counts must be positive");
    }
    const std::uint64_t update_factor = (coupled ? 6 : 3) * inner_updates * mc_samples;
    return 2 * n_params * seq_len * (denoise_steps + update_factor);
}

// The ND coefficient alone: 2 (K + {3|6} mu m).
inline std::uint64_t flops_coefficient(std::uint64_t denoise_steps, std::uint64_t inner_updates,
                                       std::uint64_t mc_samples, bool coupled) {
    return flops_per_sample(1, 1, denoise_steps, inner_updates, mc_samples, coupled);
}

// Percentage of the m=1 coupled baseline, rounded to the nearest integer.
inline int flops_percent_of_m1(std::uint64_t denoise_steps, std::uint64_t inner_updates,
                               std::uint64_t mc_samples, bool coupled) {
    const std::uint64_t base = flops_coefficient(denoise_steps, inner_updates, 1, coupled);
    const std::uint64_t cur = flops_coefficient(denoise_steps, inner_updates, mc_samples, coupled);
    return static_cast<int>((200 * cur + base) / (2 * base));
}

}  // namespace espo::train
