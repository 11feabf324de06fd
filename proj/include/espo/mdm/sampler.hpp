// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "espo/mdm/sequence.hpp"
#include "espo/substrate/rng.hpp"

namespace espo::mdm {

// Iterative denoising settings. Decoding proceeds block by block, left to
// right; inside the active block, each step commits the positions with the
// highest model confidence. Temperature 0 means greedy argmax with confidence
// equal to the maximum probability; at temperature > 0 tokens are sampled
// from temperature-scaled distributions and ranked by the sampled token's
// probability. Ties break toward the lowest position index.
struct SamplerConfig {
    int tokens_per_step = 1;
    int block_length = 0;  // 0 => one block spanning the whole completion
    double temperature = 0.0;

    void validate(int completion_length) const;
    int steps_for(int completion_length) const;
};

struct SampleTrace {
    std::vector<std::vector<int>> committed;  // positions committed per step
};

// Denoise an all-masked completion of length L. The result contains no mask
// symbols and the step count matches SamplerConfig::steps_for(L).
TokenSequence sample(const nn::Denoiser& model, const nn::ParameterSet& params,
                     std::span<const int> prompt, int L, const SamplerConfig& cfg,
                     nn::Rng& rng, SampleTrace* trace = nullptr);

}  // namespace espo::mdm
