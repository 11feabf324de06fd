// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>

#include "espo/substrate/params.hpp"
#include "espo/substrate/rng.hpp"
#include "espo/substrate/tape.hpp"

namespace espo::nn {

// Reserved token ids. Every vocabulary starts with these two.
inline constexpr int kMaskToken = 0;
inline constexpr int kPadToken = 1;

struct DenoiserConfig {
    int vocab_size = 6;   // includes the mask and pad symbols
    int width = 16;
    int layers = 1;
    int heads = 2;
    int max_seq_len = 32;
    bool positional = true;  // learned positions; disable to test permutation symmetry

    void validate() const;
};

// Bidirectional transformer denoiser: given a prompt plus a partially masked
// completion it yields a log-distribution over the vocabulary at every
// position. Attention is full (no causal mask); pre-LN blocks with a GELU MLP.
class Denoiser {
public:
    explicit Denoiser(DenoiserConfig cfg);

    const DenoiserConfig& config() const { return cfg_; }

    // Truncated-normal(0.02) embeddings and projections, zero biases,
    // unit layer-norm gains.
    ParameterSet init_params(Rng& rng) const;

    std::size_t param_count() const;

    // Graph forward. The tape must already be bound to the parameter set.
    // Returns a [T, vocab] node of log-probabilities (each row sums to one
    // in probability space).
    NodeId forward(Tape& tape, std::span<const int> tokens, int prompt_length) const;

    // Plain forward for sampling/oracle paths; no gradient bookkeeping.
    Tensor forward_logprobs(const ParameterSet& params, std::span<const int> tokens,
                            int prompt_length) const;

private:
    void check_input(std::span<const int> tokens, int prompt_length) const;

    DenoiserConfig cfg_;
};

}  // namespace espo::nn
