// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "espo/substrate/params.hpp"

namespace espo::train {

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double eps = 1e-8;
    double weight_decay = 0.01;
    double grad_clip = 0.2;  // global-norm bound; 0 disables
};

// Adaptive moments with decoupled weight decay and bias correction.
class AdamW {
public:
    AdamW(const nn::ParameterSet& params, AdamWConfig cfg);

    // Clips the gradient to the configured global norm, then applies one
    // update. Returns the pre-clip global norm.
    double step(nn::ParameterSet& params, const nn::ParameterSet& grads);

    std::uint64_t steps_taken() const { return t_; }
    const nn::ParameterSet& first_moment() const { return m_; }
    const nn::ParameterSet& second_moment() const { return v_; }
    AdamWConfig& config() { return cfg_; }

    // Moment arrays for checkpointing (prefixed names).
    nn::ParameterSet state_arrays() const;
    void load_state_arrays(const nn::ParameterSet& arrays);

private:
    AdamWConfig cfg_;
    nn::ParameterSet m_;
    nn::ParameterSet v_;
    std::uint64_t t_ = 0;
};

// Global L2 norm across every array.
double global_norm(const nn::ParameterSet& grads);

}  // namespace espo::train
