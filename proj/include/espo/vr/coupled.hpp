// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "espo/mdm/elbo.hpp"

namespace espo::vr {

// One complementary mask pair: the primary masks l positions, the complement
// masks the other L - l, and together they cover every position exactly once.
struct CoupledDraw {
    int l = 0;
    mdm::MaskedSequence primary;
    mdm::MaskedSequence complement;
};

// l uniform on {0..L}; the complement swaps masked and unmasked sets.
CoupledDraw draw_coupled(const mdm::TokenSequence& seq, nn::Rng& rng);

std::vector<mdm::MaskDraw> draw_coupled_records(const mdm::TokenSequence& seq, int pairs,
                                                nn::Rng& rng);

// Complementary-pair estimator: per pair, half the sum of the two one-sided
// losses with weight (L+1)/masked-count, where an empty side contributes a
// literal zero. Unbiased for the same ELBO as the discrete estimator, and
// every position contributes to every pair.
mdm::ElboEstimate coupled_elbo(const nn::Denoiser& model, const nn::ParameterSet& params,
                               const mdm::TokenSequence& seq, int pairs, nn::Rng& rng);

// Control for the coupling claim: the same one-sided loss averaged over two
// independent draws per pair (same cost, same marginal weighting, no
// complementarity). Coupling should beat this, not the plain discrete
// estimator, whose L/l weighting already cancels on homogeneous
// distributions.
mdm::ElboEstimate uncoupled_pair_elbo(const nn::Denoiser& model,
                                      const nn::ParameterSet& params,
                                      const mdm::TokenSequence& seq, int pairs, nn::Rng& rng);

struct AntitheticDiff {
    double diff = 0.0;
    mdm::ElboEstimate estimate_a;
    mdm::ElboEstimate estimate_b;
};

// Shared-draw ELBO difference: the pairs are drawn once and replayed under
// both parameter sets, so identical policies cancel exactly.
AntitheticDiff antithetic_diff(const nn::Denoiser& model, const nn::ParameterSet& params_a,
                               const nn::ParameterSet& params_b,
                               const mdm::TokenSequence& seq, int pairs, nn::Rng& rng);

}  // namespace espo::vr
