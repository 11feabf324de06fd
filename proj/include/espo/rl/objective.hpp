// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "espo/mdm/elbo.hpp"

namespace espo::rl {

// Ratio / objective flavors of the ablation. seq_elbo is the production
// objective: a single sequence-level action with the ELBO as likelihood proxy
// and a length-normalized log-ratio.
enum class Variant { token_meanfield, seq_meanfield, token_elbo, seq_elbo };

enum class KlTag { none, k1, k2, k3 };

const char* to_string(Variant v);
const char* to_string(KlTag k);
Variant variant_from_string(const std::string& s);
KlTag kl_from_string(const std::string& s);

struct ObjectiveConfig {
    Variant variant = Variant::seq_elbo;
    double clip_eps = 0.2;
    KlTag kl = KlTag::k2;
    double beta = 0.01;
    // Log-ratios are always normalized by the fixed per-run completion length.

    void validate() const;
};

// ---------------------------------------------------------------------------
// scalar building blocks
// ---------------------------------------------------------------------------

// Log-ratio magnitudes beyond this band wreck the clipped surrogate long
// before the exponent itself overflows: exp(53 ln 2) is where a ratio loses
// every bit of structure next to an O(1) advantage. Ratios past the band are
// reported as saturated; past the exp() range they collapse to +inf / 0.
inline constexpr double kLogRatioSaturation = 36.7368005696771014;
inline constexpr double kLogRatioOverflow = 709.782712893384;

struct RatioValue {
    double value = 1.0;
    bool saturated = false;
};

// exp((new - old) / L), the length-normalized sequence ratio. Requires the
// two estimates to share their mask draws; mismatched records throw.
RatioValue ratio_seq_elbo(const mdm::ElboEstimate& elbo_new, const mdm::ElboEstimate& elbo_old,
                          int L);

// exp(new - old), the unnormalized sequence ratio. Kept to demonstrate its
// saturation behavior; never used by the trainer.
RatioValue ratio_seq_vanilla(const mdm::ElboEstimate& elbo_new,
                             const mdm::ElboEstimate& elbo_old);

// exp of the per-position contribution gap.
RatioValue ratio_token_elbo(const mdm::ElboEstimate& elbo_new, const mdm::ElboEstimate& elbo_old,
                            int position);

// Mean-field ratios (model evaluated on the fully masked completion).
RatioValue ratio_meanfield_token(double logp_new, double logp_old);
RatioValue ratio_meanfield_seq(const std::vector<double>& logp_new,
                               const std::vector<double>& logp_old);

RatioValue make_ratio(double log_ratio);

// min(rho * A, clip(rho, 1 - eps, 1 + eps) * A).
double clipped_surrogate(double ratio, double advantage, double clip_eps);

double kl_k1(double elbo_theta, double elbo_ref);
double kl_k2(double elbo_theta, double elbo_ref);
// exp(ref - theta) - 1 - (ref - theta); saturates with a flag like the ratios.
RatioValue kl_k3(double elbo_theta, double elbo_ref);

// A_i = R_i - mean(R); needs at least two rewards.
std::vector<double> group_advantages(const std::vector<double>& rewards);

// ---------------------------------------------------------------------------
// the differentiable objective
// ---------------------------------------------------------------------------

// One prompt's worth of rollouts with everything the inner updates need
// cached at rollout time: rewards, advantages, old-policy and reference ELBO
// estimates on shared draws, and old-policy mean-field log-probs.
struct CachedCompletion {
    mdm::TokenSequence seq;
    double reward = 0.0;
    double advantage = 0.0;
    mdm::ElboEstimate elbo_old;
    mdm::ElboEstimate elbo_ref;
    std::vector<double> meanfield_old;
};

struct CompletionGroup {
    std::vector<int> prompt;
    std::vector<CachedCompletion> completions;

    void validate() const;
};

struct LossDiagnostics {
    double mean_ratio = 0.0;
    double clip_frac = 0.0;
    double kl = 0.0;
    double loss = 0.0;
};

struct LossResult {
    nn::NodeId loss;
    LossDiagnostics diag;
};

// Negated clipped-surrogate objective plus the KL penalty, as one scalar
// graph node. The tape must be bound to the current policy parameters; the
// cached old/reference values enter as constants, so only the current-policy
// ELBO carries gradient. Theta-side estimates replay the cached draws
// (antithetic sharing), and the KL term reuses the same replay.
LossResult espo_loss(nn::Tape& tape, const nn::Denoiser& model, const CompletionGroup& group,
                     const ObjectiveConfig& cfg);

}  // namespace espo::rl
