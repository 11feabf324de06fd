// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "espo/mdm/sequence.hpp"
#include "espo/substrate/denoiser.hpp"
#include "espo/substrate/rng.hpp"

namespace espo::mdm {

enum class EstimatorForm { l_form, t_form, coupled };

// Monte Carlo estimate of the sequence ELBO (nats), with the additive
// per-position split and the draws that produced it. Replaying the recorded
// draws against the same parameters reproduces `value` bit for bit.
struct ElboEstimate {
    double value = 0.0;
    std::vector<double> per_token;  // length L; sums to value
    std::vector<MaskDraw> draws;
    int mc_samples = 0;
    EstimatorForm form = EstimatorForm::l_form;
};

MaskedSequence corrupt_t(const TokenSequence& seq, double t, nn::Rng& rng);
MaskedSequence corrupt_l(const TokenSequence& seq, int l, nn::Rng& rng);

// Discrete-masking estimator: l uniform on {1..L}, weight L/l over the
// masked positions. `shared_draws` replays previously recorded draws
// (antithetic mask sharing).
ElboEstimate elbo_l(const nn::Denoiser& model, const nn::ParameterSet& params,
                    const TokenSequence& seq, int m, nn::Rng& rng,
                    const std::vector<MaskDraw>* shared_draws = nullptr);

// Continuous-rate estimator: t uniform on (0,1], independent masking,
// weight 1/t. Draws that mask nothing contribute exactly zero.
ElboEstimate elbo_t(const nn::Denoiser& model, const nn::ParameterSet& params,
                    const TokenSequence& seq, int m, nn::Rng& rng,
                    const std::vector<MaskDraw>* shared_draws = nullptr);

// Re-evaluates recorded draws (any estimator form) against a parameter set.
// The coupled pair estimator and the antithetic machinery are built on this.
ElboEstimate replay_elbo(const nn::Denoiser& model, const nn::ParameterSet& params,
                         const TokenSequence& seq, std::span<const MaskDraw> draws,
                         EstimatorForm form);

// k-th additive component of an estimate (0-based position).
double per_token_elbo(const ElboEstimate& estimate, int position);

// Differentiable replay of recorded draws.
struct ElboGraph {
    nn::NodeId total = 0;
    std::vector<nn::NodeId> per_token;  // populated only when requested
};
ElboGraph elbo_graph(nn::Tape& tape, const nn::Denoiser& model, const TokenSequence& seq,
                     std::span<const MaskDraw> draws, EstimatorForm form,
                     bool want_per_token = false);

// Mean-field evaluation context: the completion fully masked, conditioning on
// the prompt alone. Returns log p(y_k | all-masked, prompt) per position.
std::vector<double> meanfield_logprobs(const nn::Denoiser& model,
                                       const nn::ParameterSet& params,
                                       const TokenSequence& seq);
std::vector<nn::NodeId> meanfield_graph(nn::Tape& tape, const nn::Denoiser& model,
                                        const TokenSequence& seq);

}  // namespace espo::mdm
