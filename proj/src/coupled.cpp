// SPDX-License-Identifier: Apache-2.0
#include "espo/vr/coupled.hpp"

namespace espo::vr {

namespace {
std::vector<int> complement_in(const std::vector<int>& universe,
                               const std::vector<int>& positions) {
    std::vector<int> out;
    out.reserve(universe.size() - positions.size());
    std::size_t k = 0;
    for (int p : universe) {
        if (k < positions.size() && positions[k] == p) {
            ++k;
        } else {
            out.push_back(p);
        }
    }
    return out;
}

std::vector<int> pick_positions(const std::vector<int>& universe, int l, nn::Rng& rng) {
    const std::vector<int> idx =
        rng.sample_without_replacement(static_cast<int>(universe.size()), l);
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(l));
    for (int i : idx) out.push_back(universe[static_cast<std::size_t>(i)]);
    return out;
}
}  // namespace

CoupledDraw draw_coupled(const mdm::TokenSequence& seq, nn::Rng& rng) {
    seq.validate();
    const std::vector<int> universe = seq.maskable_positions();
    const int Le = static_cast<int>(universe.size());
    CoupledDraw out;
    out.l = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(Le) + 1));

    out.primary.base = seq;
    out.primary.form = mdm::MaskForm::l_form;
    out.primary.l = out.l;
    out.primary.positions = pick_positions(universe, out.l, rng);

    out.complement.base = seq;
    out.complement.form = mdm::MaskForm::l_form;
    out.complement.l = Le - out.l;
    out.complement.positions = complement_in(universe, out.primary.positions);
    return out;
}

std::vector<mdm::MaskDraw> draw_coupled_records(const mdm::TokenSequence& seq, int pairs,
                                                nn::Rng& rng) {
    if (pairs < 1) throw InputDomainError("coupled draws: need at least one pair");
    seq.validate();
    const std::vector<int> universe = seq.maskable_positions();
    const int Le = static_cast<int>(universe.size());
    std::vector<mdm::MaskDraw> draws(static_cast<std::size_t>(pairs));
    for (mdm::MaskDraw& d : draws) {
        d.form = mdm::MaskForm::l_form;
        d.l = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(Le) + 1));
        d.positions = pick_positions(universe, d.l, rng);
    }
    return draws;
}

mdm::ElboEstimate coupled_elbo(const nn::Denoiser& model, const nn::ParameterSet& params,
                               const mdm::TokenSequence& seq, int pairs, nn::Rng& rng) {
    const std::vector<mdm::MaskDraw> draws = draw_coupled_records(seq, pairs, rng);
    return mdm::replay_elbo(model, params, seq, draws, mdm::EstimatorForm::coupled);
}

mdm::ElboEstimate uncoupled_pair_elbo(const nn::Denoiser& model,
                                      const nn::ParameterSet& params,
                                      const mdm::TokenSequence& seq, int pairs, nn::Rng& rng) {
    if (pairs < 1) throw InputDomainError("uncoupled pairs: need at least one pair");
    seq.validate();
    const std::vector<int> universe = seq.maskable_positions();
    const int Le = static_cast<int>(universe.size());
    const int P = static_cast<int>(seq.prompt.size());

    std::vector<double> sums(static_cast<std::size_t>(seq.length()), 0.0);
    double acc = 0.0;
    mdm::ElboEstimate est;
    for (int pair = 0; pair < pairs; ++pair) {
        double pair_acc = 0.0;
        for (int side = 0; side < 2; ++side) {
            mdm::MaskDraw d;
            d.form = mdm::MaskForm::l_form;
            d.l = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(Le) + 1));
            d.positions = pick_positions(universe, d.l, rng);
            est.draws.push_back(d);
            if (d.l == 0) continue;
            const double w = static_cast<double>(Le + 1) / static_cast<double>(d.l);
            std::vector<int> tokens = seq.full_tokens();
            for (int p : d.positions) tokens[static_cast<std::size_t>(P + p)] = nn::kMaskToken;
            const nn::Tensor lp = model.forward_logprobs(params, tokens, P);
            for (int p : d.positions) {
                const double tmp = w * lp.at(static_cast<std::size_t>(P + p),
                                             static_cast<std::size_t>(seq.completion[p]));
                sums[static_cast<std::size_t>(p)] += 0.5 * tmp;
                pair_acc += tmp;
            }
        }
        acc += 0.5 * pair_acc;
    }
    est.form = mdm::EstimatorForm::coupled;
    est.mc_samples = pairs;
    const double inv = 1.0 / static_cast<double>(pairs);
    est.value = acc * inv;
    est.per_token.resize(static_cast<std::size_t>(seq.length()));
    for (std::size_t i = 0; i < est.per_token.size(); ++i) est.per_token[i] = sums[i] * inv;
    return est;
}

AntitheticDiff antithetic_diff(const nn::Denoiser& model, const nn::ParameterSet& params_a,
                               const nn::ParameterSet& params_b,
                               const mdm::TokenSequence& seq, int pairs, nn::Rng& rng) {
    const std::vector<mdm::MaskDraw> draws = draw_coupled_records(seq, pairs, rng);
    AntitheticDiff out;
    out.estimate_a = mdm::replay_elbo(model, params_a, seq, draws, mdm::EstimatorForm::coupled);
    out.estimate_b = mdm::replay_elbo(model, params_b, seq, draws, mdm::EstimatorForm::coupled);
    out.diff = out.estimate_a.value - out.estimate_b.value;
    return out;
}

}  // namespace espo::vr
