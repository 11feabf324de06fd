// SPDX-License-Identifier: Apache-2.0
#include "espo/mdm/elbo.hpp"

#include <algorithm>
#include <cmath>

namespace espo::mdm {

namespace {

// Corruption and the estimators operate on the maskable universe: completion
// positions that are not padding. `universe` is ascending.
void check_draw(const MaskDraw& d, EstimatorForm form, const std::vector<int>& universe) {
    const int Le = static_cast<int>(universe.size());
    int prev = -1;
    for (int p : d.positions) {
        if (p <= prev) throw InputDomainError("elbo: draw positions not strictly increasing");
        if (!std::binary_search(universe.begin(), universe.end(), p)) {
            throw InputDomainError("elbo: draw position outside the maskable set");
        }
        prev = p;
    }
    switch (form) {
        case EstimatorForm::l_form:
            if (d.form != MaskForm::l_form || d.l != static_cast<int>(d.positions.size()) ||
                d.l < 1 || d.l > Le) {
                throw InputDomainError("elbo: draw is not a valid l-form mask");
            }
            break;
        case EstimatorForm::coupled:
            if (d.form != MaskForm::l_form || d.l != static_cast<int>(d.positions.size()) ||
                d.l < 0 || d.l > Le) {
                throw InputDomainError("elbo: draw is not a valid coupled pair");
            }
            break;
        case EstimatorForm::t_form:
            if (d.form != MaskForm::t_form || d.t <= 0.0 || d.t > 1.0) {
                throw InputDomainError("elbo: draw is not a valid t-form mask");
            }
            break;
    }
}

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

std::vector<int> corrupt_tokens(const TokenSequence& seq, const std::vector<int>& positions) {
    std::vector<int> out = seq.full_tokens();
    const std::size_t off = seq.prompt.size();
    for (int p : positions) out[off + static_cast<std::size_t>(p)] = nn::kMaskToken;
    return out;
}

// The plain replay and the graph replay below accumulate in the same order so
// an estimate cached under theta_old matches a graph evaluation at theta ==
// theta_old bit for bit.
ElboEstimate replay(const nn::Denoiser& model, const nn::ParameterSet& params,
                    const TokenSequence& seq, std::span<const MaskDraw> draws,
                    EstimatorForm form) {
    seq.validate();
    const int L = seq.length();
    const int P = static_cast<int>(seq.prompt.size());
    const std::vector<int> universe = seq.maskable_positions();
    const int Le = static_cast<int>(universe.size());

    std::vector<double> sums(static_cast<std::size_t>(L), 0.0);
    double acc = 0.0;
    for (const MaskDraw& d : draws) {
        check_draw(d, form, universe);
        double dv = 0.0;
        if (form == EstimatorForm::coupled) {
            double part1 = 0.0;
            if (d.l > 0) {
                const double w1 = static_cast<double>(Le + 1) / static_cast<double>(d.l);
                const nn::Tensor lp =
                    model.forward_logprobs(params, corrupt_tokens(seq, d.positions), P);
                for (int p : d.positions) {
                    const double tmp = w1 * lp.at(static_cast<std::size_t>(P + p),
                                                  static_cast<std::size_t>(seq.completion[p]));
                    sums[static_cast<std::size_t>(p)] += 0.5 * tmp;
                    part1 += tmp;
                }
            }
            double part2 = 0.0;
            const std::vector<int> comp = complement_in(universe, d.positions);
            if (!comp.empty()) {
                const double w2 = static_cast<double>(Le + 1) / static_cast<double>(Le - d.l);
                const nn::Tensor lp = model.forward_logprobs(params, corrupt_tokens(seq, comp), P);
                for (int p : comp) {
                    const double tmp = w2 * lp.at(static_cast<std::size_t>(P + p),
                                                  static_cast<std::size_t>(seq.completion[p]));
                    sums[static_cast<std::size_t>(p)] += 0.5 * tmp;
                    part2 += tmp;
                }
            }
            dv = 0.5 * (part1 + part2);
        } else if (!d.positions.empty()) {
            const double w = form == EstimatorForm::l_form
                                 ? static_cast<double>(Le) / static_cast<double>(d.l)
                                 : 1.0 / d.t;
            const nn::Tensor lp =
                model.forward_logprobs(params, corrupt_tokens(seq, d.positions), P);
            for (int p : d.positions) {
                const double tmp = w * lp.at(static_cast<std::size_t>(P + p),
                                             static_cast<std::size_t>(seq.completion[p]));
                sums[static_cast<std::size_t>(p)] += tmp;
                dv += tmp;
            }
        }
        acc += dv;
    }

    ElboEstimate est;
    est.form = form;
    est.mc_samples = static_cast<int>(draws.size());
    est.draws.assign(draws.begin(), draws.end());
    const double inv = 1.0 / static_cast<double>(draws.size());
    est.value = acc * inv;
    est.per_token.resize(static_cast<std::size_t>(L));
    for (int i = 0; i < L; ++i) {
        est.per_token[static_cast<std::size_t>(i)] = sums[static_cast<std::size_t>(i)] * inv;
    }
    return est;
}

std::vector<int> pick_positions(const std::vector<int>& universe, int l, nn::Rng& rng) {
    const std::vector<int> idx = rng.sample_without_replacement(static_cast<int>(universe.size()), l);
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(l));
    for (int i : idx) out.push_back(universe[static_cast<std::size_t>(i)]);
    return out;
}

}  // namespace

MaskedSequence corrupt_t(const TokenSequence& seq, double t, nn::Rng& rng) {
    seq.validate();
    if (!(t > 0.0) || t > 1.0) throw InputDomainError("corrupt_t: t must lie in (0,1]");
    MaskedSequence out;
    out.base = seq;
    out.form = MaskForm::t_form;
    out.t = t;
    for (int p : seq.maskable_positions()) {
        if (rng.bernoulli(t)) out.positions.push_back(p);
    }
    return out;
}

MaskedSequence corrupt_l(const TokenSequence& seq, int l, nn::Rng& rng) {
    seq.validate();
    const std::vector<int> universe = seq.maskable_positions();
    if (l < 0 || l > static_cast<int>(universe.size())) {
        throw InputDomainError("corrupt_l: l outside {0..L}");
    }
    MaskedSequence out;
    out.base = seq;
    out.form = MaskForm::l_form;
    out.l = l;
    out.positions = pick_positions(universe, l, rng);
    return out;
}

ElboEstimate elbo_l(const nn::Denoiser& model, const nn::ParameterSet& params,
                    const TokenSequence& seq, int m, nn::Rng& rng,
                    const std::vector<MaskDraw>* shared_draws) {
    seq.validate();
    if (m < 1) throw InputDomainError("elbo_l: m must be at least 1");
    if (shared_draws) {
        if (static_cast<int>(shared_draws->size()) != m) {
            throw InputDomainError("elbo_l: shared draw count does not match m");
        }
        return replay(model, params, seq, *shared_draws, EstimatorForm::l_form);
    }
    const std::vector<int> universe = seq.maskable_positions();
    const int Le = static_cast<int>(universe.size());
    std::vector<MaskDraw> draws(static_cast<std::size_t>(m));
    for (MaskDraw& d : draws) {
        d.form = MaskForm::l_form;
        d.l = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(Le)));
        d.positions = pick_positions(universe, d.l, rng);
    }
    return replay(model, params, seq, draws, EstimatorForm::l_form);
}

ElboEstimate elbo_t(const nn::Denoiser& model, const nn::ParameterSet& params,
                    const TokenSequence& seq, int m, nn::Rng& rng,
                    const std::vector<MaskDraw>* shared_draws) {
    seq.validate();
    if (m < 1) throw InputDomainError("elbo_t: m must be at least 1");
    if (shared_draws) {
        if (static_cast<int>(shared_draws->size()) != m) {
            throw InputDomainError("elbo_t: shared draw count does not match m");
        }
        return replay(model, params, seq, *shared_draws, EstimatorForm::t_form);
    }
    const std::vector<int> universe = seq.maskable_positions();
    std::vector<MaskDraw> draws(static_cast<std::size_t>(m));
    for (MaskDraw& d : draws) {
        d.form = MaskForm::t_form;
        d.t = rng.uniform_open0();
        for (int p : universe) {
            if (rng.bernoulli(d.t)) d.positions.push_back(p);
        }
    }
    return replay(model, params, seq, draws, EstimatorForm::t_form);
}

ElboEstimate replay_elbo(const nn::Denoiser& model, const nn::ParameterSet& params,
                         const TokenSequence& seq, std::span<const MaskDraw> draws,
                         EstimatorForm form) {
    if (draws.empty()) throw InputDomainError("replay_elbo: no draws");
    return replay(model, params, seq, draws, form);
}

double per_token_elbo(const ElboEstimate& estimate, int position) {
    if (position < 0 || position >= static_cast<int>(estimate.per_token.size())) {
        throw InputDomainError("per_token_elbo: position out of range");
    }
    return estimate.per_token[static_cast<std::size_t>(position)];
}

ElboGraph elbo_graph(nn::Tape& tape, const nn::Denoiser& model, const TokenSequence& seq,
                     std::span<const MaskDraw> draws, EstimatorForm form,
                     bool want_per_token) {
    seq.validate();
    if (draws.empty()) throw InputDomainError("elbo_graph: no draws");
    const int L = seq.length();
    const int P = static_cast<int>(seq.prompt.size());
    const std::vector<int> universe = seq.maskable_positions();
    const int Le = static_cast<int>(universe.size());

    // Token-wise contribution chains, in draw order.
    std::vector<std::vector<nn::NodeId>> chains(static_cast<std::size_t>(L));
    std::vector<nn::NodeId> draw_values;
    draw_values.reserve(draws.size());

    auto gather_side = [&](const std::vector<int>& positions, double w,
                           double token_scale) -> nn::NodeId {
        const std::vector<int> corrupted = corrupt_tokens(seq, positions);
        nn::NodeId lp = model.forward(tape, corrupted, P);
        std::vector<nn::Tape::GatherTerm> terms;
        terms.reserve(positions.size());
        for (int p : positions) {
            terms.push_back({static_cast<std::size_t>(P + p),
                             static_cast<std::size_t>(seq.completion[p]), w});
            if (want_per_token) {
                nn::NodeId c = tape.gather_weighted(
                    lp, {{static_cast<std::size_t>(P + p),
                          static_cast<std::size_t>(seq.completion[p]), w}});
                if (token_scale != 1.0) c = tape.s_scale(c, token_scale);
                chains[static_cast<std::size_t>(p)].push_back(c);
            }
        }
        return tape.gather_weighted(lp, std::move(terms));
    };

    for (const MaskDraw& d : draws) {
        check_draw(d, form, universe);
        nn::NodeId dv;
        if (form == EstimatorForm::coupled) {
            nn::NodeId g1 = tape.scalar(0.0);
            if (d.l > 0) {
                g1 = gather_side(d.positions, static_cast<double>(Le + 1) / d.l, 0.5);
            }
            nn::NodeId g2 = tape.scalar(0.0);
            const std::vector<int> comp = complement_in(universe, d.positions);
            if (!comp.empty()) {
                g2 = gather_side(comp, static_cast<double>(Le + 1) / (Le - d.l), 0.5);
            }
            dv = tape.s_scale(tape.s_add(g1, g2), 0.5);
        } else if (!d.positions.empty()) {
            const double w = form == EstimatorForm::l_form
                                 ? static_cast<double>(Le) / static_cast<double>(d.l)
                                 : 1.0 / d.t;
            dv = gather_side(d.positions, w, 1.0);
        } else {
            dv = tape.scalar(0.0);
        }
        draw_values.push_back(dv);
    }

    ElboGraph out;
    out.total = tape.s_mean(draw_values);
    if (want_per_token) {
        const double inv = 1.0 / static_cast<double>(draws.size());
        out.per_token.reserve(static_cast<std::size_t>(L));
        for (int i = 0; i < L; ++i) {
            auto& chain = chains[static_cast<std::size_t>(i)];
            if (chain.empty()) {
                out.per_token.push_back(tape.scalar(0.0));
                continue;
            }
            nn::NodeId acc = chain[0];
            for (std::size_t j = 1; j < chain.size(); ++j) acc = tape.s_add(acc, chain[j]);
            out.per_token.push_back(tape.s_scale(acc, inv));
        }
    }
    return out;
}

std::vector<double> meanfield_logprobs(const nn::Denoiser& model,
                                       const nn::ParameterSet& params,
                                       const TokenSequence& seq) {
    seq.validate();
    const int L = seq.length();
    const int P = static_cast<int>(seq.prompt.size());
    const std::vector<int> universe = seq.maskable_positions();
    const nn::Tensor lp = model.forward_logprobs(params, corrupt_tokens(seq, universe), P);
    std::vector<double> out(static_cast<std::size_t>(L), 0.0);
    for (int p : universe) {
        out[static_cast<std::size_t>(p)] = lp.at(static_cast<std::size_t>(P + p),
                                                 static_cast<std::size_t>(seq.completion[p]));
    }
    return out;
}

std::vector<nn::NodeId> meanfield_graph(nn::Tape& tape, const nn::Denoiser& model,
                                        const TokenSequence& seq) {
    seq.validate();
    const int L = seq.length();
    const int P = static_cast<int>(seq.prompt.size());
    const std::vector<int> universe = seq.maskable_positions();
    nn::NodeId lp = model.forward(tape, corrupt_tokens(seq, universe), P);
    std::vector<nn::NodeId> out(static_cast<std::size_t>(L), 0);
    std::vector<bool> set(static_cast<std::size_t>(L), false);
    for (int p : universe) {
        out[static_cast<std::size_t>(p)] =
            tape.gather_weighted(lp, {{static_cast<std::size_t>(P + p),
                                       static_cast<std::size_t>(seq.completion[p]), 1.0}});
        set[static_cast<std::size_t>(p)] = true;
    }
    for (int p = 0; p < L; ++p) {
        if (!set[static_cast<std::size_t>(p)]) out[static_cast<std::size_t>(p)] = tape.scalar(0.0);
    }
    return out;
}

}  // namespace espo::mdm
