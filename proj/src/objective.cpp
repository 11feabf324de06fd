// SPDX-License-Identifier: Apache-2.0
#include "espo/rl/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace espo::rl {

const char* to_string(Variant v) {
    switch (v) {
        case Variant::token_meanfield: return "token-meanfield";
        case Variant::seq_meanfield: return "seq-meanfield";
        case Variant::token_elbo: return "token-elbo";
        case Variant::seq_elbo: return "seq-elbo";
    }
    return "?";
}

const char* to_string(KlTag k) {
    switch (k) {
        case KlTag::none: return "none";
        case KlTag::k1: return "k1";
        case KlTag::k2: return "k2";
        case KlTag::k3: return "k3";
    }
    return "?";
}

Variant variant_from_string(const std::string& s) {
    if (s == "token-meanfield") return Variant::token_meanfield;
    if (s == "seq-meanfield") return Variant::seq_meanfield;
    if (s == "token-elbo") return Variant::token_elbo;
    if (s == "seq-elbo") return Variant::seq_elbo;
    throw ConfigError("unknown objective variant: " + s);
}

KlTag kl_from_string(const std::string& s) {
    if (s == "none") return KlTag::none;
    if (s == "k1") return KlTag::k1;
    if (s == "k2") return KlTag::k2;
    if (s == "k3") return KlTag::k3;
    throw ConfigError("unknown kl estimator: " + s);
}

void ObjectiveConfig::validate() const {
    if (!(clip_eps > 0.0)) throw ConfigError("objective: clip epsilon must be positive");
    if (beta < 0.0) throw ConfigError("objective: kl weight must be non-negative");
}

// ---------------------------------------------------------------------------
// scalar building blocks
// ---------------------------------------------------------------------------

RatioValue make_ratio(double log_ratio) {
    RatioValue out;
    out.saturated = std::fabs(log_ratio) > kLogRatioSaturation;
    if (log_ratio > kLogRatioOverflow) {
        out.value = std::numeric_limits<double>::infinity();
    } else if (log_ratio < -kLogRatioOverflow) {
        out.value = 0.0;
    } else {
        out.value = std::exp(log_ratio);
    }
    return out;
}

namespace {
bool same_draws(const mdm::ElboEstimate& a, const mdm::ElboEstimate& b) {
    if (a.form != b.form || a.draws.size() != b.draws.size()) return false;
    for (std::size_t i = 0; i < a.draws.size(); ++i) {
        const mdm::MaskDraw& x = a.draws[i];
        const mdm::MaskDraw& y = b.draws[i];
        if (x.form != y.form || x.l != y.l || x.t != y.t || x.positions != y.positions) {
            return false;
        }
    }
    return true;
}

void require_shared_draws(const mdm::ElboEstimate& a, const mdm::ElboEstimate& b,
                          const char* what) {
    if (!a.draws.empty() && !b.draws.empty() && !same_draws(a, b)) {
        throw ConsistencyError(std::string(what) + ": estimates do not share mask draws");
    }
}
}  // namespace

RatioValue ratio_seq_elbo(const mdm::ElboEstimate& elbo_new, const mdm::ElboEstimate& elbo_old,
                          int L) {
    if (L < 1) throw InputDomainError("ratio_seq_elbo: L must be positive");
    require_shared_draws(elbo_new, elbo_old, "ratio_seq_elbo");
    return make_ratio((elbo_new.value - elbo_old.value) / static_cast<double>(L));
}

RatioValue ratio_seq_vanilla(const mdm::ElboEstimate& elbo_new,
                             const mdm::ElboEstimate& elbo_old) {
    require_shared_draws(elbo_new, elbo_old, "ratio_seq_vanilla");
    return make_ratio(elbo_new.value - elbo_old.value);
}

RatioValue ratio_token_elbo(const mdm::ElboEstimate& elbo_new, const mdm::ElboEstimate& elbo_old,
                            int position) {
    require_shared_draws(elbo_new, elbo_old, "ratio_token_elbo");
    return make_ratio(mdm::per_token_elbo(elbo_new, position) -
                      mdm::per_token_elbo(elbo_old, position));
}

RatioValue ratio_meanfield_token(double logp_new, double logp_old) {
    return make_ratio(logp_new - logp_old);
}

RatioValue ratio_meanfield_seq(const std::vector<double>& logp_new,
                               const std::vector<double>& logp_old) {
    if (logp_new.size() != logp_old.size() || logp_new.empty()) {
        throw InputDomainError("ratio_meanfield_seq: mismatched per-token vectors");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < logp_new.size(); ++i) acc += logp_new[i] - logp_old[i];
    return make_ratio(acc / static_cast<double>(logp_new.size()));
}

double clipped_surrogate(double ratio, double advantage, double clip_eps) {
    if (!(clip_eps > 0.0)) throw InputDomainError("clipped_surrogate: epsilon must be positive");
    const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    return std::min(ratio * advantage, clipped * advantage);
}

double kl_k1(double elbo_theta, double elbo_ref) { return elbo_theta - elbo_ref; }

double kl_k2(double elbo_theta, double elbo_ref) {
    const double d = elbo_theta - elbo_ref;
    return 0.5 * d * d;
}

RatioValue kl_k3(double elbo_theta, double elbo_ref) {
    const double d = elbo_ref - elbo_theta;
    RatioValue out;
    out.saturated = std::fabs(d) > kLogRatioSaturation;
    if (d > kLogRatioOverflow) {
        out.value = std::numeric_limits<double>::infinity();
    } else {
        out.value = std::exp(d) - 1.0 - d;
    }
    return out;
}

std::vector<double> group_advantages(const std::vector<double>& rewards) {
    if (rewards.size() < 2) throw InputDomainError("group_advantages: need at least 2 rewards");
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(rewards.size());
    std::vector<double> out(rewards.size());
    for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = rewards[i] - mean;
    return out;
}

// ---------------------------------------------------------------------------
// the differentiable objective
// ---------------------------------------------------------------------------

void CompletionGroup::validate() const {
    if (completions.size() < 2) throw InputDomainError("completion group: need G >= 2");
    double adv_sum = 0.0;
    for (const CachedCompletion& c : completions) {
        c.seq.validate();
        adv_sum += c.advantage;
    }
    if (std::fabs(adv_sum) > 1e-9) {
        throw ConsistencyError("completion group: advantages do not sum to zero");
    }
}

namespace {

nn::NodeId clipped_surrogate_node(nn::Tape& tape, nn::NodeId rho, double advantage,
                                  double eps) {
    nn::NodeId unclipped = tape.s_scale(rho, advantage);
    nn::NodeId clipped = tape.s_scale(tape.s_clip(rho, 1.0 - eps, 1.0 + eps), advantage);
    return tape.s_min(unclipped, clipped);
}

struct RatioStats {
    double sum = 0.0;
    int count = 0;
    int clipped = 0;

    void note(double rho, double eps) {
        sum += rho;
        ++count;
        if (rho < 1.0 - eps || rho > 1.0 + eps) ++clipped;
    }
};

}  // namespace

LossResult espo_loss(nn::Tape& tape, const nn::Denoiser& model, const CompletionGroup& group,
                     const ObjectiveConfig& cfg) {
    cfg.validate();
    group.validate();

    const bool uses_elbo_ratio =
        cfg.variant == Variant::seq_elbo || cfg.variant == Variant::token_elbo;
    const bool uses_meanfield =
        cfg.variant == Variant::seq_meanfield || cfg.variant == Variant::token_meanfield;
    const bool kl_active = cfg.kl != KlTag::none && cfg.beta != 0.0;
    const bool needs_elbo = uses_elbo_ratio || cfg.kl != KlTag::none;

    RatioStats stats;
    double kl_acc = 0.0;
    std::vector<nn::NodeId> objectives;
    std::vector<nn::NodeId> kl_terms;
    objectives.reserve(group.completions.size());

    for (const CachedCompletion& c : group.completions) {
        const int L = c.seq.length();
        const std::vector<int> maskable = c.seq.maskable_positions();
        const int Le = static_cast<int>(maskable.size());
        if (needs_elbo && c.elbo_old.draws.empty()) {
            throw ConsistencyError("espo_loss: old-policy ELBO cache has no recorded draws");
        }
        if (uses_meanfield && c.meanfield_old.size() != static_cast<std::size_t>(L)) {
            throw ConsistencyError("espo_loss: mean-field cache missing or wrong length");
        }
        if (cfg.kl != KlTag::none) {
            if (c.elbo_ref.draws.empty()) {
                throw ConsistencyError("espo_loss: reference ELBO cache has no recorded draws");
            }
            require_shared_draws(c.elbo_old, c.elbo_ref, "espo_loss");
        }

        mdm::ElboGraph theta;
        if (needs_elbo) {
            theta = mdm::elbo_graph(tape, model, c.seq, c.elbo_old.draws, c.elbo_old.form,
                                    cfg.variant == Variant::token_elbo);
        }
        std::vector<nn::NodeId> mf;
        if (uses_meanfield) mf = mdm::meanfield_graph(tape, model, c.seq);

        nn::NodeId obj;
        switch (cfg.variant) {
            case Variant::seq_elbo: {
                nn::NodeId log_r = tape.s_scale(tape.s_shift(theta.total, -c.elbo_old.value),
                                                1.0 / static_cast<double>(Le));
                nn::NodeId rho = tape.s_exp(log_r);
                stats.note(tape.value(rho), cfg.clip_eps);
                obj = clipped_surrogate_node(tape, rho, c.advantage, cfg.clip_eps);
                break;
            }
            case Variant::seq_meanfield: {
                nn::NodeId acc = tape.s_shift(mf[static_cast<std::size_t>(maskable[0])],
                                              -c.meanfield_old[static_cast<std::size_t>(maskable[0])]);
                for (int j = 1; j < Le; ++j) {
                    const auto k = static_cast<std::size_t>(maskable[static_cast<std::size_t>(j)]);
                    acc = tape.s_add(acc, tape.s_shift(mf[k], -c.meanfield_old[k]));
                }
                nn::NodeId rho = tape.s_exp(tape.s_scale(acc, 1.0 / static_cast<double>(Le)));
                stats.note(tape.value(rho), cfg.clip_eps);
                obj = clipped_surrogate_node(tape, rho, c.advantage, cfg.clip_eps);
                break;
            }
            case Variant::token_elbo:
            case Variant::token_meanfield: {
                std::vector<nn::NodeId> token_objs;
                token_objs.reserve(static_cast<std::size_t>(Le));
                for (int kp : maskable) {
                    const auto k = static_cast<std::size_t>(kp);
                    nn::NodeId diff;
                    if (cfg.variant == Variant::token_elbo) {
                        diff = tape.s_shift(theta.per_token[k], -c.elbo_old.per_token[k]);
                    } else {
                        diff = tape.s_shift(mf[k], -c.meanfield_old[k]);
                    }
                    nn::NodeId rho = tape.s_exp(diff);
                    stats.note(tape.value(rho), cfg.clip_eps);
                    token_objs.push_back(
                        clipped_surrogate_node(tape, rho, c.advantage, cfg.clip_eps));
                }
                obj = tape.s_mean(token_objs);
                break;
            }
        }
        objectives.push_back(obj);

        if (cfg.kl != KlTag::none) {
            nn::NodeId d = tape.s_shift(theta.total, -c.elbo_ref.value);  // theta - ref
            nn::NodeId term;
            switch (cfg.kl) {
                case KlTag::k1: term = d; break;
                case KlTag::k2: term = tape.s_scale(tape.s_square(d), 0.5); break;
                case KlTag::k3:
                default: {
                    nn::NodeId neg = tape.s_scale(d, -1.0);       // ref - theta
                    nn::NodeId e = tape.s_exp(neg);
                    term = tape.s_add(tape.s_shift(e, -1.0), neg);
                    break;
                }
            }
            kl_acc += tape.value(term);
            if (kl_active) kl_terms.push_back(term);
        }
    }

    nn::NodeId loss = tape.s_scale(tape.s_mean(objectives), -1.0);
    if (kl_active) {
        loss = tape.s_add(loss, tape.s_scale(tape.s_mean(kl_terms), cfg.beta));
    }

    LossResult out{loss, {}};
    out.diag.mean_ratio = stats.count ? stats.sum / stats.count : 0.0;
    out.diag.clip_frac = stats.count ? static_cast<double>(stats.clipped) / stats.count : 0.0;
    out.diag.kl = group.completions.empty()
                      ? 0.0
                      : kl_acc / static_cast<double>(group.completions.size());
    out.diag.loss = tape.value(loss);
    return out;
}

}  // namespace espo::rl
