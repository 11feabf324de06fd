// SPDX-License-Identifier: Apache-2.0
#include "espo/oracle/exact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace espo::oracle {

namespace {

double binomial(int n, int k) {
    double v = 1.0;
    for (int i = 1; i <= k; ++i) v = v * static_cast<double>(n - k + i) / static_cast<double>(i);
    return v;
}

int popcount(unsigned m) {
    int c = 0;
    while (m) {
        m &= m - 1;
        ++c;
    }
    return c;
}

// Masked log-prob of the true token at every universe position selected by
// `mask_bits` (bit i <-> universe[i]), floored per the oracle numeric guard.
double masked_sum(const nn::Denoiser& model, const nn::ParameterSet& params,
                  const mdm::TokenSequence& seq, const std::vector<int>& universe,
                  unsigned mask_bits) {
    const int P = static_cast<int>(seq.prompt.size());
    std::vector<int> tokens = seq.full_tokens();
    for (std::size_t i = 0; i < universe.size(); ++i) {
        if (mask_bits & (1u << i)) {
            tokens[static_cast<std::size_t>(P + universe[i])] = nn::kMaskToken;
        }
    }
    const nn::Tensor lp = model.forward_logprobs(params, tokens, P);
    double acc = 0.0;
    for (std::size_t i = 0; i < universe.size(); ++i) {
        if (mask_bits & (1u << i)) {
            const int p = universe[i];
            acc += std::max(lp.at(static_cast<std::size_t>(P + p),
                                  static_cast<std::size_t>(seq.completion[p])),
                            kOracleLogFloor);
        }
    }
    return acc;
}

}  // namespace

double exact_elbo(const nn::Denoiser& model, const nn::ParameterSet& params,
                  const mdm::TokenSequence& seq) {
    seq.validate();
    const std::vector<int> universe = seq.maskable_positions();
    const int L = static_cast<int>(universe.size());
    if (L > kMaxElboEnumLength) throw CapacityError("exact_elbo: L exceeds enumeration cap");

    double acc = 0.0;
    for (unsigned m = 1; m < (1u << L); ++m) {
        const int l = popcount(m);
        const double weight = 1.0 / (static_cast<double>(l) * binomial(L, l));
        acc += weight * masked_sum(model, params, seq, universe, m);
    }
    return acc;
}

double exact_elbo_tform(const nn::Denoiser& model, const nn::ParameterSet& params,
                        const mdm::TokenSequence& seq, int nodes) {
    seq.validate();
    const std::vector<int> universe = seq.maskable_positions();
    const int L = static_cast<int>(universe.size());
    if (L > kMaxElboEnumLength) throw CapacityError("exact_elbo_tform: L exceeds enumeration cap");
    if (nodes < 2) throw InputDomainError("exact_elbo_tform: need at least 2 intervals");
    if (nodes % 2 != 0) ++nodes;

    // Group subset sums by mask size; the rate marginal only depends on it.
    std::vector<double> by_size(static_cast<std::size_t>(L) + 1, 0.0);
    for (unsigned m = 1; m < (1u << L); ++m) {
        by_size[static_cast<std::size_t>(popcount(m))] +=
            masked_sum(model, params, seq, universe, m);
    }

    // Integrand after marginalizing masks at rate t:
    //   I(t) = sum_l t^(l-1) (1-t)^(L-l) W_l,  a polynomial in t.
    auto integrand = [&](double t) {
        double acc = 0.0;
        for (int l = 1; l <= L; ++l) {
            double term = by_size[static_cast<std::size_t>(l)];
            for (int i = 0; i < l - 1; ++i) term *= t;
            for (int i = 0; i < L - l; ++i) term *= 1.0 - t;
            acc += term;
        }
        return acc;
    };

    const double h = 1.0 / static_cast<double>(nodes);
    double acc = integrand(0.0) + integrand(1.0);
    for (int i = 1; i < nodes; ++i) {
        acc += integrand(h * static_cast<double>(i)) * (i % 2 == 1 ? 4.0 : 2.0);
    }
    return acc * h / 3.0;
}

double exact_loglik(const nn::Denoiser& model, const nn::ParameterSet& params,
                    const mdm::TokenSequence& seq) {
    seq.validate();
    const std::vector<int> universe = seq.maskable_positions();
    const int L = static_cast<int>(universe.size());
    if (L > kMaxLoglikEnumLength) throw CapacityError("exact_loglik: L exceeds enumeration cap");
    const int P = static_cast<int>(seq.prompt.size());

    // Conditional log-probs given each revealed subset (complement masked).
    const unsigned full = (1u << L) - 1;
    std::vector<std::vector<double>> cond(
        1u << L, std::vector<double>(static_cast<std::size_t>(L), 0.0));
    for (unsigned revealed = 0; revealed < full; ++revealed) {
        std::vector<int> tokens = seq.full_tokens();
        for (int i = 0; i < L; ++i) {
            if (!(revealed & (1u << i))) {
                tokens[static_cast<std::size_t>(P + universe[static_cast<std::size_t>(i)])] =
                    nn::kMaskToken;
            }
        }
        const nn::Tensor lp = model.forward_logprobs(params, tokens, P);
        for (int i = 0; i < L; ++i) {
            if (!(revealed & (1u << i))) {
                const int p = universe[static_cast<std::size_t>(i)];
                cond[revealed][static_cast<std::size_t>(i)] =
                    std::max(lp.at(static_cast<std::size_t>(P + p),
                                   static_cast<std::size_t>(seq.completion[p])),
                             kOracleLogFloor);
            }
        }
    }

    // g(S) = log sum over orders revealing exactly S of the stepwise product.
    std::vector<double> g(1u << L, -std::numeric_limits<double>::infinity());
    g[0] = 0.0;
    for (unsigned s = 1; s <= full; ++s) {
        double mx = -std::numeric_limits<double>::infinity();
        std::vector<double> terms;
        for (int i = 0; i < L; ++i) {
            if (!(s & (1u << i))) continue;
            const unsigned prev = s & ~(1u << i);
            const double t = g[prev] + cond[prev][static_cast<std::size_t>(i)];
            terms.push_back(t);
            mx = std::max(mx, t);
        }
        double z = 0.0;
        for (double t : terms) z += std::exp(t - mx);
        g[s] = mx + std::log(z);
    }

    double log_factorial = 0.0;
    for (int i = 2; i <= L; ++i) log_factorial += std::log(static_cast<double>(i));
    return g[full] - log_factorial;
}

}  // namespace espo::oracle
