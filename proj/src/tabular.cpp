// SPDX-License-Identifier: Apache-2.0
#include "espo/oracle/tabular.hpp"

#include <algorithm>
#include <cmath>

namespace espo::oracle {

std::vector<double> TabularPolicy::log_probs() const {
    if (log_weights.empty()) throw InputDomainError("tabular policy: empty outcome set");
    double mx = log_weights[0];
    for (double w : log_weights) mx = std::max(mx, w);
    double z = 0.0;
    for (double w : log_weights) z += std::exp(w - mx);
    const double lse = mx + std::log(z);
    std::vector<double> out(log_weights.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = log_weights[i] - lse;
    return out;
}

std::vector<double> TabularPolicy::probs() const {
    std::vector<double> out = log_probs();
    for (double& x : out) x = std::exp(x);
    return out;
}

namespace {
void check_same_support(const TabularPolicy& a, const TabularPolicy& b) {
    if (a.log_weights.size() != b.log_weights.size() || a.log_weights.empty()) {
        throw InputDomainError("tabular policies: mismatched outcome sets");
    }
}
}  // namespace

std::vector<double> tabular_kl_grad_expectation(const TabularPolicy& theta,
                                                const TabularPolicy& ref,
                                                KlEstimatorTag estimator) {
    check_same_support(theta, ref);
    const std::vector<double> lp = theta.log_probs();
    const std::vector<double> lq = ref.log_probs();
    const std::vector<double> p = theta.probs();
    const std::size_t n = p.size();

    // Per-sample estimator terms differentiate to c_y * score(y), with
    // score(y) = e_y - pi_theta under the softmax parameterization.
    std::vector<double> c(n);
    for (std::size_t y = 0; y < n; ++y) {
        const double d = lp[y] - lq[y];
        switch (estimator) {
            case KlEstimatorTag::k1: c[y] = 1.0; break;
            case KlEstimatorTag::k2: c[y] = d; break;
            case KlEstimatorTag::k3: c[y] = 1.0 - std::exp(-d); break;
        }
    }

    std::vector<double> grad(n, 0.0);
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t a = 0; a < n; ++a) {
            const double score = (a == y ? 1.0 : 0.0) - p[a];
            grad[a] += p[y] * c[y] * score;
        }
    }
    return grad;
}

std::vector<double> analytic_reverse_kl_grad(const TabularPolicy& theta,
                                             const TabularPolicy& ref) {
    check_same_support(theta, ref);
    const std::vector<double> p = theta.probs();
    const std::vector<double> q = ref.probs();
    std::vector<double> out(p.size());
    for (std::size_t a = 0; a < p.size(); ++a) out[a] = p[a] - q[a];
    return out;
}

std::vector<double> analytic_forward_kl_grad(const TabularPolicy& theta,
                                             const TabularPolicy& ref) {
    check_same_support(theta, ref);
    const std::vector<double> p = theta.probs();
    const std::vector<double> lp = theta.log_probs();
    const std::vector<double> lq = ref.log_probs();
    const double kl = kl_divergence(theta, ref);
    std::vector<double> out(p.size());
    for (std::size_t a = 0; a < p.size(); ++a) out[a] = p[a] * ((lp[a] - lq[a]) - kl);
    return out;
}

double kl_divergence(const TabularPolicy& from, const TabularPolicy& to) {
    check_same_support(from, to);
    const std::vector<double> p = from.probs();
    const std::vector<double> lp = from.log_probs();
    const std::vector<double> lq = to.log_probs();
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += p[i] * (lp[i] - lq[i]);
    return acc;
}

}  // namespace espo::oracle
