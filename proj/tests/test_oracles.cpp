// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "espo/oracle/tabular.hpp"
#include "helpers.hpp"

using namespace espo;
using testing::make_tiny;

TEST_CASE("exact_elbo degenerate and hand-expanded cases") {
    nn::Rng rng(31);

    SUBCASE("L = 1 equals the single masked log-prob") {
        auto tiny = make_tiny(1, rng);
        std::vector<int> tokens = tiny.seq.full_tokens();
        tokens[2] = nn::kMaskToken;
        const nn::Tensor lp = tiny.model.forward_logprobs(tiny.params, tokens, 2);
        const double direct = lp.at(2, static_cast<std::size_t>(tiny.seq.completion[0]));
        CHECK(oracle::exact_elbo(tiny.model, tiny.params, tiny.seq) == direct);
    }

    SUBCASE("L = 2 equals the hand expansion over the three masks") {
        auto tiny = make_tiny(2, rng);
        auto masked_lp = [&](std::vector<int> mask) {
            std::vector<int> tokens = tiny.seq.full_tokens();
            for (int p : mask) tokens[static_cast<std::size_t>(2 + p)] = nn::kMaskToken;
            return tiny.model.forward_logprobs(tiny.params, tokens, 2);
        };
        const double lp0 = masked_lp({0}).at(2, static_cast<std::size_t>(tiny.seq.completion[0]));
        const double lp1 = masked_lp({1}).at(3, static_cast<std::size_t>(tiny.seq.completion[1]));
        const nn::Tensor both = masked_lp({0, 1});
        const double lp0b = both.at(2, static_cast<std::size_t>(tiny.seq.completion[0]));
        const double lp1b = both.at(3, static_cast<std::size_t>(tiny.seq.completion[1]));
        // l=1 (prob 1/2, masks each with prob 1/2, weight L/l=2) and l=2
        // (weight 1): 1/2*(1/2*2*lp0 + 1/2*2*lp1) + 1/2*(lp0b+lp1b).
        const double hand = 0.5 * (lp0 + lp1) + 0.5 * (lp0b + lp1b);
        CHECK(oracle::exact_elbo(tiny.model, tiny.params, tiny.seq) ==
              doctest::Approx(hand).epsilon(1e-12));
    }

    SUBCASE("enumeration cap") {
        auto tiny = make_tiny(9, rng);
        CHECK_THROWS_AS(oracle::exact_elbo(tiny.model, tiny.params, tiny.seq), CapacityError);
    }
}

TEST_CASE("exact_elbo agrees with a large Monte Carlo cross-check") {
    nn::Rng rng(32);
    auto tiny = make_tiny(2, rng);
    const double exact = oracle::exact_elbo(tiny.model, tiny.params, tiny.seq);
    const int n = 1000000;
    double acc = 0.0, acc2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = mdm::elbo_l(tiny.model, tiny.params, tiny.seq, 1, rng).value;
        acc += x;
        acc2 += x * x;
    }
    const double mean = acc / n;
    const double var = (acc2 / n - mean * mean) * n / (n - 1.0);
    const double se = std::sqrt(var / n);
    CHECK(std::fabs(mean - exact) <= 4.0 * se);
}

TEST_CASE("exact_loglik: degenerate cases and the variational bound") {
    nn::Rng rng(33);

    SUBCASE("L = 1: log-likelihood equals the ELBO exactly") {
        auto tiny = make_tiny(1, rng);
        CHECK(oracle::exact_loglik(tiny.model, tiny.params, tiny.seq) ==
              oracle::exact_elbo(tiny.model, tiny.params, tiny.seq));
    }

    SUBCASE("position-independent denoiser collapses all orders") {
        auto tiny = make_tiny(3, rng);
        // Zero every array, then set the head bias: logits become a constant
        // row, so conditionals ignore context entirely.
        for (const std::string& name : tiny.params.names()) {
            nn::Tensor& t = tiny.params.mutate(name);
            for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.0;
        }
        nn::Tensor& hb = tiny.params.mutate("head.b");
        for (std::size_t i = 0; i < hb.size(); ++i) hb[i] = 0.3 * static_cast<double>(i);

        const nn::Tensor lp =
            tiny.model.forward_logprobs(tiny.params, tiny.seq.full_tokens(), 2);
        double indep = 0.0;
        for (int p = 0; p < 3; ++p) {
            indep += lp.at(static_cast<std::size_t>(2 + p),
                           static_cast<std::size_t>(tiny.seq.completion[p]));
        }
        const double loglik = oracle::exact_loglik(tiny.model, tiny.params, tiny.seq);
        CHECK(loglik == doctest::Approx(indep).epsilon(1e-10));
        CHECK(oracle::exact_elbo(tiny.model, tiny.params, tiny.seq) ==
              doctest::Approx(loglik).epsilon(1e-10));
    }

    SUBCASE("random models: bound holds and the subset DP matches order enumeration") {
        for (int i = 0; i < 5; ++i) {
            auto tiny = make_tiny(3, rng);
            const double elbo = oracle::exact_elbo(tiny.model, tiny.params, tiny.seq);
            const double loglik = oracle::exact_loglik(tiny.model, tiny.params, tiny.seq);
            CHECK(loglik >= elbo);
            const double by_orders =
                testing::loglik_by_order_enumeration(tiny.model, tiny.params, tiny.seq);
            CHECK(loglik == doctest::Approx(by_orders).epsilon(1e-9));
        }
    }

    SUBCASE("enumeration cap") {
        auto tiny = make_tiny(6, rng);
        CHECK_THROWS_AS(oracle::exact_loglik(tiny.model, tiny.params, tiny.seq), CapacityError);
    }
}

TEST_CASE("rate-integral form of the exact ELBO matches the discrete enumeration") {
    nn::Rng rng(34);
    for (int i = 0; i < 5; ++i) {
        auto tiny = make_tiny(3, rng);
        const double discrete = oracle::exact_elbo(tiny.model, tiny.params, tiny.seq);
        const double integral = oracle::exact_elbo_tform(tiny.model, tiny.params, tiny.seq, 10000);
        CHECK(std::fabs(discrete - integral) < 1e-3);
    }
}

TEST_CASE("tabular policy softmax satisfies the simplex invariant") {
    nn::Rng rng(35);
    for (int i = 0; i < 20; ++i) {
        oracle::TabularPolicy p;
        for (int j = 0; j < 5; ++j) p.log_weights.push_back(rng.normal(0.0, 3.0));
        double z = 0.0;
        for (double v : p.probs()) z += v;
        CHECK(std::fabs(z - 1.0) < 1e-12);
    }
    oracle::TabularPolicy empty;
    CHECK_THROWS_AS(empty.probs(), InputDomainError);
}

TEST_CASE("detached-gradient expectations of the three KL estimators") {
    nn::Rng rng(36);

    SUBCASE("k1: the score-function identity gives an exactly zero expectation") {
        for (int i = 0; i < 50; ++i) {
            oracle::TabularPolicy theta, ref;
            const int n = 2 + static_cast<int>(rng.uniform_int(5));
            for (int j = 0; j < n; ++j) {
                theta.log_weights.push_back(rng.normal(0.0, 2.0));
                ref.log_weights.push_back(rng.normal(0.0, 2.0));
            }
            const auto g =
                oracle::tabular_kl_grad_expectation(theta, ref, oracle::KlEstimatorTag::k1);
            for (double v : g) CHECK(std::fabs(v) <= 1e-12);
        }
    }

    SUBCASE("k2 at theta == ref is exactly zero") {
        oracle::TabularPolicy theta;
        theta.log_weights = {0.3, -0.2, 1.1};
        const auto g = oracle::tabular_kl_grad_expectation(theta, theta,
                                                           oracle::KlEstimatorTag::k2);
        for (double v : g) CHECK(v == 0.0);
    }

    SUBCASE("k2 equals the closed-form forward-KL gradient") {
        for (int i = 0; i < 50; ++i) {
            oracle::TabularPolicy theta, ref;
            const int n = 2 + static_cast<int>(rng.uniform_int(5));
            for (int j = 0; j < n; ++j) {
                theta.log_weights.push_back(rng.normal(0.0, 1.5));
                ref.log_weights.push_back(rng.normal(0.0, 1.5));
            }
            const auto g =
                oracle::tabular_kl_grad_expectation(theta, ref, oracle::KlEstimatorTag::k2);
            // Closed form, expanded independently: pi_a d_a - pi_a sum_y pi_y d_y.
            const auto p = theta.probs();
            const auto lp = theta.log_probs();
            const auto lq = ref.log_probs();
            double mean_d = 0.0;
            for (int a = 0; a < n; ++a) mean_d += p[static_cast<std::size_t>(a)] * (lp[static_cast<std::size_t>(a)] - lq[static_cast<std::size_t>(a)]);
            for (int a = 0; a < n; ++a) {
                const auto ai = static_cast<std::size_t>(a);
                const double closed = p[ai] * ((lp[ai] - lq[ai]) - mean_d);
                const double denom = std::max({std::fabs(closed), std::fabs(g[ai]), 1e-30});
                CHECK(std::fabs(g[ai] - closed) / denom <= 1e-10);
            }
            const auto fwd = oracle::analytic_forward_kl_grad(theta, ref);
            for (int a = 0; a < n; ++a) {
                CHECK(g[static_cast<std::size_t>(a)] ==
                      doctest::Approx(fwd[static_cast<std::size_t>(a)]).epsilon(1e-10));
            }
        }
    }

    SUBCASE("k3 equals the analytic reverse-KL gradient") {
        for (int i = 0; i < 50; ++i) {
            oracle::TabularPolicy theta, ref;
            for (int j = 0; j < 3; ++j) {
                theta.log_weights.push_back(rng.normal(0.0, 1.5));
                ref.log_weights.push_back(rng.normal(0.0, 1.5));
            }
            const auto g =
                oracle::tabular_kl_grad_expectation(theta, ref, oracle::KlEstimatorTag::k3);
            const auto rev = oracle::analytic_reverse_kl_grad(theta, ref);
            for (int a = 0; a < 3; ++a) {
                const auto ai = static_cast<std::size_t>(a);
                const double denom = std::max({std::fabs(rev[ai]), std::fabs(g[ai]), 1e-12});
                CHECK(std::fabs(g[ai] - rev[ai]) / denom <= 1e-8);
            }
        }
    }

    SUBCASE("mismatched outcome sets are rejected") {
        oracle::TabularPolicy a, b;
        a.log_weights = {0.0, 1.0};
        b.log_weights = {0.0, 1.0, 2.0};
        CHECK_THROWS_AS(oracle::tabular_kl_grad_expectation(a, b, oracle::KlEstimatorTag::k1),
                        InputDomainError);
    }
}
