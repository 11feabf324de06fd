// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "espo/vr/coupled.hpp"
#include "helpers.hpp"

using namespace espo;
using testing::make_tiny;

TEST_CASE("coupled draws partition the positions") {
    nn::Rng rng(60);
    mdm::TokenSequence seq;
    seq.prompt = {2};
    seq.completion = {3, 4, 5, 3, 4};

    for (int i = 0; i < 200; ++i) {
        const vr::CoupledDraw d = vr::draw_coupled(seq, rng);
        CHECK(d.primary.positions.size() + d.complement.positions.size() == 5);
        std::vector<bool> seen(5, false);
        for (int p : d.primary.positions) {
            CHECK_FALSE(seen[static_cast<std::size_t>(p)]);
            seen[static_cast<std::size_t>(p)] = true;
        }
        for (int p : d.complement.positions) {
            CHECK_FALSE(seen[static_cast<std::size_t>(p)]);
            seen[static_cast<std::size_t>(p)] = true;
        }
        for (bool s : seen) CHECK(s);
        if (d.l == 0) CHECK(d.primary.positions.empty());
        if (d.l == 5) CHECK(d.complement.positions.empty());
    }
}

TEST_CASE("coupled estimator: exact at L=1, unbiased, deterministic") {
    nn::Rng rng(61);

    SUBCASE("L = 1 collapses to the masked log-prob with zero variance") {
        auto tiny = make_tiny(1, rng);
        std::vector<int> tokens = tiny.seq.full_tokens();
        tokens[2] = nn::kMaskToken;
        const double direct = tiny.model.forward_logprobs(tiny.params, tokens, 2)
                                  .at(2, static_cast<std::size_t>(tiny.seq.completion[0]));
        for (std::uint64_t s = 0; s < 6; ++s) {
            nn::Rng r(s);
            const auto est = vr::coupled_elbo(tiny.model, tiny.params, tiny.seq, 1, r);
            CHECK(est.value == direct);
        }
    }
    SUBCASE("20k pairs agree with the exact enumerated value within 4 SE") {
        auto tiny = make_tiny(3, rng);
        const double exact = oracle::exact_elbo(tiny.model, tiny.params, tiny.seq);
        const int n = 20000;
        std::vector<double> xs(static_cast<std::size_t>(n));
        for (double& x : xs) {
            x = vr::coupled_elbo(tiny.model, tiny.params, tiny.seq, 1, rng).value;
        }
        const double mean = testing::sample_mean(xs);
        const double se = std::sqrt(testing::sample_variance(xs) / n);
        CHECK(std::fabs(mean - exact) <= 4.0 * se);
    }
    SUBCASE("fixed seed reproduces the estimate") {
        auto tiny = make_tiny(3, rng);
        nn::Rng a(7), b(7);
        CHECK(vr::coupled_elbo(tiny.model, tiny.params, tiny.seq, 3, a).value ==
              vr::coupled_elbo(tiny.model, tiny.params, tiny.seq, 3, b).value);
    }
    SUBCASE("every position contributes in every pair") {
        auto tiny = make_tiny(4, rng);
        const auto est = vr::coupled_elbo(tiny.model, tiny.params, tiny.seq, 1, rng);
        for (int k = 0; k < 4; ++k) CHECK(mdm::per_token_elbo(est, k) != 0.0);
    }
}

TEST_CASE("antithetic differences cancel, flip sign, and cut variance") {
    nn::Rng rng(62);

    SUBCASE("identical parameter sets difference to exactly zero") {
        auto tiny = make_tiny(3, rng);
        for (std::uint64_t s = 0; s < 10; ++s) {
            nn::Rng r(s);
            const auto d =
                vr::antithetic_diff(tiny.model, tiny.params, tiny.params, tiny.seq, 2, r);
            CHECK(d.diff == 0.0);
        }
    }
    SUBCASE("swapping the arguments negates the difference bit for bit") {
        auto tiny = make_tiny(3, rng);
        nn::ParameterSet other = nn::ParameterSet::zeros_like(tiny.params);
        other.axpy(1.0, tiny.params);
        for (const auto& name : other.names()) {
            nn::Tensor& t = other.mutate(name);
            for (std::size_t i = 0; i < t.size(); ++i) t[i] += 0.05 * rng.normal();
        }
        nn::Rng a(3), b(3);
        const auto fwd = vr::antithetic_diff(tiny.model, tiny.params, other, tiny.seq, 2, a);
        const auto bak = vr::antithetic_diff(tiny.model, other, tiny.params, tiny.seq, 2, b);
        CHECK(fwd.diff == -bak.diff);
    }
    SUBCASE("shared draws beat independent draws on most tiny instances") {
        int wins = 0;
        const int instances = 10, reps = 400;
        for (int i = 0; i < instances; ++i) {
            auto tiny = make_tiny(3, rng);
            nn::ParameterSet other = nn::ParameterSet::zeros_like(tiny.params);
            other.axpy(1.0, tiny.params);
            for (const auto& name : other.names()) {
                nn::Tensor& t = other.mutate(name);
                for (std::size_t j = 0; j < t.size(); ++j) t[j] += 0.1 * rng.normal();
            }
            std::vector<double> shared, indep;
            for (int r = 0; r < reps; ++r) {
                shared.push_back(
                    vr::antithetic_diff(tiny.model, tiny.params, other, tiny.seq, 1, rng).diff);
                const double ea =
                    vr::coupled_elbo(tiny.model, tiny.params, tiny.seq, 1, rng).value;
                const double eb = vr::coupled_elbo(tiny.model, other, tiny.seq, 1, rng).value;
                indep.push_back(ea - eb);
            }
            if (testing::sample_variance(shared) <= testing::sample_variance(indep)) ++wins;
        }
        CHECK(wins >= 8);
    }
    SUBCASE("a coupled pair beats an independent pair of the same one-sided loss") {
        int wins = 0;
        const int instances = 10, reps = 400;
        for (int i = 0; i < instances; ++i) {
            auto tiny = make_tiny(3, rng);
            std::vector<double> coupled, indep;
            for (int r = 0; r < reps; ++r) {
                coupled.push_back(
                    vr::coupled_elbo(tiny.model, tiny.params, tiny.seq, 1, rng).value);
                indep.push_back(
                    vr::uncoupled_pair_elbo(tiny.model, tiny.params, tiny.seq, 1, rng).value);
            }
            if (testing::sample_variance(coupled) <= testing::sample_variance(indep)) ++wins;
        }
        CHECK(wins >= 7);
    }

    SUBCASE("the uncoupled control is unbiased for the same value") {
        auto tiny = make_tiny(3, rng);
        const double exact = oracle::exact_elbo(tiny.model, tiny.params, tiny.seq);
        const int n = 20000;
        std::vector<double> xs(static_cast<std::size_t>(n));
        for (double& x : xs) {
            x = vr::uncoupled_pair_elbo(tiny.model, tiny.params, tiny.seq, 1, rng).value;
        }
        const double mean = testing::sample_mean(xs);
        const double se = std::sqrt(testing::sample_variance(xs) / n);
        CHECK(std::fabs(mean - exact) <= 4.0 * se);
    }
}
