// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <map>

#include "espo/mdm/sampler.hpp"
#include "helpers.hpp"

using namespace espo;
using testing::make_tiny;

TEST_CASE("corrupt_t masks at the requested rate and never touches the prompt") {
    nn::Rng rng(1);
    mdm::TokenSequence seq;
    seq.prompt = {2, 3};
    seq.completion.assign(10000, 4);

    SUBCASE("degenerate rate t=1 masks everything") {
        const mdm::MaskedSequence ms = mdm::corrupt_t(seq, 1.0, rng);
        CHECK(ms.positions.size() == 10000);
    }
    SUBCASE("t=0.5 mask count stays within 4 sigma of Binomial(10^4, 1/2)") {
        const mdm::MaskedSequence ms = mdm::corrupt_t(seq, 0.5, rng);
        CHECK(ms.positions.size() >= 4600);
        CHECK(ms.positions.size() <= 5400);
    }
    SUBCASE("seeded rng repeats the same mask") {
        nn::Rng a(42), b(42);
        const auto m1 = mdm::corrupt_t(seq, 0.3, a);
        const auto m2 = mdm::corrupt_t(seq, 0.3, b);
        CHECK(m1.positions == m2.positions);
    }
    SUBCASE("rate domain") {
        CHECK_THROWS_AS(mdm::corrupt_t(seq, 0.0, rng), InputDomainError);
        CHECK_THROWS_AS(mdm::corrupt_t(seq, -0.1, rng), InputDomainError);
        CHECK_THROWS_AS(mdm::corrupt_t(seq, 1.0001, rng), InputDomainError);
    }
    SUBCASE("prompt positions never masked; corrupted sequence applies masks") {
        mdm::TokenSequence small;
        small.prompt = {2, 3};
        small.completion = {4, 5, 4};
        const auto ms = mdm::corrupt_t(small, 1.0, rng);
        const auto tokens = ms.corrupted_full();
        CHECK(tokens[0] == 2);
        CHECK(tokens[1] == 3);
        for (std::size_t i = 2; i < tokens.size(); ++i) CHECK(tokens[i] == nn::kMaskToken);
    }
}

TEST_CASE("corrupt_l draws uniform fixed-size masks") {
    nn::Rng rng(2);
    mdm::TokenSequence seq;
    seq.prompt = {2};
    seq.completion = {3, 4, 5, 3};

    SUBCASE("l = 0 and l = L") {
        CHECK(mdm::corrupt_l(seq, 0, rng).positions.empty());
        CHECK(mdm::corrupt_l(seq, 4, rng).positions.size() == 4);
        CHECK_THROWS_AS(mdm::corrupt_l(seq, 5, rng), InputDomainError);
        CHECK_THROWS_AS(mdm::corrupt_l(seq, -1, rng), InputDomainError);
    }
    SUBCASE("all C(4,2)=6 subsets appear with frequency 1/6 +- 0.01") {
        std::map<std::vector<int>, int> counts;
        const int draws = 60000;
        for (int i = 0; i < draws; ++i) counts[mdm::corrupt_l(seq, 2, rng).positions]++;
        REQUIRE(counts.size() == 6);
        for (const auto& [subset, n] : counts) {
            CHECK(std::fabs(static_cast<double>(n) / draws - 1.0 / 6.0) < 0.01);
        }
    }
}

TEST_CASE("elbo_l: degenerate length, determinism and unbiasedness") {
    nn::Rng rng(5);

    SUBCASE("L = 1 forces l = 1 and has zero variance") {
        auto tiny = make_tiny(1, rng);
        const double direct = [&] {
            std::vector<int> tokens = tiny.seq.full_tokens();
            tokens[2] = nn::kMaskToken;
            const nn::Tensor lp = tiny.model.forward_logprobs(tiny.params, tokens, 2);
            return lp.at(2, static_cast<std::size_t>(tiny.seq.completion[0]));
        }();
        for (std::uint64_t s = 0; s < 5; ++s) {
            nn::Rng r(s);
            const auto est = mdm::elbo_l(tiny.model, tiny.params, tiny.seq, 1, r);
            CHECK(est.value == direct);
        }
    }
    SUBCASE("same seed and draws give the identical estimate") {
        auto tiny = make_tiny(3, rng);
        nn::Rng a(9), b(9);
        const auto e1 = mdm::elbo_l(tiny.model, tiny.params, tiny.seq, 4, a);
        const auto e2 = mdm::elbo_l(tiny.model, tiny.params, tiny.seq, 4, b);
        CHECK(e1.value == e2.value);
        const auto e3 =
            mdm::elbo_l(tiny.model, tiny.params, tiny.seq, 4, a, &e1.draws);
        CHECK(e3.value == e1.value);
    }
    SUBCASE("20k draws agree with the exact enumerated value within 4 SE") {
        auto tiny = make_tiny(3, rng);
        const double exact = oracle::exact_elbo(tiny.model, tiny.params, tiny.seq);
        const int n = 20000;
        std::vector<double> xs(n);
        for (double& x : xs) x = mdm::elbo_l(tiny.model, tiny.params, tiny.seq, 1, rng).value;
        const double mean = testing::sample_mean(xs);
        const double se = std::sqrt(testing::sample_variance(xs) / n);
        CHECK(std::fabs(mean - exact) <= 4.0 * se);
    }
    SUBCASE("m must be positive") {
        auto tiny = make_tiny(2, rng);
        CHECK_THROWS_AS(mdm::elbo_l(tiny.model, tiny.params, tiny.seq, 0, rng),
                        InputDomainError);
    }
}

TEST_CASE("elbo_t: zero-mask draws contribute zero; unbiasedness") {
    nn::Rng rng(6);
    SUBCASE("a draw that masks nothing contributes exactly zero") {
        auto tiny = make_tiny(3, rng);
        std::vector<mdm::MaskDraw> draws(1);
        draws[0].form = mdm::MaskForm::t_form;
        draws[0].t = 0.5;  // but no positions got masked
        const auto est = mdm::elbo_t(tiny.model, tiny.params, tiny.seq, 1, rng, &draws);
        CHECK(est.value == 0.0);
        for (double c : est.per_token) CHECK(c == 0.0);
    }
    SUBCASE("L = 1: both estimators aim at the same value") {
        auto tiny = make_tiny(1, rng);
        const double exact = oracle::exact_elbo(tiny.model, tiny.params, tiny.seq);
        const int n = 20000;
        std::vector<double> xs(n);
        for (double& x : xs) x = mdm::elbo_t(tiny.model, tiny.params, tiny.seq, 1, rng).value;
        const double mean = testing::sample_mean(xs);
        const double se = std::sqrt(testing::sample_variance(xs) / n);
        CHECK(std::fabs(mean - exact) <= 4.0 * se);
    }
    SUBCASE("L = 3: 50k draws agree with the exact value within 4 SE") {
        auto tiny = make_tiny(3, rng);
        const double exact = oracle::exact_elbo(tiny.model, tiny.params, tiny.seq);
        const int n = 50000;
        std::vector<double> xs(n);
        for (double& x : xs) x = mdm::elbo_t(tiny.model, tiny.params, tiny.seq, 1, rng).value;
        const double mean = testing::sample_mean(xs);
        const double se = std::sqrt(testing::sample_variance(xs) / n);
        CHECK(std::fabs(mean - exact) <= 4.0 * se);
    }
}

TEST_CASE("per-token contributions are additive and zero when never masked") {
    nn::Rng rng(7);
    auto tiny = make_tiny(3, rng);

    std::vector<mdm::MaskDraw> draws(2);
    draws[0] = {mdm::MaskForm::l_form, 0.0, 1, {0}};
    draws[1] = {mdm::MaskForm::l_form, 0.0, 2, {0, 2}};
    const auto est =
        mdm::replay_elbo(tiny.model, tiny.params, tiny.seq, draws, mdm::EstimatorForm::l_form);
    CHECK(mdm::per_token_elbo(est, 1) == 0.0);  // position 1 never masked
    double sum = 0.0;
    for (int k = 0; k < 3; ++k) sum += mdm::per_token_elbo(est, k);
    CHECK(std::fabs(sum - est.value) < 1e-9);
    CHECK_THROWS_AS(mdm::per_token_elbo(est, 3), InputDomainError);
    CHECK_THROWS_AS(mdm::per_token_elbo(est, -1), InputDomainError);
}

TEST_CASE("L=2 full draw enumeration reproduces the hand-expanded estimator") {
    nn::Rng rng(8);
    auto tiny = make_tiny(2, rng);
    const int P = 2;

    auto masked_lp = [&](std::vector<int> mask_positions) {
        std::vector<int> tokens = tiny.seq.full_tokens();
        for (int p : mask_positions) tokens[static_cast<std::size_t>(P + p)] = nn::kMaskToken;
        return tiny.model.forward_logprobs(tiny.params, tokens, P);
    };
    const double lp0_alone =
        masked_lp({0}).at(2, static_cast<std::size_t>(tiny.seq.completion[0]));
    const double lp1_alone =
        masked_lp({1}).at(3, static_cast<std::size_t>(tiny.seq.completion[1]));
    const nn::Tensor both = masked_lp({0, 1});
    const double lp0_both = both.at(2, static_cast<std::size_t>(tiny.seq.completion[0]));
    const double lp1_both = both.at(3, static_cast<std::size_t>(tiny.seq.completion[1]));

    // Draw multiset matching the sampling distribution: each size-1 mask with
    // weight 1/4, the full mask with weight 1/2.
    std::vector<mdm::MaskDraw> draws = {
        {mdm::MaskForm::l_form, 0.0, 1, {0}},
        {mdm::MaskForm::l_form, 0.0, 1, {1}},
        {mdm::MaskForm::l_form, 0.0, 2, {0, 1}},
        {mdm::MaskForm::l_form, 0.0, 2, {0, 1}},
    };
    const auto est =
        mdm::replay_elbo(tiny.model, tiny.params, tiny.seq, draws, mdm::EstimatorForm::l_form);

    const double expect_tok0 = 0.5 * (lp0_alone + lp0_both);
    const double expect_tok1 = 0.5 * (lp1_alone + lp1_both);
    CHECK(mdm::per_token_elbo(est, 0) == doctest::Approx(expect_tok0).epsilon(1e-12));
    CHECK(mdm::per_token_elbo(est, 1) == doctest::Approx(expect_tok1).epsilon(1e-12));

    const double exact = oracle::exact_elbo(tiny.model, tiny.params, tiny.seq);
    CHECK(est.value == doctest::Approx(exact).epsilon(1e-12));
}

TEST_CASE("pad tokens are excluded from corruption and estimator sums") {
    nn::Rng rng(17);
    auto tiny = make_tiny(3, rng);
    tiny.seq.completion.push_back(nn::kPadToken);
    CHECK(tiny.seq.effective_length() == 3);

    const auto ms = mdm::corrupt_t(tiny.seq, 1.0, rng);
    CHECK(ms.positions == std::vector<int>{0, 1, 2});

    const auto est = mdm::elbo_l(tiny.model, tiny.params, tiny.seq, 3, rng);
    CHECK(est.per_token.size() == 4);
    CHECK(est.per_token[3] == 0.0);
}

TEST_CASE("sampler: step counts, determinism, block order, termination") {
    nn::Rng rng(9);

    SUBCASE("L=256 at two tokens per step takes exactly 128 steps") {
        mdm::SamplerConfig cfg;
        cfg.tokens_per_step = 2;
        CHECK(cfg.steps_for(256) == 128);

        nn::DenoiserConfig mc;
        mc.vocab_size = 6;
        mc.width = 8;
        mc.layers = 1;
        mc.heads = 2;
        mc.max_seq_len = 258;
        nn::Denoiser model(mc);
        nn::ParameterSet params = model.init_params(rng);
        const std::vector<int> prompt = {2, 3};
        mdm::SampleTrace trace;
        const auto seq = mdm::sample(model, params, prompt, 256, cfg, rng, &trace);
        CHECK(trace.committed.size() == 128);
        for (int tok : seq.completion) CHECK(tok != nn::kMaskToken);
    }

    SUBCASE("temperature 0 is greedy: output independent of the seed") {
        auto tiny = make_tiny(4, rng);
        mdm::SamplerConfig cfg;
        cfg.tokens_per_step = 1;
        cfg.temperature = 0.0;
        nn::Rng a(1), b(999);
        const auto s1 = mdm::sample(tiny.model, tiny.params, tiny.seq.prompt, 4, cfg, a);
        const auto s2 = mdm::sample(tiny.model, tiny.params, tiny.seq.prompt, 4, cfg, b);
        CHECK(s1.completion == s2.completion);
    }

    SUBCASE("semi-autoregressive blocks complete left to right") {
        auto tiny = make_tiny(8, rng);
        mdm::SamplerConfig cfg;
        cfg.tokens_per_step = 1;
        cfg.block_length = 4;
        cfg.temperature = 0.7;
        mdm::SampleTrace trace;
        mdm::sample(tiny.model, tiny.params, tiny.seq.prompt, 8, cfg, rng, &trace);
        CHECK(trace.committed.size() == 8);
        for (std::size_t step = 0; step < 4; ++step) {
            for (int p : trace.committed[step]) CHECK(p < 4);
        }
        for (std::size_t step = 4; step < 8; ++step) {
            for (int p : trace.committed[step]) CHECK(p >= 4);
        }
    }

    SUBCASE("block length must divide or cap at L") {
        mdm::SamplerConfig cfg;
        cfg.block_length = 3;
        CHECK_THROWS_AS(cfg.validate(8), InputDomainError);
        cfg.block_length = 4;
        CHECK_NOTHROW(cfg.validate(8));
        cfg.block_length = 16;  // caps at L
        CHECK_NOTHROW(cfg.validate(8));
        CHECK(cfg.steps_for(8) == 8);
    }

    SUBCASE("positive temperature is reproducible under a fixed seed") {
        auto tiny = make_tiny(4, rng);
        mdm::SamplerConfig cfg;
        cfg.tokens_per_step = 2;
        cfg.temperature = 0.9;
        nn::Rng a(5), b(5);
        const auto s1 = mdm::sample(tiny.model, tiny.params, tiny.seq.prompt, 4, cfg, a);
        const auto s2 = mdm::sample(tiny.model, tiny.params, tiny.seq.prompt, 4, cfg, b);
        CHECK(s1.completion == s2.completion);
    }
}
