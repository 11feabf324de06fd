// SPDX-License-Identifier: Apache-2.0
//
// Shared fixtures plus independent re-implementations used as oracles. The
// straight-line forward pass and the order-enumeration likelihood here are
// deliberately written from scratch so they can catch bugs in the production
// graph versions.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "espo/mdm/elbo.hpp"
#include "espo/oracle/exact.hpp"
#include "espo/substrate/denoiser.hpp"

namespace espo::testing {

struct TinySetup {
    nn::DenoiserConfig cfg;
    nn::Denoiser model;
    nn::ParameterSet params;
    mdm::TokenSequence seq;
};

inline TinySetup make_tiny(int completion_length, nn::Rng& rng, int vocab = 6, int width = 8,
                           int layers = 1, int heads = 2) {
    nn::DenoiserConfig cfg;
    cfg.vocab_size = vocab;
    cfg.width = width;
    cfg.layers = layers;
    cfg.heads = heads;
    cfg.max_seq_len = 16 + completion_length;
    nn::Denoiser model(cfg);
    nn::ParameterSet params = model.init_params(rng);
    for (const std::string& name : params.names()) {
        nn::Tensor& t = params.mutate(name);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] += 0.3 * rng.normal();
    }
    mdm::TokenSequence seq;
    seq.prompt = {2, 3};
    for (int i = 0; i < completion_length; ++i) {
        seq.completion.push_back(2 + static_cast<int>(rng.uniform_int(
                                         static_cast<std::uint64_t>(vocab - 2))));
    }
    return {cfg, std::move(model), std::move(params), std::move(seq)};
}

// ---------------------------------------------------------------------------
// independent straight-line forward pass (no tape, its own loops)
// ---------------------------------------------------------------------------

using Mat = std::vector<std::vector<double>>;

inline Mat reference_forward(const nn::DenoiserConfig& cfg, const nn::ParameterSet& ps,
                             const std::vector<int>& tokens) {
    const int T = static_cast<int>(tokens.size());
    const int W = cfg.width;
    const int V = cfg.vocab_size;
    const int H = cfg.heads;
    const int D = W / H;

    auto get = [&](const std::string& n) -> const nn::Tensor& { return ps.at(n); };

    Mat x(static_cast<std::size_t>(T), std::vector<double>(static_cast<std::size_t>(W)));
    for (int t = 0; t < T; ++t) {
        for (int w = 0; w < W; ++w) {
            x[t][w] = get("tok_embed").at(static_cast<std::size_t>(tokens[t]),
                                          static_cast<std::size_t>(w));
            if (cfg.positional) {
                x[t][w] += get("pos_embed").at(static_cast<std::size_t>(t),
                                               static_cast<std::size_t>(w));
            }
        }
    }

    auto layer_norm = [&](const Mat& in, const nn::Tensor& g, const nn::Tensor& b) {
        Mat out = in;
        for (std::size_t r = 0; r < in.size(); ++r) {
            double mu = 0;
            for (double v : in[r]) mu += v;
            mu /= W;
            double var = 0;
            for (double v : in[r]) var += (v - mu) * (v - mu);
            var /= W;
            const double inv = 1.0 / std::sqrt(var + 1e-5);
            for (int w = 0; w < W; ++w) out[r][w] = g[static_cast<std::size_t>(w)] * ((in[r][w] - mu) * inv) + b[static_cast<std::size_t>(w)];
        }
        return out;
    };
    auto affine = [&](const Mat& in, const nn::Tensor& wm, const nn::Tensor& bias) {
        const std::size_t O = wm.cols();
        Mat out(in.size(), std::vector<double>(O, 0.0));
        for (std::size_t r = 0; r < in.size(); ++r) {
            for (std::size_t k = 0; k < in[r].size(); ++k) {
                for (std::size_t o = 0; o < O; ++o) out[r][o] += in[r][k] * wm.at(k, o);
            }
            for (std::size_t o = 0; o < O; ++o) out[r][o] += bias[o];
        }
        return out;
    };

    for (int l = 0; l < cfg.layers; ++l) {
        const std::string p = "l" + std::to_string(l) + ".";
        const Mat h = layer_norm(x, get(p + "ln1.g"), get(p + "ln1.b"));
        const Mat q = affine(h, get(p + "attn.wq"), get(p + "attn.bq"));
        const Mat k = affine(h, get(p + "attn.wk"), get(p + "attn.bk"));
        const Mat v = affine(h, get(p + "attn.wv"), get(p + "attn.bv"));
        Mat attn_out(static_cast<std::size_t>(T), std::vector<double>(static_cast<std::size_t>(W), 0.0));
        for (int head = 0; head < H; ++head) {
            const int off = head * D;
            for (int i = 0; i < T; ++i) {
                std::vector<double> s(static_cast<std::size_t>(T), 0.0);
                double mx = -1e300;
                for (int j = 0; j < T; ++j) {
                    for (int d = 0; d < D; ++d) s[j] += q[i][off + d] * k[j][off + d];
                    s[j] /= std::sqrt(static_cast<double>(D));
                    mx = std::max(mx, s[j]);
                }
                double z = 0;
                for (int j = 0; j < T; ++j) z += std::exp(s[j] - mx);
                for (int j = 0; j < T; ++j) {
                    const double a = std::exp(s[j] - mx) / z;
                    for (int d = 0; d < D; ++d) attn_out[i][off + d] += a * v[j][off + d];
                }
            }
        }
        const Mat o = affine(attn_out, get(p + "attn.wo"), get(p + "attn.bo"));
        for (int t = 0; t < T; ++t) {
            for (int w = 0; w < W; ++w) x[t][w] += o[t][w];
        }
        Mat m = layer_norm(x, get(p + "ln2.g"), get(p + "ln2.b"));
        m = affine(m, get(p + "mlp.w1"), get(p + "mlp.b1"));
        for (auto& row : m) {
            for (double& v2 : row) v2 = 0.5 * v2 * (1.0 + std::erf(v2 / std::sqrt(2.0)));
        }
        m = affine(m, get(p + "mlp.w2"), get(p + "mlp.b2"));
        for (int t = 0; t < T; ++t) {
            for (int w = 0; w < W; ++w) x[t][w] += m[t][w];
        }
    }

    const Mat xf = layer_norm(x, get("ln_f.g"), get("ln_f.b"));
    Mat logits = affine(xf, get("head.w"), get("head.b"));
    for (auto& row : logits) {
        double mx = row[0];
        for (double v : row) mx = std::max(mx, v);
        double z = 0;
        for (double v : row) z += std::exp(v - mx);
        const double lse = mx + std::log(z);
        for (double& v : row) v -= lse;
    }
    (void)V;
    return logits;
}

// ---------------------------------------------------------------------------
// second exact-likelihood implementation: direct enumeration of all orders
// ---------------------------------------------------------------------------

inline double loglik_by_order_enumeration(const nn::Denoiser& model,
                                          const nn::ParameterSet& params,
                                          const mdm::TokenSequence& seq) {
    const int L = seq.length();
    const int P = static_cast<int>(seq.prompt.size());
    std::vector<int> order(static_cast<std::size_t>(L));
    for (int i = 0; i < L; ++i) order[static_cast<std::size_t>(i)] = i;

    std::vector<double> log_products;
    do {
        std::vector<int> tokens = seq.full_tokens();
        for (int p = 0; p < L; ++p) tokens[static_cast<std::size_t>(P + p)] = nn::kMaskToken;
        double acc = 0.0;
        for (int step = 0; step < L; ++step) {
            const int pos = order[static_cast<std::size_t>(step)];
            const nn::Tensor lp = model.forward_logprobs(params, tokens, P);
            acc += std::max(lp.at(static_cast<std::size_t>(P + pos),
                                  static_cast<std::size_t>(seq.completion[pos])),
                            oracle::kOracleLogFloor);
            tokens[static_cast<std::size_t>(P + pos)] = seq.completion[pos];
        }
        log_products.push_back(acc);
    } while (std::next_permutation(order.begin(), order.end()));

    double mx = log_products[0];
    for (double v : log_products) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : log_products) z += std::exp(v - mx);
    return mx + std::log(z) - std::log(static_cast<double>(log_products.size()));
}

inline double sample_variance(const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    return var / static_cast<double>(xs.size() - 1);
}

inline double sample_mean(const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    return mean / static_cast<double>(xs.size());
}

}  // namespace espo::testing
