// SPDX-License-Identifier: Apache-2.0
#include "espo/substrate/denoiser.hpp"

#include <numeric>

namespace espo::nn {

void DenoiserConfig::validate() const {
    if (vocab_size < 3) throw InputDomainError("denoiser: vocabulary must hold mask, pad and data");
    if (width <= 0 || layers <= 0 || heads <= 0 || max_seq_len <= 0) {
        throw InputDomainError("denoiser: dimensions must be positive");
    }
    if (width % heads != 0) throw InputDomainError("denoiser: width not divisible by heads");
}

Denoiser::Denoiser(DenoiserConfig cfg) : cfg_(cfg) { cfg_.validate(); }

namespace {
Tensor trunc_normal(std::vector<std::size_t> shape, Rng& rng, double stddev) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.truncated_normal(0.0, stddev);
    return t;
}
}  // namespace

ParameterSet Denoiser::init_params(Rng& rng) const {
    constexpr double kInitStd = 0.02;
    const auto V = static_cast<std::size_t>(cfg_.vocab_size);
    const auto W = static_cast<std::size_t>(cfg_.width);
    const auto M = static_cast<std::size_t>(cfg_.max_seq_len);

    ParameterSet ps;
    ps.add("tok_embed", trunc_normal({V, W}, rng, kInitStd));
    if (cfg_.positional) ps.add("pos_embed", trunc_normal({M, W}, rng, kInitStd));
    for (int l = 0; l < cfg_.layers; ++l) {
        const std::string p = "l" + std::to_string(l) + ".";
        ps.add(p + "ln1.g", Tensor::full({W}, 1.0));
        ps.add(p + "ln1.b", Tensor::zeros({W}));
        for (const char* name : {"wq", "wk", "wv", "wo"}) {
            ps.add(p + "attn." + name, trunc_normal({W, W}, rng, kInitStd));
        }
        for (const char* name : {"bq", "bk", "bv", "bo"}) {
            ps.add(p + "attn." + name, Tensor::zeros({W}));
        }
        ps.add(p + "ln2.g", Tensor::full({W}, 1.0));
        ps.add(p + "ln2.b", Tensor::zeros({W}));
        ps.add(p + "mlp.w1", trunc_normal({W, 4 * W}, rng, kInitStd));
        ps.add(p + "mlp.b1", Tensor::zeros({4 * W}));
        ps.add(p + "mlp.w2", trunc_normal({4 * W, W}, rng, kInitStd));
        ps.add(p + "mlp.b2", Tensor::zeros({W}));
    }
    ps.add("ln_f.g", Tensor::full({W}, 1.0));
    ps.add("ln_f.b", Tensor::zeros({W}));
    ps.add("head.w", trunc_normal({W, V}, rng, kInitStd));
    ps.add("head.b", Tensor::zeros({V}));
    return ps;
}

std::size_t Denoiser::param_count() const {
    const auto V = static_cast<std::size_t>(cfg_.vocab_size);
    const auto W = static_cast<std::size_t>(cfg_.width);
    const auto M = static_cast<std::size_t>(cfg_.max_seq_len);
    std::size_t n = V * W + (cfg_.positional ? M * W : 0);
    n += static_cast<std::size_t>(cfg_.layers) *
         (4 * W            // layer norms
          + 4 * W * W + 4 * W  // attention
          + 8 * W * W + 5 * W);  // mlp (W*4W + 4W + 4W*W + W)
    n += 2 * W + W * V + V;  // final norm + head
    return n;
}

void Denoiser::check_input(std::span<const int> tokens, int prompt_length) const {
    if (tokens.empty()) throw InputDomainError("forward: empty token sequence");
    if (tokens.size() > static_cast<std::size_t>(cfg_.max_seq_len)) {
        throw InputDomainError("forward: sequence exceeds configured maximum length");
    }
    if (prompt_length < 0 || static_cast<std::size_t>(prompt_length) > tokens.size()) {
        throw InputDomainError("forward: prompt length out of range");
    }
    for (int id : tokens) {
        if (id < 0 || id >= cfg_.vocab_size) {
            throw InputDomainError("forward: token id outside vocabulary");
        }
    }
}

NodeId Denoiser::forward(Tape& tape, std::span<const int> tokens, int prompt_length) const {
    check_input(tokens, prompt_length);
    const std::vector<int> ids(tokens.begin(), tokens.end());

    NodeId x = tape.embed_rows(tape.param("tok_embed"), ids);
    if (cfg_.positional) {
        std::vector<int> pos(ids.size());
        std::iota(pos.begin(), pos.end(), 0);
        x = tape.add(x, tape.embed_rows(tape.param("pos_embed"), pos));
    }
    for (int l = 0; l < cfg_.layers; ++l) {
        const std::string p = "l" + std::to_string(l) + ".";
        NodeId h = tape.layer_norm(x, tape.param(p + "ln1.g"), tape.param(p + "ln1.b"));
        NodeId q = tape.add(tape.matmul(h, tape.param(p + "attn.wq")), tape.param(p + "attn.bq"));
        NodeId k = tape.add(tape.matmul(h, tape.param(p + "attn.wk")), tape.param(p + "attn.bk"));
        NodeId v = tape.add(tape.matmul(h, tape.param(p + "attn.wv")), tape.param(p + "attn.bv"));
        NodeId a = tape.attention(q, k, v, cfg_.heads);
        NodeId o = tape.add(tape.matmul(a, tape.param(p + "attn.wo")), tape.param(p + "attn.bo"));
        x = tape.add(x, o);

        NodeId m = tape.layer_norm(x, tape.param(p + "ln2.g"), tape.param(p + "ln2.b"));
        m = tape.add(tape.matmul(m, tape.param(p + "mlp.w1")), tape.param(p + "mlp.b1"));
        m = tape.gelu(m);
        m = tape.add(tape.matmul(m, tape.param(p + "mlp.w2")), tape.param(p + "mlp.b2"));
        x = tape.add(x, m);
    }
    x = tape.layer_norm(x, tape.param("ln_f.g"), tape.param("ln_f.b"));
    NodeId logits = tape.add(tape.matmul(x, tape.param("head.w")), tape.param("head.b"));
    return tape.log_softmax_rows(logits);
}

Tensor Denoiser::forward_logprobs(const ParameterSet& params, std::span<const int> tokens,
                                  int prompt_length) const {
    Tape tape(false);
    tape.bind(params);
    return tape.values(forward(tape, tokens, prompt_length));
}

}  // namespace espo::nn
