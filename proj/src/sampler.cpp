// SPDX-License-Identifier: Apache-2.0
#include "espo/mdm/sampler.hpp"

#include <algorithm>
#include <cmath>

namespace espo::mdm {

void SamplerConfig::validate(int completion_length) const {
    if (tokens_per_step < 1) throw InputDomainError("sampler: tokens_per_step must be >= 1");
    if (temperature < 0.0) throw InputDomainError("sampler: temperature must be >= 0");
    if (block_length < 0) throw InputDomainError("sampler: block_length must be >= 0");
    if (block_length > 0 && block_length < completion_length &&
        completion_length % block_length != 0) {
        throw InputDomainError("sampler: block_length must divide L or cap at L");
    }
}

int SamplerConfig::steps_for(int completion_length) const {
    const int block = block_length <= 0 ? completion_length
                                        : std::min(block_length, completion_length);
    const int full_blocks = completion_length / block;
    const int per_block = (block + tokens_per_step - 1) / tokens_per_step;
    return full_blocks * per_block;
}

namespace {
struct Candidate {
    int position;    // completion-relative
    int token;
    double confidence;
};
}  // namespace

TokenSequence sample(const nn::Denoiser& model, const nn::ParameterSet& params,
                     std::span<const int> prompt, int L, const SamplerConfig& cfg,
                     nn::Rng& rng, SampleTrace* trace) {
    if (L < 1) throw InputDomainError("sample: completion length must be >= 1");
    cfg.validate(L);
    const int P = static_cast<int>(prompt.size());
    const int V = model.config().vocab_size;
    if (P + L > model.config().max_seq_len) {
        throw InputDomainError("sample: sequence exceeds configured maximum length");
    }

    std::vector<int> tokens(prompt.begin(), prompt.end());
    tokens.resize(static_cast<std::size_t>(P + L), nn::kMaskToken);

    const int block = cfg.block_length <= 0 ? L : std::min(cfg.block_length, L);
    std::vector<double> probs(static_cast<std::size_t>(V));

    for (int block_start = 0; block_start < L; block_start += block) {
        const int block_end = std::min(block_start + block, L);
        int remaining = block_end - block_start;
        while (remaining > 0) {
            const nn::Tensor lp = model.forward_logprobs(params, tokens, P);
            std::vector<Candidate> cands;
            cands.reserve(static_cast<std::size_t>(remaining));
            for (int p = block_start; p < block_end; ++p) {
                if (tokens[static_cast<std::size_t>(P + p)] != nn::kMaskToken) continue;
                const std::size_t row = static_cast<std::size_t>(P + p);

                if (cfg.temperature == 0.0) {
                    // Greedy: the most likely committable token.
                    int best = -1;
                    double best_lp = -1e300;
                    for (int v = 2; v < V; ++v) {  // skip mask and pad
                        const double x = lp.at(row, static_cast<std::size_t>(v));
                        if (x > best_lp) {
                            best_lp = x;
                            best = v;
                        }
                    }
                    cands.push_back({p, best, std::exp(best_lp)});
                } else {
                    double mx = -1e300;
                    for (int v = 2; v < V; ++v) {
                        probs[static_cast<std::size_t>(v)] =
                            lp.at(row, static_cast<std::size_t>(v)) / cfg.temperature;
                        mx = std::max(mx, probs[static_cast<std::size_t>(v)]);
                    }
                    double z = 0.0;
                    for (int v = 2; v < V; ++v) {
                        probs[static_cast<std::size_t>(v)] =
                            std::exp(probs[static_cast<std::size_t>(v)] - mx);
                        z += probs[static_cast<std::size_t>(v)];
                    }
                    const double r = rng.uniform01() * z;
                    double cum = 0.0;
                    int chosen = V - 1;
                    for (int v = 2; v < V; ++v) {
                        cum += probs[static_cast<std::size_t>(v)];
                        if (r < cum) {
                            chosen = v;
                            break;
                        }
                    }
                    cands.push_back({p, chosen, probs[static_cast<std::size_t>(chosen)] / z});
                }
            }

            const int commit = std::min(cfg.tokens_per_step, remaining);
            std::partial_sort(cands.begin(), cands.begin() + commit, cands.end(),
                              [](const Candidate& a, const Candidate& b) {
                                  if (a.confidence != b.confidence)
                                      return a.confidence > b.confidence;
                                  return a.position < b.position;
                              });
            std::vector<int> committed;
            committed.reserve(static_cast<std::size_t>(commit));
            for (int i = 0; i < commit; ++i) {
                tokens[static_cast<std::size_t>(P + cands[static_cast<std::size_t>(i)].position)] =
                    cands[static_cast<std::size_t>(i)].token;
                committed.push_back(cands[static_cast<std::size_t>(i)].position);
            }
            if (trace) trace->committed.push_back(std::move(committed));
            remaining -= commit;
        }
    }

    TokenSequence out;
    out.prompt.assign(prompt.begin(), prompt.end());
    out.completion.assign(tokens.begin() + P, tokens.end());
    out.validate();
    return out;
}

}  // namespace espo::mdm
