// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "espo/errors.hpp"
#include "espo/substrate/denoiser.hpp"

namespace espo::mdm {

// A prompt plus a clean (mask-free) completion of length L >= 1.
struct TokenSequence {
    std::vector<int> prompt;
    std::vector<int> completion;

    int length() const { return static_cast<int>(completion.size()); }

    // Completion indices that participate in corruption and ELBO sums;
    // pad tokens are excluded.
    std::vector<int> maskable_positions() const {
        std::vector<int> out;
        out.reserve(completion.size());
        for (int p = 0; p < length(); ++p) {
            if (completion[static_cast<std::size_t>(p)] != nn::kPadToken) out.push_back(p);
        }
        return out;
    }

    int effective_length() const { return static_cast<int>(maskable_positions().size()); }

    void validate() const {
        if (completion.empty()) throw InputDomainError("sequence: completion must be non-empty");
        bool any_maskable = false;
        for (int id : completion) {
            if (id == nn::kMaskToken) {
                throw InputDomainError("sequence: mask symbol in clean completion");
            }
            if (id != nn::kPadToken) any_maskable = true;
        }
        if (!any_maskable) {
            throw InputDomainError("sequence: completion is all padding");
        }
        for (int id : prompt) {
            if (id == nn::kMaskToken) {
                throw InputDomainError("sequence: mask symbol in prompt");
            }
        }
    }

    std::vector<int> full_tokens() const {
        std::vector<int> out = prompt;
        out.insert(out.end(), completion.begin(), completion.end());
        return out;
    }
};

enum class MaskForm { t_form, l_form };

// A corruption of a TokenSequence: the listed completion positions (0-based,
// strictly increasing) are replaced by the mask symbol. The prompt is never
// masked.
struct MaskedSequence {
    TokenSequence base;
    std::vector<int> positions;
    MaskForm form = MaskForm::l_form;
    double t = 0.0;  // masking rate, t-form only
    int l = 0;       // masked count, l-form only

    void validate() const {
        base.validate();
        const int L = base.length();
        int prev = -1;
        for (int p : positions) {
            if (p <= prev || p < 0 || p >= L) {
                throw InputDomainError("masked sequence: bad position list");
            }
            prev = p;
        }
        if (form == MaskForm::l_form && l != static_cast<int>(positions.size())) {
            throw InputDomainError("masked sequence: l does not match mask count");
        }
        if (form == MaskForm::t_form && (t <= 0.0 || t > 1.0)) {
            throw InputDomainError("masked sequence: t outside (0,1]");
        }
    }

    std::vector<int> corrupted_full() const {
        std::vector<int> out = base.full_tokens();
        const std::size_t off = base.prompt.size();
        for (int p : positions) out[off + static_cast<std::size_t>(p)] = nn::kMaskToken;
        return out;
    }
};

// Record of one Monte Carlo draw, sufficient to replay an estimator.
// For the coupled estimator one draw denotes a complementary pair; the
// complement masks exactly the positions absent from `positions`.
struct MaskDraw {
    MaskForm form = MaskForm::l_form;
    double t = 0.0;
    int l = 0;
    std::vector<int> positions;
};

}  // namespace espo::mdm
