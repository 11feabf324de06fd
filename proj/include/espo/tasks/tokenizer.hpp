// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "espo/errors.hpp"

namespace espo::tasks {

// Character-level tokenizer over digits, arithmetic operators, light
// punctuation and whitespace, plus the two answer tags as single tokens.
// Ids 0 and 1 are the reserved mask and pad symbols.
class Tokenizer {
public:
    Tokenizer();

    static const Tokenizer& instance();

    std::vector<int> encode(std::string_view text) const;
    std::string decode(const std::vector<int>& ids) const;

    int vocab_size() const { return static_cast<int>(pieces_.size()); }
    int answer_open() const { return answer_open_; }
    int answer_close() const { return answer_close_; }

private:
    std::vector<std::string> pieces_;  // indexed by id
    int char_ids_[256];
    int answer_open_ = -1;
    int answer_close_ = -1;
};

}  // namespace espo::tasks
