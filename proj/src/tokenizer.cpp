// SPDX-License-Identifier: Apache-2.0
#include "espo/tasks/tokenizer.hpp"

#include "espo/substrate/denoiser.hpp"

namespace espo::tasks {

namespace {
constexpr std::string_view kChars = "0123456789+-*/():,=. \n";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";
}  // namespace

Tokenizer::Tokenizer() {
    for (int& id : char_ids_) id = -1;
    pieces_.emplace_back("\x00", 1);  // mask
    pieces_.emplace_back("\x01", 1);  // pad
    for (char c : kChars) {
        char_ids_[static_cast<unsigned char>(c)] = static_cast<int>(pieces_.size());
        pieces_.emplace_back(1, c);
    }
    answer_open_ = static_cast<int>(pieces_.size());
    pieces_.emplace_back(kAnswerOpen);
    answer_close_ = static_cast<int>(pieces_.size());
    pieces_.emplace_back(kAnswerClose);
}

const Tokenizer& Tokenizer::instance() {
    static const Tokenizer tok;
    return tok;
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
    std::vector<int> out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (text.compare(i, kAnswerOpen.size(), kAnswerOpen) == 0) {
            out.push_back(answer_open_);
            i += kAnswerOpen.size();
            continue;
        }
        if (text.compare(i, kAnswerClose.size(), kAnswerClose) == 0) {
            out.push_back(answer_close_);
            i += kAnswerClose.size();
            continue;
        }
        const int id = char_ids_[static_cast<unsigned char>(text[i])];
        if (id < 0) {
            throw InputDomainError("tokenizer: unsupported character '" +
                                   std::string(1, text[i]) + "'");
        }
        out.push_back(id);
        ++i;
    }
    return out;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (id < 0 || id >= vocab_size()) throw InputDomainError("tokenizer: id out of range");
        if (id == nn::kMaskToken || id == nn::kPadToken) continue;
        out += pieces_[static_cast<std::size_t>(id)];
    }
    return out;
}

}  // namespace espo::tasks
