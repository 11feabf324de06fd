// SPDX-License-Identifier: Apache-2.0
#include "espo/tasks/answer.hpp"

namespace espo::tasks {

std::optional<std::string> extract_answer(std::string_view completion) {
    constexpr std::string_view open = "<answer>";
    constexpr std::string_view close = "</answer>";
    const std::size_t start = completion.find(open);
    if (start == std::string_view::npos) return std::nullopt;
    const std::size_t body = start + open.size();
    const std::size_t end = completion.find(close, body);
    if (end == std::string_view::npos) return std::nullopt;

    std::string_view inner = completion.substr(body, end - body);
    const auto is_space = [](char c) {
        return c == ' ' || c == '\t' || c == '\n' || c == '\r';
    };
    while (!inner.empty() && is_space(inner.front())) inner.remove_prefix(1);
    while (!inner.empty() && is_space(inner.back())) inner.remove_suffix(1);
    return std::string(inner);
}

}  // namespace espo::tasks
