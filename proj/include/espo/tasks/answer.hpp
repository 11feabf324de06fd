// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace espo::tasks {

// Content of the first well-formed <answer>...</answer> pair, whitespace
// trimmed. Absent when no opening tag is followed by a closing tag; anything
// after the closing tag is ignored.
std::optional<std::string> extract_answer(std::string_view completion);

}  // namespace espo::tasks
