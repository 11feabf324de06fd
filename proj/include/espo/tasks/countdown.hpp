// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "espo/substrate/rng.hpp"

namespace espo::tasks {

enum class PromptStyle { compact, d1 };

struct CountdownInstance {
    long long target = 0;
    std::vector<long long> operands;
    std::string prompt;
    std::string certified_expression;  // generator's witness
};

struct OperandRange {
    long long lo = 1;
    long long hi = 99;
};

// Exact rational value of an arithmetic expression over + - * / with
// parentheses, plus the number literals it consumed. `ok` is false for parse
// failures and division by zero.
struct ExprResult {
    bool ok = false;
    long long num = 0;
    long long den = 1;
    std::vector<long long> literals;
};
ExprResult eval_expression(std::string_view text);

// Exhaustive expression search over every subset / combination order of the
// numbers; the certification oracle for generated instances.
std::optional<std::string> solve_countdown(long long target,
                                           const std::vector<long long>& numbers);

// 1 iff the answer parses, uses each provided number at most once, and
// evaluates to the target exactly.
int reward_countdown(const CountdownInstance& inst, std::string_view answer);

// Instance with a reachable target, certified by solve_countdown.
CountdownInstance gen_countdown(nn::Rng& rng, const OperandRange& range, int count,
                                PromptStyle style = PromptStyle::compact);

std::string countdown_prompt(long long target, const std::vector<long long>& operands,
                             PromptStyle style);

}  // namespace espo::tasks
