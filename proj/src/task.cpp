// SPDX-License-Identifier: Apache-2.0
#include "espo/tasks/task.hpp"

namespace espo::tasks {

const char* to_string(TaskKind k) {
    return k == TaskKind::sudoku ? "sudoku" : "countdown";
}

TaskKind task_from_string(const std::string& s) {
    if (s == "sudoku") return TaskKind::sudoku;
    if (s == "countdown") return TaskKind::countdown;
    throw ConfigError("unknown task: " + s);
}

void TaskGenConfig::validate() const {
    if (sudoku_givens_min < 0 || sudoku_givens_max > 16 ||
        sudoku_givens_min > sudoku_givens_max) {
        throw ConfigError("task: bad sudoku givens range");
    }
    if (countdown_operands < 1) throw ConfigError("task: countdown operand count must be >= 1");
    if (countdown_range.lo < 1 || countdown_range.lo > countdown_range.hi) {
        throw ConfigError("task: bad countdown operand range");
    }
}

TaskInstance gen_task(const TaskGenConfig& cfg, nn::Rng& rng) {
    cfg.validate();
    TaskInstance out;
    out.kind = cfg.kind;
    if (cfg.kind == TaskKind::sudoku) {
        const int span = cfg.sudoku_givens_max - cfg.sudoku_givens_min + 1;
        const int givens =
            cfg.sudoku_givens_min + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(span)));
        SudokuInstance inst = gen_sudoku(rng, givens, cfg.style);
        out.prompt = inst.prompt;
        out.payload = std::move(inst);
    } else {
        CountdownInstance inst =
            gen_countdown(rng, cfg.countdown_range, cfg.countdown_operands, cfg.style);
        out.prompt = inst.prompt;
        out.payload = std::move(inst);
    }
    return out;
}

int score_completion_text(const TaskInstance& inst, const std::string& completion_text) {
    const std::optional<std::string> answer = extract_answer(completion_text);
    if (!answer) return 0;
    if (inst.kind == TaskKind::sudoku) {
        return reward_sudoku(std::get<SudokuInstance>(inst.payload), *answer);
    }
    return reward_countdown(std::get<CountdownInstance>(inst.payload), *answer);
}

std::string random_format_completion(const TaskInstance& inst, int target_tokens,
                                     nn::Rng& rng) {
    std::string body;
    if (inst.kind == TaskKind::sudoku) {
        const SudokuInstance& s = std::get<SudokuInstance>(inst.payload);
        body.reserve(16);
        for (char given : s.puzzle) {
            body += given != '0'
                        ? given
                        : static_cast<char>('1' + static_cast<int>(rng.uniform_int(4)));
        }
    } else {
        const CountdownInstance& c = std::get<CountdownInstance>(inst.payload);
        std::vector<long long> nums = c.operands;
        rng.shuffle(nums);
        static constexpr char kOps[] = {'+', '-', '*', '/'};
        for (std::size_t i = 0; i < nums.size(); ++i) {
            if (i) body += kOps[rng.uniform_int(4)];
            body += std::to_string(nums[i]);
        }
    }
    std::string text = "<answer>" + body + "</answer>";
    const Tokenizer& tok = Tokenizer::instance();
    int n = static_cast<int>(tok.encode(text).size());
    if (n > target_tokens) {
        throw ConfigError("format completion does not fit the configured completion length");
    }
    text.append(static_cast<std::size_t>(target_tokens - n), ' ');
    return text;
}

}  // namespace espo::tasks
