// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <variant>

#include "espo/tasks/answer.hpp"
#include "espo/tasks/countdown.hpp"
#include "espo/tasks/sudoku.hpp"
#include "espo/tasks/tokenizer.hpp"

namespace espo::tasks {

enum class TaskKind { sudoku, countdown };

const char* to_string(TaskKind k);
TaskKind task_from_string(const std::string& s);

struct TaskGenConfig {
    TaskKind kind = TaskKind::sudoku;
    PromptStyle style = PromptStyle::compact;
    int sudoku_givens_min = 10;
    int sudoku_givens_max = 14;
    OperandRange countdown_range{1, 20};
    int countdown_operands = 3;

    void validate() const;
};

struct TaskInstance {
    TaskKind kind = TaskKind::sudoku;
    std::string prompt;
    std::variant<SudokuInstance, CountdownInstance> payload;
};

TaskInstance gen_task(const TaskGenConfig& cfg, nn::Rng& rng);

// extract_answer + the task verifier; 0 or 1.
int score_completion_text(const TaskInstance& inst, const std::string& completion_text);

// Format-true completion with noise content: the answer tags are in place,
// the body has the right alphabet/shape, but the answer itself is random
// (givens are copied for sudoku). Space-padded to `target_tokens` tokens.
// This is the corpus the base model is pretrained on, so reinforcement
// starts from a policy that knows the output format but not the task.
std::string random_format_completion(const TaskInstance& inst, int target_tokens,
                                     nn::Rng& rng);

}  // namespace espo::tasks
