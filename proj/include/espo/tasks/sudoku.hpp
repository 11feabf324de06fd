// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "espo/substrate/rng.hpp"
#include "espo/tasks/countdown.hpp"  // PromptStyle

namespace espo::tasks {

// 4x4 board as a 16-character string, row-major; '0' marks an empty cell in
// puzzles, solutions use '1'..'4' only.
struct SudokuInstance {
    std::string puzzle;
    std::string solution;  // unique, generator-certified
    std::string prompt;
};

// Row / column / 2x2-box constraints over a complete 16-char grid.
bool sudoku_valid_solution(std::string_view grid);

// Number of completions of a puzzle, counted up to `cap` by backtracking.
int count_sudoku_solutions(const std::string& puzzle, int cap = 2);

std::optional<std::string> solve_sudoku(const std::string& puzzle);

// 1 iff the answer is a 16-char grid over {1..4}, extends the puzzle's
// givens, and satisfies all constraints.
int reward_sudoku(const SudokuInstance& inst, std::string_view answer);

// Random board with `givens` clues and a unique solution.
SudokuInstance gen_sudoku(nn::Rng& rng, int givens, PromptStyle style = PromptStyle::compact);

std::string sudoku_prompt(const std::string& puzzle, PromptStyle style);

}  // namespace espo::tasks
