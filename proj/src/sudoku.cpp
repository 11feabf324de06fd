// SPDX-License-Identifier: Apache-2.0
#include "espo/tasks/sudoku.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace espo::tasks {

namespace {

int cell_box(int idx) {
    const int r = idx / 4, c = idx % 4;
    return (r / 2) * 2 + (c / 2);
}

bool placement_ok(const std::string& grid, int idx, char d) {
    const int r = idx / 4, c = idx % 4, b = cell_box(idx);
    for (int i = 0; i < 16; ++i) {
        if (i == idx || grid[static_cast<std::size_t>(i)] != d) continue;
        if (i / 4 == r || i % 4 == c || cell_box(i) == b) return false;
    }
    return true;
}

// Counts solutions up to `cap`; digit order per cell is customizable so the
// generator can produce rng-shuffled boards with the same code.
int backtrack(std::string& grid, int cap, const char* digit_order,
              std::string* first_solution) {
    int idx = -1;
    for (int i = 0; i < 16; ++i) {
        if (grid[static_cast<std::size_t>(i)] == '0') {
            idx = i;
            break;
        }
    }
    if (idx < 0) {
        if (first_solution && first_solution->empty()) *first_solution = grid;
        return 1;
    }
    int found = 0;
    for (int k = 0; k < 4; ++k) {
        const char d = digit_order[k];
        if (!placement_ok(grid, idx, d)) continue;
        grid[static_cast<std::size_t>(idx)] = d;
        found += backtrack(grid, cap - found, digit_order, first_solution);
        grid[static_cast<std::size_t>(idx)] = '0';
        if (found >= cap) return found;
    }
    return found;
}

void check_puzzle_string(const std::string& puzzle) {
    if (puzzle.size() != 16) throw InputDomainError("sudoku: puzzle must be 16 characters");
    for (char c : puzzle) {
        if (c < '0' || c > '4') throw InputDomainError("sudoku: puzzle characters must be 0-4");
    }
}

}  // namespace

bool sudoku_valid_solution(std::string_view grid) {
    if (grid.size() != 16) return false;
    for (char c : grid) {
        if (c < '1' || c > '4') return false;
    }
    for (int unit = 0; unit < 4; ++unit) {
        int row_mask = 0, col_mask = 0, box_mask = 0;
        for (int k = 0; k < 4; ++k) {
            row_mask |= 1 << (grid[static_cast<std::size_t>(unit * 4 + k)] - '1');
            col_mask |= 1 << (grid[static_cast<std::size_t>(k * 4 + unit)] - '1');
            const int br = (unit / 2) * 2 + k / 2, bc = (unit % 2) * 2 + k % 2;
            box_mask |= 1 << (grid[static_cast<std::size_t>(br * 4 + bc)] - '1');
        }
        if (row_mask != 0xF || col_mask != 0xF || box_mask != 0xF) return false;
    }
    return true;
}

int count_sudoku_solutions(const std::string& puzzle, int cap) {
    check_puzzle_string(puzzle);
    std::string work = puzzle;
    static constexpr char kOrder[4] = {'1', '2', '3', '4'};
    return backtrack(work, cap, kOrder, nullptr);
}

std::optional<std::string> solve_sudoku(const std::string& puzzle) {
    check_puzzle_string(puzzle);
    std::string work = puzzle;
    std::string solution;
    static constexpr char kOrder[4] = {'1', '2', '3', '4'};
    if (backtrack(work, 1, kOrder, &solution) < 1) return std::nullopt;
    return solution;
}

int reward_sudoku(const SudokuInstance& inst, std::string_view answer) {
    if (!sudoku_valid_solution(answer)) return 0;
    for (int i = 0; i < 16; ++i) {
        const char given = inst.puzzle[static_cast<std::size_t>(i)];
        if (given != '0' && answer[static_cast<std::size_t>(i)] != given) return 0;
    }
    return 1;
}

std::string sudoku_prompt(const std::string& puzzle, PromptStyle style) {
    check_puzzle_string(puzzle);
    if (style == PromptStyle::compact) {
        return puzzle + "\n";
    }
    std::string grid_lines;
    for (int r = 0; r < 4; ++r) {
        if (r == 2) grid_lines += "----+----\n";
        for (int c = 0; c < 4; ++c) {
            grid_lines += puzzle[static_cast<std::size_t>(r * 4 + c)];
            grid_lines += c == 1 ? " | " : (c == 3 ? "" : " ");
        }
        grid_lines += "\n";
    }
    return "Please solve the following 4x4 Sudoku puzzle. The puzzle is provided as a "
           "16-character string reading left-to-right, top-to-bottom, where '0' represents "
           "empty cells.\n\n"
           "**Rules:**\n"
           "- Fill empty cells with digits 1-4.\n"
           "- Each row must contain digits 1-4 exactly once.\n"
           "- Each column must contain digits 1-4 exactly once.\n"
           "- Each 2x2 box must contain digits 1-4 exactly once.\n\n"
           "Puzzle: " + puzzle + "\n"
           "This puzzle grid looks like this:\n" + grid_lines + "\n"
           "**Important:** Your solution must be a COMPLETE 16-character string with only "
           "the digits 1-4, representing your final solved grid.\n\n"
           "Respond in this exact format:\n"
           "<reasoning>\n"
           "Your step-by-step solving process\n"
           "</reasoning>\n"
           "<answer>\n"
           "[16-character solution string with no spaces or separators]\n"
           "</answer>\n";
}

SudokuInstance gen_sudoku(nn::Rng& rng, int givens, PromptStyle style) {
    if (givens < 0 || givens > 16) throw ConfigError("sudoku generator: givens outside 0..16");

    for (int attempt = 0; attempt < 1000; ++attempt) {
        // Random complete grid: backtracking with an rng-shuffled digit order
        // per attempt plus a shuffled cell seeding.
        std::vector<char> order = {'1', '2', '3', '4'};
        rng.shuffle(order);
        char digit_order[4] = {order[0], order[1], order[2], order[3]};
        std::string grid(16, '0');
        // Seed the first row with a random permutation to diversify boards.
        for (int c = 0; c < 4; ++c) grid[static_cast<std::size_t>(c)] = order[static_cast<std::size_t>(c)];
        std::string solution;
        if (backtrack(grid, 1, digit_order, &solution) < 1) continue;

        std::string puzzle = solution;
        std::vector<int> cells(16);
        std::iota(cells.begin(), cells.end(), 0);
        rng.shuffle(cells);
        int remaining = 16;
        for (int cell : cells) {
            if (remaining <= givens) break;
            const char saved = puzzle[static_cast<std::size_t>(cell)];
            puzzle[static_cast<std::size_t>(cell)] = '0';
            if (count_sudoku_solutions(puzzle, 2) == 1) {
                --remaining;
            } else {
                puzzle[static_cast<std::size_t>(cell)] = saved;
            }
        }
        if (remaining != givens) continue;  // could not thin this board; try another

        SudokuInstance inst;
        inst.puzzle = puzzle;
        inst.solution = solution;
        inst.prompt = sudoku_prompt(puzzle, style);
        return inst;
    }
    throw ConfigError("sudoku generator: could not reach requested givens count");
}

}  // namespace espo::tasks
