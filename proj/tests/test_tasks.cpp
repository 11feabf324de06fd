// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "espo/substrate/denoiser.hpp"
#include "espo/tasks/task.hpp"
#include "espo/substrate/rng.hpp"

using namespace espo;
using namespace espo::tasks;

TEST_CASE("tokenizer: round trip, tag tokens, unknown characters") {
    const Tokenizer& tok = Tokenizer::instance();
    const std::string text = "67:72,92,47\n<answer>92 -72 + 47</answer> ";
    const std::vector<int> ids = tok.encode(text);
    CHECK(tok.decode(ids) == text);

    const std::vector<int> tag = tok.encode("<answer>");
    REQUIRE(tag.size() == 1);
    CHECK(tag[0] == tok.answer_open());
    const std::vector<int> closing = tok.encode("</answer>");
    REQUIRE(closing.size() == 1);
    CHECK(closing[0] == tok.answer_close());

    CHECK_THROWS_AS(tok.encode("hello"), InputDomainError);  // letters unsupported
    CHECK(tok.decode({nn::kMaskToken, nn::kPadToken}) == "");
}

TEST_CASE("answer extraction") {
    CHECK(extract_answer("blah <answer>\n3214413214232341\n</answer> trailing") ==
          "3214413214232341");
    CHECK_FALSE(extract_answer("no tags here"));
    CHECK_FALSE(extract_answer("<answer> never closed"));
    CHECK(extract_answer("<answer>first</answer><answer>second</answer>") == "first");
    CHECK(extract_answer("<answer>  </answer>") == "");
}

TEST_CASE("countdown expression evaluation is exact rational arithmetic") {
    const ExprResult r1 = eval_expression("77*73-98");
    CHECK(r1.ok);
    CHECK(r1.den == 1);
    CHECK(r1.num == 5523);

    const ExprResult r2 = eval_expression("(1+2)/(3*4)");
    CHECK(r2.ok);
    CHECK(r2.num == 1);
    CHECK(r2.den == 4);

    CHECK_FALSE(eval_expression("1/0").ok);
    CHECK_FALSE(eval_expression("1/(2-2)").ok);
    CHECK_FALSE(eval_expression("").ok);
    CHECK_FALSE(eval_expression("1+*2").ok);
    CHECK_FALSE(eval_expression("(1+2").ok);
    CHECK_FALSE(eval_expression("1+2)").ok);
}

TEST_CASE("countdown rewards score the worked examples correctly") {
    CountdownInstance a;
    a.target = 67;
    a.operands = {72, 92, 47};
    CHECK(reward_countdown(a, "92 -72 + 47") == 1);

    CountdownInstance b;
    b.target = 94;
    b.operands = {77, 73, 98};
    CHECK(reward_countdown(b, "77*73-98") == 0);  // 5523, not 94

    CHECK(reward_countdown(a, "") == 0);
    CHECK(reward_countdown(a, "so the answer is 67") == 0);

    SUBCASE("each provided number at most once") {
        CountdownInstance c;
        c.target = 4;
        c.operands = {2, 3};
        CHECK(reward_countdown(c, "2*2") == 0);  // reuses 2
        CHECK(reward_countdown(c, "2+2") == 0);
        c.target = 6;
        CHECK(reward_countdown(c, "2*3") == 1);
        c.target = 2;
        CHECK(reward_countdown(c, "2") == 1);  // subsets are allowed
        CHECK(reward_countdown(c, "5-3") == 0);  // 5 was never provided
    }
    SUBCASE("division and rational equality") {
        CountdownInstance c;
        c.target = 4;
        c.operands = {8, 2};
        CHECK(reward_countdown(c, "8/2") == 1);
        c.target = 3;
        CHECK(reward_countdown(c, "8/2") == 0);
    }
}

TEST_CASE("countdown solver certifies reachable targets") {
    CHECK(solve_countdown(67, {72, 92, 47}).has_value());
    CHECK(solve_countdown(5523, {77, 73, 98}).has_value());
    CHECK_FALSE(solve_countdown(971, {2, 3, 4}).has_value());
    const auto single = solve_countdown(9, {9});
    REQUIRE(single.has_value());
    CHECK(*single == "9");
}

TEST_CASE("countdown generator emits certified-solvable instances") {
    nn::Rng rng(70);
    for (int i = 0; i < 200; ++i) {
        const CountdownInstance inst = gen_countdown(rng, {1, 20}, 3);
        CHECK(reward_countdown(inst, inst.certified_expression) == 1);
    }
    SUBCASE("single operand instances solve as themselves") {
        const CountdownInstance inst = gen_countdown(rng, {5, 5}, 1);
        CHECK(inst.target == 5);
        CHECK(reward_countdown(inst, "5") == 1);
    }
    CHECK_THROWS_AS(gen_countdown(rng, {0, 5}, 3), ConfigError);
    CHECK_THROWS_AS(gen_countdown(rng, {5, 1}, 3), ConfigError);
    CHECK_THROWS_AS(gen_countdown(rng, {1, 5}, 0), ConfigError);
}

TEST_CASE("sudoku verifier scores the worked example and rejects near misses") {
    SudokuInstance inst;
    inst.puzzle = "3204003014002001";
    inst.solution = "3214413214232341";
    CHECK(reward_sudoku(inst, "3214413214232341") == 1);
    CHECK(reward_sudoku(inst, "321441321423234") == 0);    // 15 characters
    CHECK(reward_sudoku(inst, "32144132142323411") == 0);  // 17 characters
    CHECK(reward_sudoku(inst, "3214413214232340") == 0);   // digit out of range
    // A fully valid grid that contradicts a given.
    CHECK(sudoku_valid_solution("2431312412434312"));
    CHECK(reward_sudoku(inst, "2431312412434312") == 0);
}

TEST_CASE("sudoku solver and uniqueness counting") {
    CHECK(count_sudoku_solutions("3204003014002001", 4) == 1);
    const auto sol = solve_sudoku("3204003014002001");
    REQUIRE(sol.has_value());
    CHECK(*sol == "3214413214232341");
    CHECK(count_sudoku_solutions("0000000000000000", 3) >= 3);
    CHECK_FALSE(solve_sudoku("1100000000000000").has_value());  // contradictory row
    CHECK_THROWS_AS(count_sudoku_solutions("123", 2), InputDomainError);
}

TEST_CASE("sudoku generator respects the givens count and certifies uniqueness") {
    nn::Rng rng(71);
    SUBCASE("fully-given boards are their own solution") {
        const SudokuInstance inst = gen_sudoku(rng, 16);
        CHECK(inst.puzzle == inst.solution);
        CHECK(reward_sudoku(inst, inst.solution) == 1);
    }
    SUBCASE("generated instances verify against their stored solutions") {
        for (int i = 0; i < 1000; ++i) {
            const int givens = 8 + static_cast<int>(rng.uniform_int(7));
            const SudokuInstance inst = gen_sudoku(rng, givens);
            int given_count = 0;
            for (char c : inst.puzzle) given_count += c != '0';
            CHECK(given_count == givens);
            CHECK(reward_sudoku(inst, inst.solution) == 1);
            CHECK(count_sudoku_solutions(inst.puzzle, 2) == 1);
        }
    }
    CHECK_THROWS_AS(gen_sudoku(rng, 17), ConfigError);
    CHECK_THROWS_AS(gen_sudoku(rng, -1), ConfigError);
}

TEST_CASE("generator liveness across many seeded draws") {
    nn::Rng rng(72);
    TaskGenConfig sudoku_cfg;
    sudoku_cfg.kind = TaskKind::sudoku;
    sudoku_cfg.sudoku_givens_min = 8;
    sudoku_cfg.sudoku_givens_max = 14;
    for (int i = 0; i < 5000; ++i) {
        const TaskInstance inst = gen_task(sudoku_cfg, rng);
        const auto& s = std::get<SudokuInstance>(inst.payload);
        CHECK(reward_sudoku(s, s.solution) == 1);
    }
    TaskGenConfig cd_cfg;
    cd_cfg.kind = TaskKind::countdown;
    for (int i = 0; i < 5000; ++i) {
        const TaskInstance inst = gen_task(cd_cfg, rng);
        const auto& c = std::get<CountdownInstance>(inst.payload);
        CHECK(reward_countdown(c, c.certified_expression) == 1);
    }
}

TEST_CASE("prompt formats") {
    CHECK(sudoku_prompt("3204003014002001", PromptStyle::compact) == "3204003014002001\n");
    const std::string d1 = sudoku_prompt("3204003014002001", PromptStyle::d1);
    CHECK(d1.find("Each row must contain digits 1-4 exactly once.") != std::string::npos);
    CHECK(d1.find("3204003014002001") != std::string::npos);
    CHECK(d1.find("<answer>") != std::string::npos);

    CHECK(countdown_prompt(67, {72, 92, 47}, PromptStyle::compact) == "67:72,92,47\n");
    const std::string cd1 = countdown_prompt(67, {72, 92, 47}, PromptStyle::d1);
    CHECK(cd1.find("Target: 67 | Numbers: [72, 92, 47]") != std::string::npos);
}

TEST_CASE("task scoring goes through answer extraction") {
    nn::Rng rng(73);
    TaskGenConfig cfg;
    cfg.kind = TaskKind::sudoku;
    cfg.sudoku_givens_min = cfg.sudoku_givens_max = 12;
    const TaskInstance inst = gen_task(cfg, rng);
    const auto& s = std::get<SudokuInstance>(inst.payload);
    CHECK(score_completion_text(inst, "<answer>" + s.solution + "</answer>") == 1);
    CHECK(score_completion_text(inst, s.solution) == 0);  // no tags
    CHECK(score_completion_text(inst, "<answer>1111222233334444</answer>") == 0);
}

TEST_CASE("format-true random completions tokenize to the target length") {
    nn::Rng rng(74);
    const Tokenizer& tok = Tokenizer::instance();
    TaskGenConfig cfg;
    cfg.kind = TaskKind::sudoku;
    cfg.sudoku_givens_min = cfg.sudoku_givens_max = 10;
    for (int i = 0; i < 20; ++i) {
        const TaskInstance inst = gen_task(cfg, rng);
        const std::string text = random_format_completion(inst, 24, rng);
        CHECK(tok.encode(text).size() == 24);
        const auto answer = extract_answer(text);
        REQUIRE(answer.has_value());
        CHECK(answer->size() == 16);
        const auto& s = std::get<SudokuInstance>(inst.payload);
        for (int p = 0; p < 16; ++p) {
            if (s.puzzle[static_cast<std::size_t>(p)] != '0') {
                CHECK((*answer)[static_cast<std::size_t>(p)] ==
                      s.puzzle[static_cast<std::size_t>(p)]);
            }
        }
    }
    cfg.kind = TaskKind::countdown;
    for (int i = 0; i < 20; ++i) {
        const TaskInstance inst = gen_task(cfg, rng);
        const std::string text = random_format_completion(inst, 24, rng);
        CHECK(tok.encode(text).size() == 24);
    }
}
