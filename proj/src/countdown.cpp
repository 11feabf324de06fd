// SPDX-License-Identifier: Apache-2.0
#include "espo/tasks/countdown.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace espo::tasks {

namespace {

long long gcd_ll(long long a, long long b) {
    a = a < 0 ? -a : a;
    b = b < 0 ? -b : b;
    while (b) {
        const long long t = a % b;
        a = b;
        b = t;
    }
    return a;
}

struct Rational {
    long long num = 0;
    long long den = 1;

    static Rational of(long long v) { return {v, 1}; }

    void reduce() {
        if (den < 0) {
            num = -num;
            den = -den;
        }
        const long long g = gcd_ll(num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }
    bool is_integer(long long v) const { return den == 1 && num == v; }
};

Rational add(Rational a, Rational b) {
    Rational r{a.num * b.den + b.num * a.den, a.den * b.den};
    r.reduce();
    return r;
}
Rational sub(Rational a, Rational b) {
    Rational r{a.num * b.den - b.num * a.den, a.den * b.den};
    r.reduce();
    return r;
}
Rational mul(Rational a, Rational b) {
    Rational r{a.num * b.num, a.den * b.den};
    r.reduce();
    return r;
}
bool div(Rational a, Rational b, Rational& out) {
    if (b.num == 0) return false;
    out = {a.num * b.den, a.den * b.num};
    out.reduce();
    return true;
}

// Recursive-descent parser.
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := number | '(' expr ')' | '-' factor
struct Parser {
    std::string_view s;
    std::size_t pos = 0;
    std::vector<long long> literals;
    bool failed = false;

    void skip_ws() {
        while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t' || s[pos] == '\n' ||
                                  s[pos] == '\r')) {
            ++pos;
        }
    }
    bool peek(char c) {
        skip_ws();
        return pos < s.size() && s[pos] == c;
    }
    bool eat(char c) {
        if (peek(c)) {
            ++pos;
            return true;
        }
        return false;
    }

    Rational factor() {
        skip_ws();
        if (eat('-')) {
            Rational v = factor();
            v.num = -v.num;
            return v;
        }
        if (eat('(')) {
            Rational v = expr();
            if (!eat(')')) failed = true;
            return v;
        }
        if (pos >= s.size() || !std::isdigit(static_cast<unsigned char>(s[pos]))) {
            failed = true;
            return Rational::of(0);
        }
        long long v = 0;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
            v = v * 10 + (s[pos] - '0');
            if (v > 1000000000LL) {
                failed = true;
                return Rational::of(0);
            }
            ++pos;
        }
        literals.push_back(v);
        return Rational::of(v);
    }

    Rational term() {
        Rational v = factor();
        for (;;) {
            if (failed) return v;
            if (eat('*')) {
                v = mul(v, factor());
            } else if (eat('/')) {
                Rational rhs = factor();
                if (failed) return v;
                Rational out;
                if (!div(v, rhs, out)) {
                    failed = true;
                    return v;
                }
                v = out;
            } else {
                return v;
            }
        }
    }

    Rational expr() {
        Rational v = term();
        for (;;) {
            if (failed) return v;
            if (eat('+')) {
                v = add(v, term());
            } else if (eat('-')) {
                v = sub(v, term());
            } else {
                return v;
            }
        }
    }
};

}  // namespace

ExprResult eval_expression(std::string_view text) {
    Parser p{text, 0, {}, false};
    const Rational v = p.expr();
    p.skip_ws();
    ExprResult out;
    if (p.failed || p.pos != text.size()) return out;
    out.ok = true;
    out.num = v.num;
    out.den = v.den;
    out.literals = std::move(p.literals);
    return out;
}

namespace {
struct SearchItem {
    Rational value;
    std::string expr;
};

bool search(long long target, std::vector<SearchItem>& items) {
    for (const SearchItem& it : items) {
        if (it.value.is_integer(target)) return true;
    }
    const std::size_t n = items.size();
    if (n < 2) return false;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            SearchItem a = items[i];
            SearchItem b = items[j];
            std::vector<SearchItem> rest;
            for (std::size_t k = 0; k < n; ++k) {
                if (k != i && k != j) rest.push_back(items[k]);
            }
            const auto attempt = [&](Rational v, const std::string& e) {
                rest.push_back({v, e});
                const bool hit = search(target, rest);
                if (!hit) rest.pop_back();
                return hit;
            };
            if (i < j) {  // commutative ops once per unordered pair
                if (attempt(add(a.value, b.value), "(" + a.expr + "+" + b.expr + ")")) {
                    items = rest;
                    return true;
                }
                if (attempt(mul(a.value, b.value), "(" + a.expr + "*" + b.expr + ")")) {
                    items = rest;
                    return true;
                }
            }
            if (attempt(sub(a.value, b.value), "(" + a.expr + "-" + b.expr + ")")) {
                items = rest;
                return true;
            }
            Rational q;
            if (div(a.value, b.value, q) &&
                attempt(q, "(" + a.expr + "/" + b.expr + ")")) {
                items = rest;
                return true;
            }
        }
    }
    return false;
}

void reachable_targets(std::vector<SearchItem>& items, long long cap,
                       std::set<long long>& out) {
    for (const SearchItem& it : items) {
        if (it.value.den == 1 && it.value.num >= 1 && it.value.num <= cap) {
            out.insert(it.value.num);
        }
    }
    const std::size_t n = items.size();
    if (n < 2) return;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            std::vector<SearchItem> rest;
            for (std::size_t k = 0; k < n; ++k) {
                if (k != i && k != j) rest.push_back(items[k]);
            }
            std::vector<Rational> combos;
            if (i < j) {
                combos.push_back(add(items[i].value, items[j].value));
                combos.push_back(mul(items[i].value, items[j].value));
            }
            combos.push_back(sub(items[i].value, items[j].value));
            Rational q;
            if (div(items[i].value, items[j].value, q)) combos.push_back(q);
            for (const Rational& v : combos) {
                rest.push_back({v, ""});
                reachable_targets(rest, cap, out);
                rest.pop_back();
            }
        }
    }
}
}  // namespace

std::optional<std::string> solve_countdown(long long target,
                                           const std::vector<long long>& numbers) {
    std::vector<SearchItem> items;
    items.reserve(numbers.size());
    for (long long v : numbers) items.push_back({Rational::of(v), std::to_string(v)});
    std::vector<SearchItem> work = items;
    if (!search(target, work)) return std::nullopt;
    // search() only reports a hit from its entry scan, so the witness is here.
    for (const SearchItem& it : work) {
        if (it.value.is_integer(target)) return it.expr;
    }
    return std::nullopt;
}

int reward_countdown(const CountdownInstance& inst, std::string_view answer) {
    const ExprResult r = eval_expression(answer);
    if (!r.ok) return 0;

    std::vector<long long> pool = inst.operands;
    for (long long lit : r.literals) {
        const auto it = std::find(pool.begin(), pool.end(), lit);
        if (it == pool.end()) return 0;  // number not provided or used twice
        pool.erase(it);
    }
    return r.den == 1 && r.num == inst.target ? 1 : 0;
}

std::string countdown_prompt(long long target, const std::vector<long long>& operands,
                             PromptStyle style) {
    std::string nums;
    for (std::size_t i = 0; i < operands.size(); ++i) {
        if (i) nums += ",";
        nums += std::to_string(operands[i]);
    }
    if (style == PromptStyle::compact) {
        return std::to_string(target) + ":" + nums + "\n";
    }
    std::string sep;
    for (std::size_t i = 0; i < operands.size(); ++i) {
        if (i) sep += ", ";
        sep += std::to_string(operands[i]);
    }
    return "Target: " + std::to_string(target) + " | Numbers: [" + sep +
           "]\n"
           "Create an arithmetic expression over +, -, *, / that evaluates to exactly the "
           "target, using each number at most once.\n"
           "Respond in this exact format:\n"
           "<answer>\n"
           "expression\n"
           "</answer>\n";
}

CountdownInstance gen_countdown(nn::Rng& rng, const OperandRange& range, int count,
                                PromptStyle style) {
    if (count < 1) throw ConfigError("countdown generator: operand count must be >= 1");
    if (range.lo < 1 || range.lo > range.hi) {
        throw ConfigError("countdown generator: bad operand range");
    }
    constexpr long long kTargetCap = 999;

    CountdownInstance inst;
    inst.operands.resize(static_cast<std::size_t>(count));
    for (long long& v : inst.operands) {
        v = range.lo + static_cast<long long>(
                           rng.uniform_int(static_cast<std::uint64_t>(range.hi - range.lo + 1)));
    }

    std::vector<SearchItem> items;
    for (long long v : inst.operands) items.push_back({Rational::of(v), std::to_string(v)});
    std::set<long long> targets;
    reachable_targets(items, kTargetCap, targets);
    // Non-empty: each operand itself is reachable.
    std::vector<long long> pool(targets.begin(), targets.end());
    inst.target = pool[rng.uniform_int(pool.size())];

    const auto witness = solve_countdown(inst.target, inst.operands);
    if (!witness) throw ConfigError("countdown generator: certification failed");
    inst.certified_expression = *witness;
    inst.prompt = countdown_prompt(inst.target, inst.operands, style);
    return inst;
}

}  // namespace espo::tasks
