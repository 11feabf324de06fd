// SPDX-License-Identifier: Apache-2.0
#include "espo/cli/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace espo::cli {

using json = nlohmann::ordered_json;

namespace {

// Best-effort line lookup for diagnostics: first occurrence of "key" in the
// source text.
int line_of_key(const std::string& text, const std::string& key) {
    const std::string needle = "\"" + key + "\"";
    const std::size_t pos = text.find(needle);
    if (pos == std::string::npos) return -1;
    int line = 1;
    for (std::size_t i = 0; i < pos; ++i) {
        if (text[i] == '\n') ++line;
    }
    return line;
}

[[noreturn]] void unknown_key(const std::string& section, const std::string& key,
                              const std::string& text) {
    const int line = line_of_key(text, key);
    std::string msg = "config: unknown key \"" + key + "\" in section \"" + section + "\"";
    if (line > 0) msg += " (line " + std::to_string(line) + ")";
    throw ConfigError(msg);
}

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& section, const std::string& text) {
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) unknown_key(section, key, text);
    }
}

template <class T>
void read(const json& obj, const char* key, T& dst) {
    if (obj.contains(key)) dst = obj.at(key).get<T>();
}

}  // namespace

void ExperimentSpec::validate() const {
    train.validate();
    if (seeds.empty()) throw ConfigError("config: seed list must be non-empty");
    if (out_dir.empty()) throw ConfigError("config: out_dir must be non-empty");
    if (eval_instances < 0) throw ConfigError("config: eval_instances must be >= 0");
    for (const std::string& v : axis_variant) rl::variant_from_string(v);
    for (const std::string& k : axis_kl) rl::kl_from_string(k);
    for (int m : axis_mc) {
        if (m < 1) throw ConfigError("config: ablation mc values must be >= 1");
    }
    for (int mu : axis_mu) {
        if (mu < 1) throw ConfigError("config: ablation mu values must be >= 1");
    }
}

ExperimentSpec spec_from_json_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    check_keys(root,
               {"train", "objective", "task", "out_dir", "seeds", "eval_instances",
                "save_rollouts", "ablation"},
               "top-level", text);

    ExperimentSpec spec;
    read(root, "out_dir", spec.out_dir);
    read(root, "seeds", spec.seeds);
    read(root, "eval_instances", spec.eval_instances);
    read(root, "save_rollouts", spec.save_rollouts);

    if (root.contains("train")) {
        const json& t = root.at("train");
        check_keys(t,
                   {"task", "width", "layers", "heads", "max_seq_len", "group_size",
                    "batch_size", "completion_length", "tokens_per_step", "block_length",
                    "denoise_steps", "train_temperature", "eval_temperature", "inner_updates",
                    "mc_pairs", "learning_rate", "beta1", "beta2", "weight_decay", "grad_clip",
                    "seed", "total_steps", "pretrain_steps", "pretrain_batch", "pretrain_lr"},
                   "train", text);
        if (t.contains("task")) {
            spec.train.task.kind = tasks::task_from_string(t.at("task").get<std::string>());
        }
        read(t, "width", spec.train.width);
        read(t, "layers", spec.train.layers);
        read(t, "heads", spec.train.heads);
        read(t, "max_seq_len", spec.train.max_seq_len);
        read(t, "group_size", spec.train.group_size);
        read(t, "batch_size", spec.train.batch_size);
        read(t, "completion_length", spec.train.completion_length);
        read(t, "tokens_per_step", spec.train.tokens_per_step);
        read(t, "block_length", spec.train.block_length);
        read(t, "train_temperature", spec.train.train_temperature);
        read(t, "eval_temperature", spec.train.eval_temperature);
        read(t, "inner_updates", spec.train.inner_updates);
        read(t, "mc_pairs", spec.train.mc_pairs);
        read(t, "learning_rate", spec.train.learning_rate);
        read(t, "beta1", spec.train.beta1);
        read(t, "beta2", spec.train.beta2);
        read(t, "weight_decay", spec.train.weight_decay);
        read(t, "grad_clip", spec.train.grad_clip);
        read(t, "seed", spec.train.seed);
        read(t, "total_steps", spec.train.total_steps);
        read(t, "pretrain_steps", spec.train.pretrain_steps);
        read(t, "pretrain_batch", spec.train.pretrain_batch);
        read(t, "pretrain_lr", spec.train.pretrain_lr);
        if (t.contains("denoise_steps")) {
            const int k = t.at("denoise_steps").get<int>();
            if (k != spec.train.denoise_steps()) {
                throw ConfigError(
                    "config: denoise_steps=" + std::to_string(k) +
                    " is inconsistent with completion_length/tokens_per_step (expected " +
                    std::to_string(spec.train.denoise_steps()) + ")");
            }
        }
    }

    if (root.contains("objective")) {
        const json& o = root.at("objective");
        check_keys(o, {"variant", "clip_eps", "kl", "beta"}, "objective", text);
        if (o.contains("variant")) {
            spec.train.objective.variant =
                rl::variant_from_string(o.at("variant").get<std::string>());
        }
        read(o, "clip_eps", spec.train.objective.clip_eps);
        if (o.contains("kl")) {
            spec.train.objective.kl = rl::kl_from_string(o.at("kl").get<std::string>());
        }
        read(o, "beta", spec.train.objective.beta);
    }

    if (root.contains("task")) {
        const json& k = root.at("task");
        check_keys(k,
                   {"prompt_style", "sudoku_givens_min", "sudoku_givens_max", "countdown_lo",
                    "countdown_hi", "countdown_operands"},
                   "task", text);
        if (k.contains("prompt_style")) {
            const std::string s = k.at("prompt_style").get<std::string>();
            if (s == "compact") {
                spec.train.task.style = tasks::PromptStyle::compact;
            } else if (s == "d1") {
                spec.train.task.style = tasks::PromptStyle::d1;
            } else {
                throw ConfigError("config: unknown prompt_style: " + s);
            }
        }
        read(k, "sudoku_givens_min", spec.train.task.sudoku_givens_min);
        read(k, "sudoku_givens_max", spec.train.task.sudoku_givens_max);
        read(k, "countdown_lo", spec.train.task.countdown_range.lo);
        read(k, "countdown_hi", spec.train.task.countdown_range.hi);
        read(k, "countdown_operands", spec.train.task.countdown_operands);
    }

    if (root.contains("ablation")) {
        const json& a = root.at("ablation");
        check_keys(a, {"variant", "kl", "mc", "mu"}, "ablation", text);
        read(a, "variant", spec.axis_variant);
        read(a, "kl", spec.axis_kl);
        read(a, "mc", spec.axis_mc);
        read(a, "mu", spec.axis_mu);
    }

    spec.validate();
    return spec;
}

ExperimentSpec load_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return spec_from_json_text(ss.str());
}

std::string spec_to_json_text(const ExperimentSpec& spec) {
    json t;
    t["task"] = tasks::to_string(spec.train.task.kind);
    t["width"] = spec.train.width;
    t["layers"] = spec.train.layers;
    t["heads"] = spec.train.heads;
    t["max_seq_len"] = spec.train.max_seq_len;
    t["group_size"] = spec.train.group_size;
    t["batch_size"] = spec.train.batch_size;
    t["completion_length"] = spec.train.completion_length;
    t["tokens_per_step"] = spec.train.tokens_per_step;
    t["block_length"] = spec.train.block_length;
    t["train_temperature"] = spec.train.train_temperature;
    t["eval_temperature"] = spec.train.eval_temperature;
    t["inner_updates"] = spec.train.inner_updates;
    t["mc_pairs"] = spec.train.mc_pairs;
    t["learning_rate"] = spec.train.learning_rate;
    t["beta1"] = spec.train.beta1;
    t["beta2"] = spec.train.beta2;
    t["weight_decay"] = spec.train.weight_decay;
    t["grad_clip"] = spec.train.grad_clip;
    t["seed"] = spec.train.seed;
    t["total_steps"] = spec.train.total_steps;
    t["pretrain_steps"] = spec.train.pretrain_steps;
    t["pretrain_batch"] = spec.train.pretrain_batch;
    t["pretrain_lr"] = spec.train.pretrain_lr;

    json o;
    o["variant"] = rl::to_string(spec.train.objective.variant);
    o["clip_eps"] = spec.train.objective.clip_eps;
    o["kl"] = rl::to_string(spec.train.objective.kl);
    o["beta"] = spec.train.objective.beta;

    json k;
    k["prompt_style"] = spec.train.task.style == tasks::PromptStyle::compact ? "compact" : "d1";
    k["sudoku_givens_min"] = spec.train.task.sudoku_givens_min;
    k["sudoku_givens_max"] = spec.train.task.sudoku_givens_max;
    k["countdown_lo"] = spec.train.task.countdown_range.lo;
    k["countdown_hi"] = spec.train.task.countdown_range.hi;
    k["countdown_operands"] = spec.train.task.countdown_operands;

    json a;
    a["variant"] = spec.axis_variant;
    a["kl"] = spec.axis_kl;
    a["mc"] = spec.axis_mc;
    a["mu"] = spec.axis_mu;

    json root;
    root["train"] = std::move(t);
    root["objective"] = std::move(o);
    root["task"] = std::move(k);
    root["out_dir"] = spec.out_dir;
    root["seeds"] = spec.seeds;
    root["eval_instances"] = spec.eval_instances;
    root["save_rollouts"] = spec.save_rollouts;
    root["ablation"] = std::move(a);
    return root.dump(2) + "\n";
}

}  // namespace espo::cli
