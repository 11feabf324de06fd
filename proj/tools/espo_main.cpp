// SPDX-License-Identifier: Apache-2.0
//
// Operator surface: train / eval / ablate / flops / oracle-check.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "espo/cli/ablate.hpp"
#include "espo/cli/config.hpp"
#include "espo/cli/experiment.hpp"
#include "espo/cli/oracle_check.hpp"
#include "espo/train/flops.hpp"

namespace {

using espo::cli::ExperimentSpec;
using json = nlohmann::ordered_json;

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              std::optional<std::string> out_dir) {
    ExperimentSpec spec = espo::cli::load_spec(config_path);
    if (seed) spec.train.seed = *seed;
    if (out_dir) spec.out_dir = *out_dir;
    const espo::cli::RunArtifacts art = espo::cli::run_training(spec, spec.out_dir);
    json j;
    j["metrics"] = art.metrics_path;
    j["checkpoint"] = art.checkpoint_path;
    j["steps"] = art.metrics.size();
    if (!art.metrics.empty()) j["final_mean_reward"] = art.metrics.back().mean_reward;
    if (art.final_accuracy) j["eval_accuracy"] = *art.final_accuracy;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint,
             std::optional<std::string> task, int n, std::uint64_t seed) {
    ExperimentSpec spec = espo::cli::load_spec(config_path);
    if (task) spec.train.task.kind = espo::tasks::task_from_string(*task);
    spec.train.pretrain_steps = 0;
    espo::train::Trainer trainer(spec.train);
    trainer.load_checkpoint(checkpoint);
    const auto outcome = trainer.evaluate(n, seed);
    json j;
    j["instances"] = n;
    if (outcome.accuracy) {
        j["accuracy"] = *outcome.accuracy;
    } else {
        j["accuracy"] = nullptr;  // absent, not zero
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& axis,
               std::optional<std::string> out_dir) {
    ExperimentSpec spec = espo::cli::load_spec(config_path);
    if (out_dir) spec.out_dir = *out_dir;
    const espo::cli::AblationOutcome outcome =
        espo::cli::run_ablation(spec, axis, spec.out_dir);
    json j;
    j["axis"] = outcome.axis;
    j["csv"] = outcome.csv_path;
    j["svg"] = outcome.svg_path;
    json runs = json::array();
    bool any_failed = false;
    for (const auto& r : outcome.runs) {
        json rj;
        rj["arm"] = r.arm;
        rj["seed"] = r.seed;
        rj["ok"] = r.ok;
        if (r.ok) {
            rj["terminal_reward"] = r.terminal_reward;
            rj["dir"] = r.run_dir;
        } else {
            rj["error"] = r.error;
            any_failed = true;
        }
        runs.push_back(std::move(rj));
    }
    j["runs"] = std::move(runs);
    std::cout << j.dump(2) << "\n";
    return any_failed ? 1 : 0;
}

int cmd_flops(int steps, int mu, int mc, bool uncoupled) {
    const bool coupled = !uncoupled;
    const auto coeff = espo::train::flops_coefficient(
        static_cast<std::uint64_t>(steps), static_cast<std::uint64_t>(mu),
        static_cast<std::uint64_t>(mc), coupled);
    const int pct = espo::train::flops_percent_of_m1(
        static_cast<std::uint64_t>(steps), static_cast<std::uint64_t>(mu),
        static_cast<std::uint64_t>(mc), coupled);
    std::cout << "flops_per_sample = " << coeff << " N D (" << pct << "% of the m=1 "
              << (coupled ? "coupled" : "uncoupled") << " baseline)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale sequence-level RL laboratory for masked diffusion language models"};
    app.require_subcommand(1);

    std::string config_path;
    std::string checkpoint;
    std::string axis;
    std::string task;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false, out_set = false, task_set = false;
    int n_eval = 100;
    int flops_steps = 256, flops_mu = 8, flops_mc = 2;
    bool uncoupled = false;
    espo::cli::OracleCheckOptions oracle_opt;

    auto* train = app.add_subcommand("train", "run one training configuration");
    train->add_option("--config", config_path, "experiment spec (JSON)")->required();
    train->add_option("--seed", seed, "override the training seed")->each([&](const std::string&) {
        seed_set = true;
    });
    train->add_option("--out", out_dir, "override the output directory")
        ->each([&](const std::string&) { out_set = true; });

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint greedily");
    eval->add_option("--config", config_path, "experiment spec (JSON)")->required();
    eval->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    eval->add_option("--task", task, "task override (sudoku|countdown)")
        ->each([&](const std::string&) { task_set = true; });
    eval->add_option("--n", n_eval, "number of evaluation instances");
    eval->add_option("--seed", seed, "evaluation seed")->each([&](const std::string&) {
        seed_set = true;
    });

    auto* ablate = app.add_subcommand("ablate", "run one ablation axis");
    ablate->add_option("--config", config_path, "experiment spec (JSON)")->required();
    ablate->add_option("--axis", axis, "variant|kl|mc|mu")->required();
    ablate->add_option("--out", out_dir, "override the output directory")
        ->each([&](const std::string&) { out_set = true; });

    auto* flops = app.add_subcommand("flops", "print the per-sample cost model");
    flops->add_option("--steps", flops_steps, "denoising steps K");
    flops->add_option("--mu", flops_mu, "policy updates per batch");
    flops->add_option("--mc", flops_mc, "Monte Carlo samples m");
    flops->add_flag("--uncoupled", uncoupled, "disable coupled sampling");

    auto* oracle = app.add_subcommand("oracle-check", "estimator/oracle property suite");
    oracle->add_option("--length", oracle_opt.length, "tiny-instance completion length");
    oracle->add_option("--instances", oracle_opt.instances, "instances per check");
    oracle->add_option("--seed", oracle_opt.seed, "rng seed");
    oracle->add_option("--draws", oracle_opt.mc_draws, "Monte Carlo draws per check");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            return cmd_train(config_path,
                             seed_set ? std::optional<std::uint64_t>(seed) : std::nullopt,
                             out_set ? std::optional<std::string>(out_dir) : std::nullopt);
        }
        if (eval->parsed()) {
            return cmd_eval(config_path, checkpoint,
                            task_set ? std::optional<std::string>(task) : std::nullopt, n_eval,
                            seed_set ? seed : 12345);
        }
        if (ablate->parsed()) {
            return cmd_ablate(config_path, axis,
                              out_set ? std::optional<std::string>(out_dir) : std::nullopt);
        }
        if (flops->parsed()) return cmd_flops(flops_steps, flops_mu, flops_mc, uncoupled);
        if (oracle->parsed()) return espo::cli::run_oracle_check(oracle_opt, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
