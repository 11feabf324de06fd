// SPDX-License-Identifier: Apache-2.0
#include "espo/cli/experiment.hpp"

#include <filesystem>

#include <nlohmann/json.hpp>

namespace espo::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

RunArtifacts run_training(const ExperimentSpec& spec, const std::string& run_dir,
                          const std::optional<std::string>& base_checkpoint) {
    spec.validate();
    fs::create_directories(run_dir);

    RunArtifacts out;
    out.metrics_path = run_dir + "/metrics.jsonl";
    out.checkpoint_path = run_dir + "/checkpoint.espockpt";

    train::Trainer trainer(spec.train);
    if (base_checkpoint) {
        trainer.load_checkpoint(*base_checkpoint);
    } else {
        trainer.pretrain();
    }

    {
        // Resolved configuration next to the artifacts, for replays.
        ExperimentSpec resolved = spec;
        std::ofstream cfg(run_dir + "/config.json.tmp");
        cfg << spec_to_json_text(resolved);
        cfg.close();
        fs::rename(run_dir + "/config.json.tmp", run_dir + "/config.json");
    }

    train::JsonlWriter metrics(out.metrics_path);
    std::unique_ptr<train::JsonlWriter> rollouts;
    if (spec.save_rollouts) {
        rollouts = std::make_unique<train::JsonlWriter>(run_dir + "/rollouts.jsonl");
    }

    const int n_prompts = spec.train.batch_size / spec.train.group_size;
    for (int step = 0; step < spec.train.total_steps; ++step) {
        std::vector<tasks::TaskInstance> instances;
        instances.reserve(static_cast<std::size_t>(n_prompts));
        for (int i = 0; i < n_prompts; ++i) {
            instances.push_back(tasks::gen_task(spec.train.task, trainer.rng()));
        }
        const std::vector<train::RolloutRecord> records = trainer.rollout(instances);
        if (rollouts) {
            for (const auto& rec : records) rollouts->write_line(train::to_jsonl(rec));
        }
        const train::StepMetrics m = trainer.train_step(records);
        metrics.write_line(m.to_json());
        out.metrics.push_back(m);
    }
    metrics.finalize();
    if (rollouts) rollouts->finalize();
    trainer.save_checkpoint(out.checkpoint_path);

    if (spec.eval_instances > 0) {
        const auto eval = trainer.evaluate(spec.eval_instances, spec.train.seed ^ 0xE5A1ULL);
        out.final_accuracy = eval.accuracy;
        json j;
        j["instances"] = spec.eval_instances;
        j["accuracy"] = *eval.accuracy;
        j["rewards"] = eval.rewards;
        std::ofstream f(run_dir + "/eval.json.tmp");
        f << j.dump(2) << "\n";
        f.close();
        fs::rename(run_dir + "/eval.json.tmp", run_dir + "/eval.json");
    }
    return out;
}

std::string make_base_checkpoint(const ExperimentSpec& spec, std::uint64_t seed,
                                 const std::string& out_dir) {
    fs::create_directories(out_dir);
    const std::string path = out_dir + "/base-seed" + std::to_string(seed) + ".espockpt";
    if (fs::exists(path)) return path;

    ExperimentSpec s = spec;
    s.train.seed = seed;
    train::Trainer trainer(s.train);
    trainer.pretrain();
    trainer.save_checkpoint(path);
    return path;
}

}  // namespace espo::cli
