// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "espo/mdm/sampler.hpp"
#include "espo/rl/objective.hpp"
#include "espo/substrate/checkpoint.hpp"
#include "espo/tasks/task.hpp"
#include "espo/train/flops.hpp"
#include "espo/train/optimizer.hpp"

namespace espo::train {

// True when the deterministic single-worker environment switch is set;
// timings are zeroed so metric streams are byte-reproducible.
bool deterministic_mode();

struct TrainRunConfig {
    tasks::TaskGenConfig task;

    // model
    int width = 32;
    int layers = 2;
    int heads = 4;
    int max_seq_len = 48;

    // rollout geometry
    int group_size = 6;       // G
    int batch_size = 24;      // completions per step; divisible by G
    int completion_length = 18;
    int tokens_per_step = 2;
    int block_length = 0;
    double train_temperature = 0.9;
    double eval_temperature = 0.0;

    // optimization
    int inner_updates = 8;  // mu
    int mc_pairs = 2;       // m, coupled pairs per ELBO estimate
    rl::ObjectiveConfig objective;
    double learning_rate = 2e-3;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double weight_decay = 0.01;
    double grad_clip = 0.2;

    // schedule
    std::uint64_t seed = 1;
    int total_steps = 200;

    // format pretraining of the base policy (masked-denoising on
    // format-valid, content-random completions)
    int pretrain_steps = 300;
    int pretrain_batch = 16;
    double pretrain_lr = 3e-3;

    void validate() const;
    int denoise_steps() const;  // K implied by L and tokens_per_step
    mdm::SamplerConfig sampler_config(double temperature) const;
};

// One prompt's rollouts plus everything needed to replay them exactly.
struct RolloutRecord {
    tasks::TaskInstance instance;
    rl::CompletionGroup group;
    std::string rng_state_before;
    double timestamp = 0.0;  // unix seconds; zero in deterministic mode
};

std::string to_jsonl(const RolloutRecord& rec);
RolloutRecord rollout_record_from_json(const std::string& line);

struct StepMetrics {
    int step = 0;
    double mean_reward = 0.0;
    double reward_std = 0.0;
    double grad_norm = 0.0;
    double kl = 0.0;
    double clip_frac = 0.0;
    double mean_ratio = 0.0;
    double loss = 0.0;
    double elapsed_s = 0.0;
    double flops_cum = 0.0;
    int skipped_updates = 0;

    std::string to_json() const;
};

class Trainer {
public:
    explicit Trainer(TrainRunConfig cfg);

    // Masked-denoising warm start on format-true random-content completions.
    // Afterwards the old policy and the frozen reference are snapshots of the
    // pretrained weights.
    void pretrain();

    // Group rollouts under the old policy: G completions per instance with
    // rewards, advantages, and old/reference ELBO caches on shared coupled
    // draws.
    std::vector<RolloutRecord> rollout(const std::vector<tasks::TaskInstance>& instances);

    // mu inner optimizer passes over the records, then the old policy is
    // refreshed to the current one. Non-finite losses skip the update and are
    // counted in the metrics.
    StepMetrics train_step(const std::vector<RolloutRecord>& records);

    // One full outer step: generate instances, roll out, update.
    StepMetrics run_step();

    struct EvalOutcome {
        std::optional<double> accuracy;  // absent when n == 0
        std::vector<int> rewards;
    };
    EvalOutcome evaluate(int n_instances, std::uint64_t eval_seed);

    void save_checkpoint(const std::string& path) const;
    void load_checkpoint(const std::string& path);

    const TrainRunConfig& config() const { return cfg_; }
    const nn::Denoiser& model() const { return model_; }
    const nn::ParameterSet& params() const { return theta_; }
    const nn::ParameterSet& params_old() const { return theta_old_; }
    const nn::ParameterSet& params_ref() const { return theta_ref_; }
    double flops_cum() const { return flops_cum_; }
    int step() const { return step_; }
    nn::Rng& rng() { return rng_; }

private:
    tasks::TaskInstance next_instance();
    rl::LossResult batch_loss(nn::Tape& tape, const std::vector<RolloutRecord>& records);

    TrainRunConfig cfg_;
    nn::DenoiserConfig model_cfg_;
    nn::Denoiser model_;
    nn::ParameterSet theta_;
    nn::ParameterSet theta_old_;
    nn::ParameterSet theta_ref_;
    AdamW opt_;
    nn::Rng rng_;
    double flops_cum_ = 0.0;
    int step_ = 0;
};

}  // namespace espo::train
