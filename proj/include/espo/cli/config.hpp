// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "espo/train/trainer.hpp"

namespace espo::cli {

// A full experiment: one training configuration, the seeds to repeat it over,
// and the value lists the ablation axes sweep.
struct ExperimentSpec {
    train::TrainRunConfig train;
    std::string out_dir = "out";
    std::vector<std::uint64_t> seeds = {1};
    int eval_instances = 0;
    bool save_rollouts = false;

    std::vector<std::string> axis_variant = {"token-meanfield", "seq-meanfield", "token-elbo",
                                             "seq-elbo"};
    std::vector<std::string> axis_kl = {"k1", "k2", "k3"};
    std::vector<int> axis_mc = {1, 2, 4};
    std::vector<int> axis_mu = {2, 8, 16};

    void validate() const;
};

// Strict parse: unknown keys are hard errors naming the key and, when it can
// be located, its line in the source text.
ExperimentSpec spec_from_json_text(const std::string& text);
ExperimentSpec load_spec(const std::string& path);
std::string spec_to_json_text(const ExperimentSpec& spec);

}  // namespace espo::cli
