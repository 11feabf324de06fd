// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>

#include "espo/cli/config.hpp"
#include "espo/train/metrics.hpp"

namespace espo::cli {

struct RunArtifacts {
    std::string metrics_path;
    std::string checkpoint_path;
    std::vector<train::StepMetrics> metrics;
    std::optional<double> final_accuracy;
};

// One training run: pretrain (or adopt the given base checkpoint), run the
// configured number of steps, and leave metrics.jsonl, checkpoint.espockpt
// (+ .opt) and optionally rollouts.jsonl / eval.json in `run_dir`. Artifacts
// appear under their final names only when complete.
RunArtifacts run_training(const ExperimentSpec& spec, const std::string& run_dir,
                          const std::optional<std::string>& base_checkpoint = std::nullopt);

// Pretrains a base policy for one seed and saves it; shared by ablation arms.
std::string make_base_checkpoint(const ExperimentSpec& spec, std::uint64_t seed,
                                 const std::string& out_dir);

}  // namespace espo::cli
