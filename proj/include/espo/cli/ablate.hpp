// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "espo/cli/experiment.hpp"

namespace espo::cli {

struct ArmRun {
    std::string arm;        // axis value label
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    std::string run_dir;
    std::vector<double> rewards;  // raw mean_reward per step
    double terminal_reward = 0.0;
    int flops_percent = 100;
};

struct AblationOutcome {
    std::string axis;
    std::string csv_path;
    std::string svg_path;
    std::vector<ArmRun> runs;

    // Median terminal reward across seeds for one arm label.
    double median_terminal(const std::string& arm) const;
};

// One run per (axis value x seed); arms sharing a seed start from the same
// pretrained base. Runs execute in a small worker pool (single worker in
// deterministic mode); individual failures are recorded and the remaining
// arms continue.
AblationOutcome run_ablation(const ExperimentSpec& spec, const std::string& axis,
                             const std::string& out_dir);

// Centered moving average; the window shrinks near the edges.
std::vector<double> smooth_curve(const std::vector<double>& raw, int window = 25);

// Mean of the last `window` entries.
double terminal_mean(const std::vector<double>& raw, int window = 25);

}  // namespace espo::cli
