// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "espo/substrate/params.hpp"
#include "espo/substrate/tape.hpp"

namespace espo::nn {

// Builds the loss graph on a tape that is already bound to the parameters
// under test. The same builder is reused for the perturbed evaluations.
using LossBuilder = std::function<NodeId(Tape&)>;

struct GradCheckWorst {
    std::string array;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
};

struct GradCheckReport {
    double tolerance = 0.0;
    double max_rel_error = 0.0;
    std::vector<GradCheckWorst> per_array;  // worst coordinate of every array

    bool passed() const { return max_rel_error <= tolerance; }
};

// Central-difference verification of reverse-mode gradients, in double
// precision. `analytic_override` substitutes an externally supplied gradient
// set (used to prove the check flags corrupted gradients).
GradCheckReport grad_check(const ParameterSet& params, const LossBuilder& build,
                           double step, double tolerance,
                           const ParameterSet* analytic_override = nullptr);

}  // namespace espo::nn
