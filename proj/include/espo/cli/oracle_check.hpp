// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <ostream>

namespace espo::cli {

struct OracleCheckOptions {
    int length = 3;       // completion length of the tiny instances
    int instances = 20;
    std::uint64_t seed = 7;
    int mc_draws = 4000;  // Monte Carlo draws per unbiasedness check
};

// Runs the estimator/oracle property suite at a small scale and prints one
// JSON line per check (pass/fail plus gap statistics). Returns 0 when every
// check passes.
int run_oracle_check(const OracleCheckOptions& opt, std::ostream& out);

}  // namespace espo::cli
