// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "espo/errors.hpp"

namespace espo::oracle {

// Softmax policy over a finite outcome set, parameterized by unnormalized
// log-weights. Small enough that every expectation below is an exact sum.
struct TabularPolicy {
    std::vector<double> log_weights;

    std::vector<double> log_probs() const;
    std::vector<double> probs() const;
};

enum class KlEstimatorTag { k1, k2, k3 };

// Exact expectation of the per-sample estimator gradient with the sampling
// weights held fixed (detached), i.e. what an RL trainer's backward pass
// averages over rollouts:
//   sum_y pi_theta(y) * d/dw [ estimator term at y ].
std::vector<double> tabular_kl_grad_expectation(const TabularPolicy& theta,
                                                const TabularPolicy& ref,
                                                KlEstimatorTag estimator);

// Closed-form gradients for cross-checking.
// d/dw KL(ref || theta) = pi_theta - pi_ref.
std::vector<double> analytic_reverse_kl_grad(const TabularPolicy& theta,
                                             const TabularPolicy& ref);
// d/dw KL(theta || ref) = pi_a * (d_a - KL) with d = log pi_theta - log pi_ref.
std::vector<double> analytic_forward_kl_grad(const TabularPolicy& theta,
                                             const TabularPolicy& ref);

double kl_divergence(const TabularPolicy& from, const TabularPolicy& to);

}  // namespace espo::oracle
