// SPDX-License-Identifier: Apache-2.0
#include "espo/substrate/grad_check.hpp"

#include <cmath>

namespace espo::nn {

namespace {
double eval_loss(const ParameterSet& params, const LossBuilder& build) {
    Tape tape(false);
    tape.bind(params);
    return tape.value(build(tape));
}
}  // namespace

GradCheckReport grad_check(const ParameterSet& params, const LossBuilder& build,
                           double step, double tolerance,
                           const ParameterSet* analytic_override) {
    if (step <= 0.0) throw InputDomainError("grad_check: step must be positive");

    ParameterSet analytic;
    if (analytic_override) {
        analytic = *analytic_override;
    } else {
        Tape tape(true);
        tape.bind(params);
        NodeId loss = build(tape);
        tape.backward(loss);
        analytic = tape.param_grads();
    }

    // Work on a private copy so the +/- h probes never touch the caller's set.
    ParameterSet probe = ParameterSet::zeros_like(params);
    probe.axpy(1.0, params);

    GradCheckReport report;
    report.tolerance = tolerance;
    for (const std::string& name : params.names()) {
        Tensor& arr = probe.mutate(name);
        const Tensor& grad = analytic.at(name);
        GradCheckWorst worst{name, 0, 0.0, 0.0, -1.0};
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const double saved = arr[i];
            arr[i] = saved + step;
            const double up = eval_loss(probe, build);
            arr[i] = saved - step;
            const double dn = eval_loss(probe, build);
            arr[i] = saved;

            const double numeric = (up - dn) / (2.0 * step);
            const double a = grad[i];
            const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-4});
            const double rel = std::fabs(a - numeric) / denom;
            if (rel > worst.rel_error) worst = {name, i, a, numeric, rel};
        }
        report.per_array.push_back(worst);
        report.max_rel_error = std::max(report.max_rel_error, worst.rel_error);
    }
    return report;
}

}  // namespace espo::nn
