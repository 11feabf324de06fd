// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "espo/mdm/sequence.hpp"
#include "espo/substrate/denoiser.hpp"

namespace espo::oracle {

// Exact sequence ELBO by enumerating every nonempty mask subset:
//   sum over subsets S of  1 / (|S| * C(L,|S|)) * sum_{i in S} log p(y_i | S masked).
// Enumeration is capped at L = 8.
double exact_elbo(const nn::Denoiser& model, const nn::ParameterSet& params,
                  const mdm::TokenSequence& seq);

// The same quantity via numerical integration of the continuous-rate form
// over the masking rate, marginalizing masks per rate analytically. Composite
// Simpson with `nodes` intervals (>= 10^4 in the oracle suite); agrees with
// exact_elbo to well under 1e-3 and witnesses the equivalence of the two
// estimator forms.
double exact_elbo_tform(const nn::Denoiser& model, const nn::ParameterSet& params,
                        const mdm::TokenSequence& seq, int nodes = 10000);

// Exact model log-likelihood: log of the mean, over all L! unmasking orders,
// of the product of stepwise conditionals. Computed by a subset dynamic
// program in log space; capped at L = 5. Always >= the exact ELBO.
double exact_loglik(const nn::Denoiser& model, const nn::ParameterSet& params,
                    const mdm::TokenSequence& seq);

inline constexpr int kMaxElboEnumLength = 8;
inline constexpr int kMaxLoglikEnumLength = 5;
inline constexpr double kOracleLogFloor = -27.631021115928547;  // log(1e-12)

}  // namespace espo::oracle
