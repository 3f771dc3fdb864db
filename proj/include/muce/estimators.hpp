// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "muce/channel.hpp"
#include "muce/tensor.hpp"

namespace muce {

// Least-squares channel estimate (S^H S)^{-1} S^H Y via a Hermitian solve.
// Requires L >= N and cond(S^H S) below 1e12; throws otherwise, naming the
// offending condition number.
CMat ls_estimate(const CMat& y, const CMat& pilots);

// Coupled fitting objective: sum_l ||Y_l - sum_n s_n(l) cpd(factors_n)||_F^2.
double objective(const ObservationBatch& obs,
                 const std::vector<FactorSet>& factors);

// Y_l minus every other user's current CPD contribution:
// B_{l, p != n} = Y_l - sum_{p != n} s_p(l) cpd(factors_p).
Tensor3 residual_tensor(const ObservationBatch& obs,
                        const std::vector<FactorSet>& factors, Index l,
                        Index excluded_user);

// Exact minimizer of the mode-k subproblem for one user, all other factor
// matrices held at their current values:
//   [sum_l B_l(k) s_n(l)^* KR^*] [sum_l |s_n(l)|^2 KR^T KR^*]^{-1},
// KR the descending Khatri-Rao product of the user's other two factors.
// A singular Gram gets one diagonal-jitter retry before failing.
CMat bcd_update_factor(const ObservationBatch& obs,
                       const std::vector<FactorSet>& factors, int mode,
                       Index user);

struct BcdOptions {
  int max_sweeps = 1000;
  double rel_tol = 1e-8;
  // Evaluate the objective after every single factor update (monotonicity
  // diagnostics); costs one extra objective evaluation per update.
  bool record_update_objectives = false;
};

struct BcdResult {
  std::vector<FactorSet> factors;
  std::vector<Tensor3> channels;
  std::vector<double> objective_trace;     // per sweep
  std::vector<double> update_objectives;   // per factor update (optional)
  int sweeps = 0;
  bool converged = false;
  int zero_column_events = 0;  // factor columns that collapsed to ~0
};

// Block coordinate descent over users (outer) and modes (inner), each factor
// updated in place so later updates see the most recent values. Stops when
// the relative objective change drops below rel_tol or max_sweeps is hit.
BcdResult bcd_solve(const ObservationBatch& obs, std::vector<FactorSet> init,
                    const BcdOptions& options = {});

// CN(0,1) factor initialization for the given per-user ranks.
std::vector<FactorSet> random_factor_init(const std::array<Index, 3>& dims,
                                          const std::vector<int>& ranks,
                                          Rng rng);

}  // namespace muce
