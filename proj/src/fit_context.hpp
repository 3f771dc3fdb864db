// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <vector>

#include "muce/channel.hpp"
#include "muce/tensor.hpp"

namespace muce::detail {

// Pilot-correlated data products shared by the BCD and VI sweeps. Both
// solvers repeatedly need sums of the form sum_l s_n(l)^* Y_l and the pilot
// Gram S^H S; hoisting them out makes the per-iteration cost independent of
// the pilot length.
struct FitContext {
  CMat pilot_gram;  // C = S^H S, C(n,p) = sum_l s_n(l)^* s_p(l)
  // data_unfoldings[n][k-1] = mode-k unfolding of T_n = sum_l s_n(l)^* Y_l
  std::vector<std::array<CMat, 3>> data_unfoldings;
  double data_sq_norm = 0.0;  // sum_l ||Y_l||_F^2
  std::array<Index, 3> dims{};

  explicit FitContext(const ObservationBatch& obs) {
    const Index n_users = obs.user_count();
    const Index l_len = obs.pilot_length();
    dims = obs.dims();
    pilot_gram = obs.pilots.adjoint() * obs.pilots;
    for (const auto& y : obs.observations) data_sq_norm += y.squared_norm();
    data_unfoldings.resize(static_cast<std::size_t>(n_users));
    for (Index n = 0; n < n_users; ++n) {
      Tensor3 t(dims[0], dims[1], dims[2]);
      for (Index l = 0; l < l_len; ++l) {
        t.data() += std::conj(obs.pilots(l, n)) *
                    obs.observations[static_cast<std::size_t>(l)].data();
      }
      for (int k = 1; k <= 3; ++k) {
        data_unfoldings[static_cast<std::size_t>(n)][static_cast<std::size_t>(k - 1)] =
            unfold(t, k);
      }
    }
  }
};

// Descending-mode pair (a, b) complementary to `mode` (1-based), such that
// the mode-k CPD unfolding identity uses khatri_rao(F[a], F[b]).
inline std::pair<int, int> complement_modes(int mode) {
  switch (mode) {
    case 1: return {2, 1};  // (F3, F2), 0-based
    case 2: return {2, 0};  // (F3, F1)
    case 3: return {1, 0};  // (F2, F1)
    default: throw std::invalid_argument("mode must be 1, 2 or 3.");
  }
}

}  // namespace muce::detail
