// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "muce/tensor.hpp"

namespace muce {

// Channel-estimation mean-square error (1/(M*N)) sum_n ||Hhat^n - H^n||_F^2.
double mse(const std::vector<Tensor3>& estimates,
           const std::vector<Tensor3>& truth);

}  // namespace muce
