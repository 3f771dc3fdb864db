// SPDX-License-Identifier: Apache-2.0
#include "muce/metrics.hpp"

#include <stdexcept>

namespace muce {

double mse(const std::vector<Tensor3>& estimates,
           const std::vector<Tensor3>& truth) {
  if (estimates.size() != truth.size() || estimates.empty()) {
    throw std::invalid_argument("mse: user counts differ or empty.");
  }
  double err = 0.0;
  for (std::size_t n = 0; n < estimates.size(); ++n) {
    if (estimates[n].dims() != truth[n].dims()) {
      throw std::invalid_argument("mse: tensor shape mismatch.");
    }
    err += (estimates[n].data() - truth[n].data()).squaredNorm();
  }
  const double m_total = static_cast<double>(truth[0].size());
  return err / (m_total * static_cast<double>(truth.size()));
}

}  // namespace muce
