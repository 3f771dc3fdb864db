// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "muce/channel.hpp"

namespace muce {

// A simulated scenario: ground-truth path parameters plus the noisy
// observations generated from them. This is the interchange format between
// the `simulate` and `estimate` CLI subcommands.
//
// File layout (JSON): complex scalars are two-element arrays [re, im];
// matrices are flat column-major arrays; tensor entries use the Tensor3
// flattening i1 + I1*(i2 + I2*i3). Infinite snr_db / noise_precision
// (noiseless data) are stored as null.
struct Dataset {
  ArrayGeometry geometry;
  PathParameters paths;
  ObservationBatch obs;
};

// Generates a dataset with the documented substream derivation
// (paths / pilots / noise streams off the master seed).
Dataset make_dataset(const std::array<Index, 3>& dims,
                     const std::array<double, 3>& spacing, double wavelength,
                     int n_users, int paths_per_user, Index pilot_length,
                     double snr_db, std::uint64_t seed);

void save_dataset(const std::string& path, const Dataset& dataset);
Dataset load_dataset(const std::string& path);

}  // namespace muce
