// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "muce/rng.hpp"
#include "muce/tensor.hpp"
#include "muce/types.hpp"

namespace muce {

// Uniform cuboid antenna array at the base station. The first antenna sits
// at the origin; per-axis coordinates are uniform grids
// coords[axis][i] = i * spacing[axis]. Antenna m <-> grid index (i1,i2,i3)
// with m = i1 + I1*(i2 + I2*i3), matching the Tensor3 flattening.
struct ArrayGeometry {
  std::array<Index, 3> dims{};
  std::array<double, 3> spacing{};
  double wavelength = 1.0;
  std::array<Eigen::VectorXd, 3> coords;  // S_x, S_y, S_z

  Index antenna_count() const { return dims[0] * dims[1] * dims[2]; }
};

ArrayGeometry build_geometry(const std::array<Index, 3>& dims,
                             const std::array<double, 3>& spacing,
                             double wavelength);

// One propagation path: complex gain, elevation in [-pi/2, pi/2],
// azimuth in [-pi, pi].
struct Path {
  cplx gain;
  double elevation = 0.0;
  double azimuth = 0.0;
};

using UserPaths = std::vector<Path>;

// Ground-truth angular-model parameters for all users.
struct PathParameters {
  std::vector<UserPaths> users;

  int user_count() const { return static_cast<int>(users.size()); }
};

// Draws path parameters: elevation uniform on [-pi/2, pi/2], azimuth uniform
// on [-pi, pi], gains i.i.d. CN(0,1) across paths and users.
PathParameters sample_paths(int n_users, const std::vector<int>& paths_per_user,
                            Rng rng);
PathParameters sample_paths(int n_users, int paths_per_user, Rng rng);

// Steering factors of one user's channel CPD:
//   U(i1,r) = exp(S_x(i1) * u_r),  u_r = j(2pi/lambda) sin(el) cos(az)
//   V(i2,r) = exp(S_y(i2) * v_r),  v_r = j(2pi/lambda) sin(el) sin(az)
//   P(i3,r) = exp(S_z(i3) * p_r),  p_r = j(2pi/lambda) cos(el)
// The third factor returned is P with column r scaled by the path gain
// (the Khatri-Rao product of the gain row vector with P).
FactorSet steering_factors(const ArrayGeometry& geom, const UserPaths& paths);

// Channel tensor of every user (CPD of its steering factors).
std::vector<Tensor3> synthesize_channels(const ArrayGeometry& geom,
                                         const PathParameters& paths);

// Row-vector view of a channel tensor over antennas, m = i1 + I1*(i2 + I2*i3).
Eigen::RowVectorXcd flatten_channel(const Tensor3& h);

// N x M channel matrix with user n's flattened channel as row n.
CMat channel_matrix(const std::vector<Tensor3>& channels);

// L x N pilot matrix with i.i.d. CN(0,1) entries.
CMat generate_pilots(Index pilot_length, Index n_users, Rng rng);

// Pilot observations at the array: one I1 x I2 x I3 tensor per pilot symbol.
struct ObservationBatch {
  std::vector<Tensor3> observations;  // Y_l, l = 0..L-1
  CMat pilots;                        // L x N
  double noise_precision = 0.0;       // beta; +inf when noiseless
  double snr_db = 0.0;                // +inf when noiseless
  std::uint64_t seed = 0;

  Index pilot_length() const { return pilots.rows(); }
  Index user_count() const { return pilots.cols(); }
  const std::array<Index, 3>& dims() const { return observations.at(0).dims(); }
};

// Y_l = sum_n s_n(l) H^n + W_l with W entries i.i.d. CN(0, 1/beta). The noise
// power is scaled so that 10*log10(sum_l ||sum_n s_n(l) H^n||_F^2 / ||W||_F^2)
// equals snr_db in expectation. snr_db = +inf produces noiseless data with
// beta recorded as +inf.
ObservationBatch synthesize_observations(const std::vector<Tensor3>& channels,
                                         const CMat& pilots, double snr_db,
                                         Rng rng, std::uint64_t seed = 0);

// Same, but with the noise precision given directly (covers zero-signal
// setups where an SNR target is undefined). Records the realized SNR.
ObservationBatch synthesize_observations_with_precision(
    const std::vector<Tensor3>& channels, const CMat& pilots,
    double noise_precision, Rng rng, std::uint64_t seed = 0);

// L x M received matrix Y with Y(l, m) re-assembled from the tensors using
// the antenna index map above (inverse of the tensor re-indexing).
CMat received_matrix(const ObservationBatch& obs);

}  // namespace muce
