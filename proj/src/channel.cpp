// SPDX-License-Identifier: Apache-2.0
#include "muce/channel.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace muce {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;
}  // namespace

ArrayGeometry build_geometry(const std::array<Index, 3>& dims,
                             const std::array<double, 3>& spacing,
                             double wavelength) {
  for (int k = 0; k < 3; ++k) {
    if (dims[static_cast<std::size_t>(k)] < 1) {
      throw std::invalid_argument("build_geometry: dims must be >= 1.");
    }
    if (!(spacing[static_cast<std::size_t>(k)] > 0.0)) {
      throw std::invalid_argument("build_geometry: spacing must be positive.");
    }
  }
  if (!(wavelength > 0.0)) {
    throw std::invalid_argument("build_geometry: wavelength must be positive.");
  }
  ArrayGeometry geom;
  geom.dims = dims;
  geom.spacing = spacing;
  geom.wavelength = wavelength;
  for (std::size_t k = 0; k < 3; ++k) {
    geom.coords[k] = spacing[k] * Eigen::VectorXd::LinSpaced(
                                      dims[k], 0.0, static_cast<double>(dims[k] - 1));
  }
  return geom;
}

PathParameters sample_paths(int n_users, const std::vector<int>& paths_per_user,
                            Rng rng) {
  if (n_users < 1) {
    throw std::invalid_argument("sample_paths: need at least one user.");
  }
  if (static_cast<int>(paths_per_user.size()) != n_users) {
    throw std::invalid_argument("sample_paths: one path count per user required.");
  }
  PathParameters out;
  out.users.resize(static_cast<std::size_t>(n_users));
  for (int n = 0; n < n_users; ++n) {
    const int r = paths_per_user[static_cast<std::size_t>(n)];
    if (r < 1) {
      throw std::invalid_argument("sample_paths: path counts must be >= 1.");
    }
    auto& paths = out.users[static_cast<std::size_t>(n)];
    paths.resize(static_cast<std::size_t>(r));
    for (auto& p : paths) {
      p.gain = rng.complex_normal();
      p.elevation = (rng.uniform() - 0.5) * kPi;        // [-pi/2, pi/2]
      p.azimuth = (rng.uniform() - 0.5) * 2.0 * kPi;    // [-pi, pi]
    }
  }
  return out;
}

PathParameters sample_paths(int n_users, int paths_per_user, Rng rng) {
  return sample_paths(n_users,
                      std::vector<int>(static_cast<std::size_t>(n_users),
                                       paths_per_user),
                      std::move(rng));
}

FactorSet steering_factors(const ArrayGeometry& geom, const UserPaths& paths) {
  const Index r = static_cast<Index>(paths.size());
  const double scale = 2.0 * kPi / geom.wavelength;
  FactorSet f;
  for (int k = 0; k < 3; ++k) {
    f[k] = CMat(geom.dims[static_cast<std::size_t>(k)], r);
  }
  const cplx j{0.0, 1.0};
  for (Index c = 0; c < r; ++c) {
    const Path& p = paths[static_cast<std::size_t>(c)];
    const cplx u = j * scale * std::sin(p.elevation) * std::cos(p.azimuth);
    const cplx v = j * scale * std::sin(p.elevation) * std::sin(p.azimuth);
    const cplx w = j * scale * std::cos(p.elevation);
    for (Index i = 0; i < geom.dims[0]; ++i)
      f[0](i, c) = std::exp(geom.coords[0][i] * u);
    for (Index i = 0; i < geom.dims[1]; ++i)
      f[1](i, c) = std::exp(geom.coords[1][i] * v);
    for (Index i = 0; i < geom.dims[2]; ++i)
      f[2](i, c) = p.gain * std::exp(geom.coords[2][i] * w);
  }
  return f;
}

std::vector<Tensor3> synthesize_channels(const ArrayGeometry& geom,
                                         const PathParameters& paths) {
  std::vector<Tensor3> channels;
  channels.reserve(paths.users.size());
  for (const auto& user : paths.users) {
    channels.push_back(cpd_reconstruct(steering_factors(geom, user)));
  }
  return channels;
}

Eigen::RowVectorXcd flatten_channel(const Tensor3& h) {
  return h.data().transpose();
}

CMat channel_matrix(const std::vector<Tensor3>& channels) {
  if (channels.empty()) {
    throw std::invalid_argument("channel_matrix: no channels given.");
  }
  CMat h(static_cast<Index>(channels.size()), channels[0].size());
  for (std::size_t n = 0; n < channels.size(); ++n) {
    h.row(static_cast<Index>(n)) = flatten_channel(channels[n]);
  }
  return h;
}

CMat generate_pilots(Index pilot_length, Index n_users, Rng rng) {
  if (pilot_length < 1 || n_users < 1) {
    throw std::invalid_argument("generate_pilots: L and N must be >= 1.");
  }
  CMat s(pilot_length, n_users);
  for (Index l = 0; l < pilot_length; ++l)
    for (Index n = 0; n < n_users; ++n) s(l, n) = rng.complex_normal();
  return s;
}

namespace {

// Noiseless received tensors G_l = sum_n s_n(l) H^n.
std::vector<Tensor3> noiseless_observations(const std::vector<Tensor3>& channels,
                                            const CMat& pilots) {
  if (channels.empty()) {
    throw std::invalid_argument("synthesize_observations: no channels.");
  }
  if (pilots.cols() != static_cast<Index>(channels.size())) {
    throw std::invalid_argument(
        "synthesize_observations: pilot columns != user count.");
  }
  const auto& dims = channels[0].dims();
  const Index l_len = pilots.rows();
  std::vector<Tensor3> g;
  g.reserve(static_cast<std::size_t>(l_len));
  for (Index l = 0; l < l_len; ++l) {
    Tensor3 gl(dims[0], dims[1], dims[2]);
    for (std::size_t n = 0; n < channels.size(); ++n) {
      gl.data() += pilots(l, static_cast<Index>(n)) * channels[n].data();
    }
    g.push_back(std::move(gl));
  }
  return g;
}

ObservationBatch add_noise(std::vector<Tensor3> g, const CMat& pilots,
                           double beta, double snr_db, Rng& rng,
                           std::uint64_t seed) {
  ObservationBatch obs;
  obs.pilots = pilots;
  obs.noise_precision = beta;
  obs.snr_db = snr_db;
  obs.seed = seed;
  if (std::isinf(beta)) {
    obs.observations = std::move(g);
    return obs;
  }
  const double sigma = std::sqrt(1.0 / beta);
  for (auto& gl : g) {
    for (Index i = 0; i < gl.size(); ++i) {
      gl.data()[i] += sigma * rng.complex_normal();
    }
  }
  obs.observations = std::move(g);
  return obs;
}

}  // namespace

ObservationBatch synthesize_observations(const std::vector<Tensor3>& channels,
                                         const CMat& pilots, double snr_db,
                                         Rng rng, std::uint64_t seed) {
  auto g = noiseless_observations(channels, pilots);
  if (std::isinf(snr_db) && snr_db > 0) {
    return add_noise(std::move(g), pilots, kInf, kInf, rng, seed);
  }
  double signal_power = 0.0;
  for (const auto& gl : g) signal_power += gl.squared_norm();
  if (signal_power <= 0.0) {
    throw std::invalid_argument(
        "synthesize_observations: zero signal power, SNR target undefined "
        "(use the explicit noise-precision variant).");
  }
  const Index m = g[0].size();
  const Index l_len = pilots.rows();
  const double noise_power =
      signal_power / std::pow(10.0, snr_db / 10.0);  // E||W||_F^2 target
  const double sigma2 = noise_power / static_cast<double>(m * l_len);
  return add_noise(std::move(g), pilots, 1.0 / sigma2, snr_db, rng, seed);
}

ObservationBatch synthesize_observations_with_precision(
    const std::vector<Tensor3>& channels, const CMat& pilots,
    double noise_precision, Rng rng, std::uint64_t seed) {
  if (!(noise_precision > 0.0)) {
    throw std::invalid_argument(
        "synthesize_observations: noise precision must be positive.");
  }
  auto g = noiseless_observations(channels, pilots);
  double signal_power = 0.0;
  for (const auto& gl : g) signal_power += gl.squared_norm();
  const Index m = g[0].size();
  const Index l_len = pilots.rows();
  const double expected_noise =
      static_cast<double>(m * l_len) / noise_precision;
  const double snr_db = std::isinf(noise_precision)
                            ? kInf
                            : 10.0 * std::log10(signal_power / expected_noise);
  return add_noise(std::move(g), pilots, noise_precision, snr_db, rng, seed);
}

CMat received_matrix(const ObservationBatch& obs) {
  const Index l_len = obs.pilot_length();
  if (static_cast<Index>(obs.observations.size()) != l_len) {
    throw std::invalid_argument("received_matrix: tensor count != pilot length.");
  }
  CMat y(l_len, obs.observations[0].size());
  for (Index l = 0; l < l_len; ++l) {
    y.row(l) = obs.observations[static_cast<std::size_t>(l)].data().transpose();
  }
  return y;
}

}  // namespace muce
