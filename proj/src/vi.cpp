// SPDX-License-Identifier: Apache-2.0
#include "muce/vi.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fit_context.hpp"
#include "hpd.hpp"

namespace muce {

namespace {

void check_state(const PosteriorState& state, const ObservationBatch& obs) {
  if (static_cast<Index>(state.users.size()) != obs.user_count()) {
    throw std::invalid_argument("posterior state user count mismatch.");
  }
  const auto& dims = obs.dims();
  for (const auto& u : state.users) {
    for (int k = 0; k < 3; ++k) {
      if (u.mean[static_cast<std::size_t>(k)].rows() !=
          dims[static_cast<std::size_t>(k)]) {
        throw std::invalid_argument("posterior mean dimensions mismatch.");
      }
    }
  }
}

// E[Xi^T Xi^*] = M^T M^* + I_k Sigma^* for one mode (0-based).
CMat second_moment_t(const PosteriorState::UserState& u, int j) {
  const auto ju = static_cast<std::size_t>(j);
  const double rows = static_cast<double>(u.mean[ju].rows());
  return u.mean[ju].transpose() * u.mean[ju].conjugate() +
         rows * u.cov[ju].conjugate();
}

// E[Xi^H Xi] = M^H M + I_k Sigma for one mode (0-based).
CMat second_moment_h(const PosteriorState::UserState& u, int j) {
  const auto ju = static_cast<std::size_t>(j);
  const double rows = static_cast<double>(u.mean[ju].rows());
  return u.mean[ju].adjoint() * u.mean[ju] + rows * u.cov[ju];
}

}  // namespace

PosteriorState init_posterior(const std::array<Index, 3>& dims,
                              const std::vector<int>& rank_bounds,
                              double epsilon, Rng rng) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("init_posterior: epsilon must be positive.");
  }
  PosteriorState state;
  state.epsilon = epsilon;
  state.noise_shape = epsilon;
  state.noise_rate = epsilon;
  state.users.resize(rank_bounds.size());
  for (std::size_t n = 0; n < rank_bounds.size(); ++n) {
    const int rbar = rank_bounds[n];
    if (rbar < 1) {
      throw std::invalid_argument("init_posterior: rank bounds must be >= 1.");
    }
    auto& u = state.users[n];
    for (int k = 0; k < 3; ++k) {
      CMat m(dims[static_cast<std::size_t>(k)], rbar);
      for (Index c = 0; c < m.cols(); ++c)
        for (Index i = 0; i < m.rows(); ++i) m(i, c) = rng.complex_normal();
      u.mean[static_cast<std::size_t>(k)] = std::move(m);
      u.cov[static_cast<std::size_t>(k)] = CMat::Identity(rbar, rbar);
    }
    u.gamma_shape = Eigen::VectorXd::Constant(rbar, epsilon);
    u.gamma_rate = Eigen::VectorXd::Constant(rbar, epsilon);
  }
  return state;
}

CMat expected_gram(const PosteriorState& state, Index user, int excluded_mode) {
  const auto [ja, jb] = detail::complement_modes(excluded_mode);
  const auto& u = state.users.at(static_cast<std::size_t>(user));
  return second_moment_t(u, ja).cwiseProduct(second_moment_t(u, jb));
}

double expected_column_power(const PosteriorState& state, Index user, int mode,
                             Index column) {
  if (mode < 1 || mode > 3) {
    throw std::invalid_argument("expected_column_power: mode must be 1..3.");
  }
  const auto& u = state.users.at(static_cast<std::size_t>(user));
  const auto k = static_cast<std::size_t>(mode - 1);
  const double rows = static_cast<double>(u.mean[k].rows());
  return u.mean[k].col(column).squaredNorm() +
         rows * u.cov[k](column, column).real();
}

void update_factor_posterior(PosteriorState& state, const ObservationBatch& obs,
                             Index user, int mode) {
  check_state(state, obs);
  auto& u = state.users[static_cast<std::size_t>(user)];
  const auto [ja, jb] = detail::complement_modes(mode);
  const double e_beta = state.expected_noise_precision();
  const double pilot_energy = obs.pilots.col(user).squaredNorm();

  CMat precision = (pilot_energy * e_beta) * expected_gram(state, user, mode);
  precision.diagonal() +=
      u.gamma_mean().cast<cplx>();
  const CMat sigma = detail::hpd_inverse(precision, "update_factor_posterior");

  // Residual built from the current means of the other users (kappa rule is
  // realized by updating the state in place).
  std::vector<Tensor3> mean_models;
  mean_models.reserve(state.users.size());
  for (const auto& other : state.users) {
    mean_models.push_back(
        cpd_reconstruct(other.mean[0], other.mean[1], other.mean[2]));
  }
  const CMat kr_conj =
      khatri_rao(u.mean[static_cast<std::size_t>(ja)],
                 u.mean[static_cast<std::size_t>(jb)])
          .conjugate();
  CMat accum = CMat::Zero(u.mean[static_cast<std::size_t>(mode - 1)].rows(),
                          u.rank_bound());
  for (Index l = 0; l < obs.pilot_length(); ++l) {
    Tensor3 b = obs.observations[static_cast<std::size_t>(l)];
    for (Index p = 0; p < obs.user_count(); ++p) {
      if (p == user) continue;
      b.data() -= obs.pilots(l, p) * mean_models[static_cast<std::size_t>(p)].data();
    }
    accum += std::conj(obs.pilots(l, user)) * (unfold(b, mode) * kr_conj);
  }
  u.cov[static_cast<std::size_t>(mode - 1)] = sigma;
  u.mean[static_cast<std::size_t>(mode - 1)] = e_beta * (accum * sigma);
}

void update_gamma_posterior(PosteriorState& state, Index user) {
  auto& u = state.users.at(static_cast<std::size_t>(user));
  double dim_sum = 0.0;
  for (int k = 0; k < 3; ++k) {
    dim_sum += static_cast<double>(u.mean[static_cast<std::size_t>(k)].rows());
  }
  for (Index r = 0; r < u.rank_bound(); ++r) {
    double power = 0.0;
    for (int k = 1; k <= 3; ++k) {
      power += expected_column_power(state, user, k, r);
    }
    u.gamma_shape[r] = state.epsilon + dim_sum;
    u.gamma_rate[r] = state.epsilon + power;
    if (!(u.gamma_rate[r] > 0.0)) {
      throw std::logic_error("update_gamma_posterior: nonpositive rate.");
    }
  }
}

namespace {

// Shared closed form of E||Y_l - sum_n s_n(l) [[Xi^n]]||^2 given the data
// cross term sum_n 2 Re Tr(D_n KR2_n^* M^(1),n,H) already evaluated.
// Remaining terms: cross-user mean products and same-user second moments.
double fit_error_model_terms(const PosteriorState& state,
                             const std::function<cplx(Index, Index)>& pilot_prod) {
  const Index n_users = static_cast<Index>(state.users.size());
  cplx cross{0.0, 0.0};
  for (Index n = 0; n < n_users; ++n) {
    const auto& un = state.users[static_cast<std::size_t>(n)];
    for (Index p = 0; p < n_users; ++p) {
      if (p == n) continue;
      const auto& up = state.users[static_cast<std::size_t>(p)];
      // KR2_n^T KR2_p^* = (M3_n^T M3_p^*) had (M2_n^T M2_p^*)
      const CMat q = (un.mean[2].transpose() * up.mean[2].conjugate())
                         .cwiseProduct(un.mean[1].transpose() *
                                       up.mean[1].conjugate());
      // Tr(M1_n Q M1_p^H) = sum over (M1_p^H M1_n) entrywise* Q^T
      const cplx tr =
          ((up.mean[0].adjoint() * un.mean[0]).cwiseProduct(q.transpose()))
              .sum();
      cross += pilot_prod(n, p) * tr;
    }
  }
  double same = 0.0;
  for (Index n = 0; n < n_users; ++n) {
    const auto& u = state.users[static_cast<std::size_t>(n)];
    const CMat e1 = second_moment_h(u, 0);
    const CMat e23 = second_moment_h(u, 1).conjugate().cwiseProduct(
        second_moment_h(u, 2).conjugate());
    same += pilot_prod(n, n).real() * (e1.cwiseProduct(e23.transpose())).sum().real();
  }
  return cross.real() + same;
}

double clamp_fit_error(double value, double data_norm, const char* who) {
  if (value < -1e-8 * data_norm) {
    throw std::logic_error(std::string(who) +
                           ": negative expected fit error beyond tolerance.");
  }
  return std::max(value, 0.0);
}

}  // namespace

double expected_fit_error(const PosteriorState& state,
                          const ObservationBatch& obs, Index l) {
  check_state(state, obs);
  if (l < 0 || l >= obs.pilot_length()) {
    throw std::invalid_argument("expected_fit_error: pilot index out of range.");
  }
  const auto& yl = obs.observations[static_cast<std::size_t>(l)];
  const CMat yl1 = unfold(yl, 1);
  double value = yl.squared_norm();
  for (Index n = 0; n < obs.user_count(); ++n) {
    const auto& u = state.users[static_cast<std::size_t>(n)];
    const CMat kr2_conj = khatri_rao(u.mean[2], u.mean[1]).conjugate();
    const CMat proj = yl1 * kr2_conj;  // I1 x Rbar
    const cplx tr = (proj.cwiseProduct(u.mean[0].conjugate())).sum();
    value -= 2.0 * (std::conj(obs.pilots(l, n)) * tr).real();
  }
  value += fit_error_model_terms(state, [&](Index n, Index p) {
    return obs.pilots(l, n) * std::conj(obs.pilots(l, p));
  });
  return clamp_fit_error(value, yl.squared_norm(), "expected_fit_error");
}

void update_noise_posterior(PosteriorState& state, const ObservationBatch& obs) {
  check_state(state, obs);
  const auto& dims = obs.dims();
  const double observations =
      static_cast<double>(dims[0] * dims[1] * dims[2] * obs.pilot_length());
  double total = 0.0;
  for (Index l = 0; l < obs.pilot_length(); ++l) {
    total += expected_fit_error(state, obs, l);
  }
  state.noise_shape = state.epsilon + observations;
  state.noise_rate = state.epsilon + total;
}

double log_joint(const ObservationBatch& obs,
                 const std::vector<FactorSet>& factors,
                 const std::vector<Eigen::VectorXd>& gammas, double beta,
                 double epsilon) {
  if (!(beta > 0.0)) {
    throw std::domain_error("log_joint: beta must be positive.");
  }
  if (gammas.size() != factors.size()) {
    throw std::invalid_argument("log_joint: one gamma vector per user.");
  }
  const auto& dims = obs.dims();
  const double m_total = static_cast<double>(dims[0] * dims[1] * dims[2]);
  const double l_len = static_cast<double>(obs.pilot_length());

  double lj = m_total * l_len * std::log(beta) - beta * objective(obs, factors);
  lj += (epsilon - 1.0) * std::log(beta) - epsilon * beta;
  for (std::size_t n = 0; n < factors.size(); ++n) {
    const auto& g = gammas[n];
    if ((g.array() <= 0.0).any()) {
      throw std::domain_error("log_joint: gammas must be positive.");
    }
    if (g.size() != factors[n].rank()) {
      throw std::invalid_argument("log_joint: gamma length != factor rank.");
    }
    for (int k = 0; k < 3; ++k) {
      const CMat& f = factors[n][k];
      for (Index r = 0; r < f.cols(); ++r) {
        lj -= g[r] * f.col(r).squaredNorm();
      }
      lj += static_cast<double>(f.rows()) * g.array().log().sum();
    }
    lj += ((epsilon - 1.0) * g.array().log() - epsilon * g.array()).sum();
  }
  return lj;
}

namespace {

// In-sweep factor update against the precomputed pilot-correlated data;
// algebraically the same as update_factor_posterior.
void sweep_update_factor(PosteriorState& state, const detail::FitContext& ctx,
                         Index user, int mode, double* rel_change) {
  auto& u = state.users[static_cast<std::size_t>(user)];
  const auto [ja, jb] = detail::complement_modes(mode);
  const double e_beta = state.expected_noise_precision();
  const double pilot_energy = ctx.pilot_gram(user, user).real();

  const CMat wa = second_moment_t(u, ja);
  const CMat wb = second_moment_t(u, jb);
  CMat precision = (pilot_energy * e_beta) * wa.cwiseProduct(wb);
  precision.diagonal() += u.gamma_mean().cast<cplx>();
  const CMat sigma = detail::hpd_inverse(precision, "vi_solve");

  const CMat kr_conj =
      khatri_rao(u.mean[static_cast<std::size_t>(ja)],
                 u.mean[static_cast<std::size_t>(jb)])
          .conjugate();
  CMat numer = ctx.data_unfoldings[static_cast<std::size_t>(user)]
                                  [static_cast<std::size_t>(mode - 1)] *
               kr_conj;
  for (Index p = 0; p < static_cast<Index>(state.users.size()); ++p) {
    if (p == user) continue;
    const auto& up = state.users[static_cast<std::size_t>(p)];
    const CMat cross =
        (up.mean[static_cast<std::size_t>(ja)].transpose() *
         u.mean[static_cast<std::size_t>(ja)].conjugate())
            .cwiseProduct(up.mean[static_cast<std::size_t>(jb)].transpose() *
                          u.mean[static_cast<std::size_t>(jb)].conjugate());
    numer -= ctx.pilot_gram(user, p) *
             (up.mean[static_cast<std::size_t>(mode - 1)] * cross);
  }
  CMat updated = e_beta * (numer * sigma);
  if (rel_change != nullptr) {
    const CMat& old = u.mean[static_cast<std::size_t>(mode - 1)];
    const double denom = std::max(old.norm(), 1e-300);
    *rel_change = std::max(*rel_change, (updated - old).norm() / denom);
  }
  u.cov[static_cast<std::size_t>(mode - 1)] = sigma;
  u.mean[static_cast<std::size_t>(mode - 1)] = std::move(updated);
}

// sum_l E||Y_l - G_l||^2 with the per-pilot sums collapsed onto the pilot
// Gram; equals summing expected_fit_error over l.
double total_expected_fit_error(const PosteriorState& state,
                                const detail::FitContext& ctx) {
  double value = ctx.data_sq_norm;
  const Index n_users = static_cast<Index>(state.users.size());
  for (Index n = 0; n < n_users; ++n) {
    const auto& u = state.users[static_cast<std::size_t>(n)];
    const CMat kr2_conj = khatri_rao(u.mean[2], u.mean[1]).conjugate();
    const CMat proj =
        ctx.data_unfoldings[static_cast<std::size_t>(n)][0] * kr2_conj;
    value -= 2.0 * (proj.cwiseProduct(u.mean[0].conjugate())).sum().real();
  }
  value += fit_error_model_terms(
      state, [&](Index n, Index p) { return ctx.pilot_gram(p, n); });
  return clamp_fit_error(value, ctx.data_sq_norm, "vi_solve");
}

std::vector<Tensor3> mean_channels(const PosteriorState& state) {
  std::vector<Tensor3> channels;
  channels.reserve(state.users.size());
  for (const auto& u : state.users) {
    channels.push_back(cpd_reconstruct(u.mean[0], u.mean[1], u.mean[2]));
  }
  return channels;
}

}  // namespace

ViResult vi_solve(const ObservationBatch& obs,
                  const std::vector<int>& rank_bounds, const ViOptions& options,
                  Rng init_rng, const std::vector<Tensor3>* truth) {
  if (static_cast<Index>(rank_bounds.size()) != obs.user_count()) {
    throw std::invalid_argument("vi_solve: one rank bound per user required.");
  }
  const detail::FitContext ctx(obs);
  ViResult result;
  result.state =
      init_posterior(obs.dims(), rank_bounds, options.epsilon, std::move(init_rng));
  PosteriorState& state = result.state;
  const Index n_users = obs.user_count();

  for (int iter = 1; iter <= options.max_iters; ++iter) {
    double rel_change = 0.0;
    for (Index n = 0; n < n_users; ++n) {
      for (int k = 1; k <= 3; ++k) {
        sweep_update_factor(state, ctx, n, k, &rel_change);
      }
    }
    for (Index n = 0; n < n_users; ++n) {
      update_gamma_posterior(state, n);
    }
    const auto& dims = ctx.dims;
    state.noise_shape =
        state.epsilon +
        static_cast<double>(dims[0] * dims[1] * dims[2] * obs.pilot_length());
    state.noise_rate = state.epsilon + total_expected_fit_error(state, ctx);

    result.iterations = iter;
    result.beta_trace.push_back(state.expected_noise_precision());
    std::vector<double> gammas;
    for (const auto& u : state.users) {
      const Eigen::VectorXd g = u.gamma_mean();
      gammas.insert(gammas.end(), g.data(), g.data() + g.size());
    }
    result.gamma_trace.push_back(std::move(gammas));
    if (truth != nullptr) {
      const auto channels = mean_channels(state);
      double err = 0.0;
      for (std::size_t n = 0; n < channels.size(); ++n) {
        err += (channels[n].data() - (*truth)[n].data()).squaredNorm();
      }
      const double m_total = static_cast<double>(channels[0].size());
      result.mse_trace.push_back(err / (m_total * static_cast<double>(n_users)));
    }
    if (rel_change < options.rel_tol) {
      result.converged = true;
      break;
    }
  }
  result.channels = mean_channels(state);
  return result;
}

int estimate_path_count(const Eigen::VectorXd& gamma_means) {
  const Index rbar = gamma_means.size();
  if (rbar < 2) return static_cast<int>(rbar);
  std::vector<double> logs(static_cast<std::size_t>(rbar));
  for (Index r = 0; r < rbar; ++r) {
    logs[static_cast<std::size_t>(r)] = std::log10(gamma_means[r]);
  }
  std::sort(logs.begin(), logs.end());
  if (logs.back() - logs.front() < 1.0) {
    return static_cast<int>(rbar);  // under one decade: no separation
  }
  std::size_t split = 0;
  double widest = -1.0;
  for (std::size_t i = 0; i + 1 < logs.size(); ++i) {
    const double gap = logs[i + 1] - logs[i];
    if (gap > widest) {
      widest = gap;
      split = i;
    }
  }
  return static_cast<int>(split + 1);
}

std::vector<int> estimate_path_counts(const PosteriorState& state) {
  std::vector<int> counts;
  counts.reserve(state.users.size());
  for (const auto& u : state.users) {
    counts.push_back(estimate_path_count(u.gamma_mean()));
  }
  return counts;
}

}  // namespace muce
