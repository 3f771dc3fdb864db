// SPDX-License-Identifier: Apache-2.0
#include "muce/estimators.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fit_context.hpp"
#include "hpd.hpp"

namespace muce {

CMat ls_estimate(const CMat& y, const CMat& pilots) {
  const Index l_len = pilots.rows(), n_users = pilots.cols();
  if (y.rows() != l_len) {
    throw std::invalid_argument("ls_estimate: Y rows != pilot length.");
  }
  if (l_len < n_users) {
    throw std::invalid_argument("ls_estimate: pilot length below user count.");
  }
  Eigen::JacobiSVD<CMat> svd(pilots);
  const double smax = svd.singularValues().maxCoeff();
  const double smin = svd.singularValues().minCoeff();
  const double cond = (smin > 0.0) ? (smax / smin) * (smax / smin)
                                   : std::numeric_limits<double>::infinity();
  if (!(cond < 1e12)) {
    throw std::runtime_error(
        "ls_estimate: pilot Gram is rank deficient (condition number " +
        std::to_string(cond) + ").");
  }
  const CMat gram = pilots.adjoint() * pilots;
  return detail::hpd_factorize(gram, "ls_estimate").solve(pilots.adjoint() * y);
}

namespace {

void check_factors(const ObservationBatch& obs,
                   const std::vector<FactorSet>& factors) {
  if (static_cast<Index>(factors.size()) != obs.user_count()) {
    throw std::invalid_argument("factor sets != user count.");
  }
  const auto& dims = obs.dims();
  for (const auto& f : factors) {
    for (int k = 0; k < 3; ++k) {
      if (f[k].rows() != dims[static_cast<std::size_t>(k)] ||
          f[k].cols() != f[0].cols()) {
        throw std::invalid_argument("factor set has inconsistent shape.");
      }
    }
  }
}

std::vector<Tensor3> reconstruct_all(const std::vector<FactorSet>& factors) {
  std::vector<Tensor3> out;
  out.reserve(factors.size());
  for (const auto& f : factors) out.push_back(cpd_reconstruct(f));
  return out;
}

}  // namespace

double objective(const ObservationBatch& obs,
                 const std::vector<FactorSet>& factors) {
  check_factors(obs, factors);
  const auto models = reconstruct_all(factors);
  double total = 0.0;
  for (Index l = 0; l < obs.pilot_length(); ++l) {
    CVec resid = obs.observations[static_cast<std::size_t>(l)].data();
    for (Index n = 0; n < obs.user_count(); ++n) {
      resid -= obs.pilots(l, n) * models[static_cast<std::size_t>(n)].data();
    }
    total += resid.squaredNorm();
  }
  return total;
}

Tensor3 residual_tensor(const ObservationBatch& obs,
                        const std::vector<FactorSet>& factors, Index l,
                        Index excluded_user) {
  check_factors(obs, factors);
  if (l < 0 || l >= obs.pilot_length()) {
    throw std::invalid_argument("residual_tensor: pilot index out of range.");
  }
  if (excluded_user < 0 || excluded_user >= obs.user_count()) {
    throw std::invalid_argument("residual_tensor: user index out of range.");
  }
  Tensor3 b = obs.observations[static_cast<std::size_t>(l)];
  for (Index p = 0; p < obs.user_count(); ++p) {
    if (p == excluded_user) continue;
    b.data() -= obs.pilots(l, p) *
                cpd_reconstruct(factors[static_cast<std::size_t>(p)]).data();
  }
  return b;
}

CMat bcd_update_factor(const ObservationBatch& obs,
                       const std::vector<FactorSet>& factors, int mode,
                       Index user) {
  check_factors(obs, factors);
  const auto [ja, jb] = detail::complement_modes(mode);
  const FactorSet& f = factors[static_cast<std::size_t>(user)];
  const CMat kr = khatri_rao(f[ja], f[jb]);
  const CMat kr_conj = kr.conjugate();

  CMat numer = CMat::Zero(f[mode - 1].rows(), f.rank());
  for (Index l = 0; l < obs.pilot_length(); ++l) {
    const Tensor3 b = residual_tensor(obs, factors, l, user);
    numer += std::conj(obs.pilots(l, user)) * (unfold(b, mode) * kr_conj);
  }
  const double pilot_energy = obs.pilots.col(user).squaredNorm();
  const CMat gram = pilot_energy * (kr.transpose() * kr_conj);
  return detail::hpd_solve_right(gram, numer, "bcd_update_factor");
}

namespace {

// In-sweep factor update sharing the precomputed pilot-correlated data.
// Algebraically identical to bcd_update_factor: the per-pilot residual sums
// collapse onto the pilot Gram, so the cost no longer scales with L.
CMat sweep_update_factor(const detail::FitContext& ctx,
                         const std::vector<FactorSet>& factors, int mode,
                         Index user) {
  const auto [ja, jb] = detail::complement_modes(mode);
  const auto n = static_cast<std::size_t>(user);
  const FactorSet& f = factors[n];

  const CMat wa = f[ja].transpose() * f[ja].conjugate();
  const CMat wb = f[jb].transpose() * f[jb].conjugate();
  const CMat gram = ctx.pilot_gram(user, user).real() * wa.cwiseProduct(wb);

  const CMat kr_conj = khatri_rao(f[ja], f[jb]).conjugate();
  CMat numer =
      ctx.data_unfoldings[n][static_cast<std::size_t>(mode - 1)] * kr_conj;
  for (Index p = 0; p < static_cast<Index>(factors.size()); ++p) {
    if (p == user) continue;
    const FactorSet& fp = factors[static_cast<std::size_t>(p)];
    const CMat cross = (fp[ja].transpose() * f[ja].conjugate())
                           .cwiseProduct(fp[jb].transpose() * f[jb].conjugate());
    numer -= ctx.pilot_gram(user, p) * (fp[mode - 1] * cross);
  }
  return detail::hpd_solve_right(gram, numer, "bcd_solve");
}

}  // namespace

BcdResult bcd_solve(const ObservationBatch& obs, std::vector<FactorSet> init,
                    const BcdOptions& options) {
  check_factors(obs, init);
  const detail::FitContext ctx(obs);
  const Index n_users = obs.user_count();

  BcdResult result;
  result.factors = std::move(init);

  double prev = objective(obs, result.factors);
  if (options.record_update_objectives) {
    result.update_objectives.push_back(prev);
  }
  for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    for (Index n = 0; n < n_users; ++n) {
      for (int k = 1; k <= 3; ++k) {
        CMat updated = sweep_update_factor(ctx, result.factors, k, n);
        const double scale = updated.norm();
        for (Index r = 0; r < updated.cols(); ++r) {
          if (updated.col(r).norm() <= 1e-14 * scale) {
            ++result.zero_column_events;
          }
        }
        result.factors[static_cast<std::size_t>(n)][k - 1] = std::move(updated);
        if (options.record_update_objectives) {
          result.update_objectives.push_back(objective(obs, result.factors));
        }
      }
    }
    const double obj = objective(obs, result.factors);
    result.objective_trace.push_back(obj);
    result.sweeps = sweep;
    const double rel = std::abs(prev - obj) / std::max(prev, 1e-300);
    // second clause: machine-level exact fit (noiseless data)
    if (rel < options.rel_tol || obj <= 1e-30 * ctx.data_sq_norm) {
      result.converged = true;
      break;
    }
    prev = obj;
  }
  result.channels = reconstruct_all(result.factors);
  return result;
}

std::vector<FactorSet> random_factor_init(const std::array<Index, 3>& dims,
                                          const std::vector<int>& ranks,
                                          Rng rng) {
  std::vector<FactorSet> factors(ranks.size());
  for (std::size_t n = 0; n < ranks.size(); ++n) {
    if (ranks[n] < 1) {
      throw std::invalid_argument("random_factor_init: ranks must be >= 1.");
    }
    for (int k = 0; k < 3; ++k) {
      CMat m(dims[static_cast<std::size_t>(k)], ranks[n]);
      for (Index c = 0; c < m.cols(); ++c)
        for (Index i = 0; i < m.rows(); ++i) m(i, c) = rng.complex_normal();
      factors[n][k] = std::move(m);
    }
  }
  return factors;
}

}  // namespace muce
