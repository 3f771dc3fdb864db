// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "muce/channel.hpp"
#include "muce/estimators.hpp"
#include "muce/tensor.hpp"

namespace muce {

// Mean-field variational posterior over the coupled CPD model:
// matrix-normal factors (mean M^(k),n, column covariance Sigma^(k),n, row
// covariance identity), per-column gamma precisions gamma_r^n with
// shape/rate (a_r^n, b_r^n), and a gamma noise precision beta with
// shape/rate (c, d).
struct PosteriorState {
  struct UserState {
    std::array<CMat, 3> mean;       // M^(k),n, I_k x Rbar
    std::array<CMat, 3> cov;        // Sigma^(k),n, Rbar x Rbar Hermitian PD
    Eigen::VectorXd gamma_shape;    // a_r
    Eigen::VectorXd gamma_rate;     // b_r

    Index rank_bound() const { return mean[0].cols(); }
    Eigen::VectorXd gamma_mean() const {
      return gamma_shape.cwiseQuotient(gamma_rate);
    }
  };

  std::vector<UserState> users;
  double noise_shape = 0.0;  // c
  double noise_rate = 0.0;   // d
  double epsilon = 1e-6;

  double expected_noise_precision() const { return noise_shape / noise_rate; }
};

// Fresh posterior: means CN(0,1), covariances identity, all gamma and noise
// shape/rate parameters set to epsilon.
PosteriorState init_posterior(const std::array<Index, 3>& dims,
                              const std::vector<int>& rank_bounds,
                              double epsilon, Rng rng);

// E[(KR_{j != k})^T (KR_{j != k})^*], the Hadamard product over the two
// non-excluded modes of (M^T M^* + I_j Sigma^*).
CMat expected_gram(const PosteriorState& state, Index user, int excluded_mode);

// E[||Xi_{:,r}||^2] = ||M_{:,r}||^2 + I_k Sigma_{r,r}.
double expected_column_power(const PosteriorState& state, Index user, int mode,
                             Index column);

// One coordinate-ascent update of (Sigma^(k),n, M^(k),n); the residual uses
// the current means of all other users, the Gram uses the current second
// moments of the user's other two modes.
void update_factor_posterior(PosteriorState& state, const ObservationBatch& obs,
                             Index user, int mode);

// a_r = eps + sum_k I_k;  b_r = eps + sum_k E[||Xi^(k)_{:,r}||^2].
void update_gamma_posterior(PosteriorState& state, Index user);

// Posterior expectation of ||Y_l - sum_n s_n(l) cpd(Xi^n)||_F^2 in closed
// form. Small negative rounding residue is clamped to zero; a residue below
// -1e-8 * ||Y_l||^2 indicates a bug and throws.
double expected_fit_error(const PosteriorState& state,
                          const ObservationBatch& obs, Index l);

// c = eps + I1*I2*I3*L;  d = eps + sum_l E[fit error_l].
void update_noise_posterior(PosteriorState& state, const ObservationBatch& obs);

// Log of the joint density at point values of all latent variables, up to
// the parameter-free additive constant. Diagnostic only.
double log_joint(const ObservationBatch& obs,
                 const std::vector<FactorSet>& factors,
                 const std::vector<Eigen::VectorXd>& gammas, double beta,
                 double epsilon);

struct ViOptions {
  int max_iters = 500;
  double rel_tol = 1e-6;   // on the max relative factor-mean change
  double epsilon = 1e-6;   // non-informative gamma hyperparameter
};

struct ViResult {
  PosteriorState state;
  std::vector<Tensor3> channels;  // cpd of the posterior means
  int iterations = 0;
  bool converged = false;
  // Per-iteration traces: channel MSE (only when truth supplied), E[beta],
  // and all E[gamma_r^n] concatenated user-major.
  std::vector<double> mse_trace;
  std::vector<double> beta_trace;
  std::vector<std::vector<double>> gamma_trace;
};

// Tuning-free estimator: per iteration, factor posteriors in user-outer
// mode-inner order (in place, so later updates see the newest statistics),
// then all gamma posteriors, then the noise posterior. Stops when the max
// relative change of all factor means drops below rel_tol.
ViResult vi_solve(const ObservationBatch& obs,
                  const std::vector<int>& rank_bounds, const ViOptions& options,
                  Rng init_rng, const std::vector<Tensor3>* truth = nullptr);

// Recovered path count from a user's gamma means: retained components have
// small E[gamma]. Sorts log10 values, splits at the largest consecutive gap
// and returns the count below it; returns the bound itself when the spread
// is below one decade (no separation).
int estimate_path_count(const Eigen::VectorXd& gamma_means);

// estimate_path_count per user.
std::vector<int> estimate_path_counts(const PosteriorState& state);

}  // namespace muce
