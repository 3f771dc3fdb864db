// SPDX-License-Identifier: Apache-2.0
#include "muce/estimators.hpp"

#include <doctest.h>

#include <Eigen/SVD>
#include <cmath>

#include "muce/metrics.hpp"
#include "test_util.hpp"

using namespace muce;
using testutil::random_cmat;
using testutil::random_factors;
using testutil::small_instance;

namespace {

// Moore-Penrose solve via SVD, as an independent route for the LS estimate.
CMat pinv_solve(const CMat& s, const CMat& y) {
  Eigen::JacobiSVD<CMat> svd(s, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.solve(y);
}

using testutil::expanded_objective;

// Objective of the single-factor subproblem, for finite-difference checks.
double subproblem_objective(const ObservationBatch& obs,
                            const std::vector<FactorSet>& factors, int mode,
                            Index user, const CMat& candidate) {
  auto modified = factors;
  modified[static_cast<std::size_t>(user)][mode - 1] = candidate;
  return objective(obs, modified);
}

}  // namespace

TEST_CASE("ls_estimate exact recovery and oracle agreement") {
  Rng rng(101);
  // square invertible pilots, noiseless: exact recovery
  const CMat s = random_cmat(5, 5, rng);
  const CMat h = random_cmat(5, 24, rng);
  const CMat y = s * h;
  const CMat est = ls_estimate(y, s);
  CHECK((est - h).norm() < 1e-10 * h.norm());

  // orthonormal pilot columns: estimate equals S^H Y
  Eigen::HouseholderQR<CMat> qr(random_cmat(8, 3, rng));
  const CMat q = qr.householderQ() * CMat::Identity(8, 3);
  const CMat y2 = random_cmat(8, 10, rng);
  CHECK((ls_estimate(y2, q) - q.adjoint() * y2).norm() < 1e-10);

  // tall random instance matches the pseudo-inverse route
  const CMat s3 = random_cmat(50, 5, rng);
  const CMat y3 = random_cmat(50, 30, rng);
  const CMat est3 = ls_estimate(y3, s3);
  CHECK((est3 - pinv_solve(s3, y3)).norm() < 1e-10 * est3.norm());

  // rank-deficient pilots rejected with the condition number named
  CMat bad = random_cmat(6, 3, rng);
  bad.col(2) = bad.col(0);
  CHECK_THROWS_WITH_AS(ls_estimate(random_cmat(6, 4, rng), bad),
                       doctest::Contains("condition number"),
                       std::runtime_error);
  CHECK_THROWS_AS(ls_estimate(random_cmat(3, 4, rng), random_cmat(3, 4, rng)),
                  std::invalid_argument);
}

TEST_CASE("objective: perfect fit, zero model, expanded-form oracle") {
  Rng rng(202);
  const auto inst = small_instance({3, 4, 2}, 2, 2, 5, 0.0, rng);
  CHECK(objective(inst.obs, inst.factors) < 1e-18);

  std::vector<FactorSet> zero = inst.factors;
  double data_norm = 0.0;
  for (auto& f : zero) {
    for (int k = 0; k < 3; ++k) f[k].setZero();
  }
  for (const auto& y : inst.obs.observations) data_norm += y.squared_norm();
  CHECK(objective(inst.obs, zero) == doctest::Approx(data_norm).epsilon(1e-12));

  const auto noisy = small_instance({4, 3, 3}, 3, 2, 6, 0.3, rng);
  const double direct = objective(noisy.obs, noisy.factors);
  for (int mode = 1; mode <= 3; ++mode) {
    const double expanded = expanded_objective(noisy.obs, noisy.factors, mode);
    CHECK(std::abs(direct - expanded) < 1e-10 * direct);
  }
}

TEST_CASE("residual_tensor: single user, cancellation, summation oracle") {
  Rng rng(303);
  const auto one = small_instance({3, 3, 2}, 1, 2, 4, 0.2, rng);
  const Tensor3 b = residual_tensor(one.obs, one.factors, 2, 0);
  CHECK((b.data() - one.obs.observations[2].data()).norm() == 0.0);

  // all other users at truth, noiseless: residual equals s_n(l) H^n
  const auto multi = small_instance({3, 2, 2}, 3, 2, 5, 0.0, rng);
  const Tensor3 bn = residual_tensor(multi.obs, multi.factors, 1, 1);
  const Tensor3 expected =
      multi.obs.pilots(1, 1) * cpd_reconstruct(multi.factors[1]);
  CHECK((bn.data() - expected.data()).norm() < 1e-12 * expected.norm());

  // direct summation oracle
  Tensor3 oracle = multi.obs.observations[1];
  for (Index p = 0; p < 3; ++p) {
    if (p == 1) continue;
    oracle.data() -= multi.obs.pilots(1, p) *
                     cpd_reconstruct(multi.factors[static_cast<std::size_t>(p)]).data();
  }
  CHECK((bn.data() - oracle.data()).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(residual_tensor(multi.obs, multi.factors, 9, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(residual_tensor(multi.obs, multi.factors, 0, 7),
                  std::invalid_argument);
}

TEST_CASE("bcd_update_factor: consistency, normal equations, monotonicity") {
  Rng rng(404);
  // single user, noiseless, other modes at truth: the update reproduces the
  // channel through the updated mode
  const auto one = small_instance({4, 3, 3}, 1, 2, 5, 0.0, rng);
  for (int mode = 1; mode <= 3; ++mode) {
    auto perturbed = one.factors;
    perturbed[0][mode - 1] = random_cmat(perturbed[0][mode - 1].rows(),
                                         perturbed[0][mode - 1].cols(), rng);
    const CMat updated = bcd_update_factor(one.obs, perturbed, mode, 0);
    perturbed[0][mode - 1] = updated;
    const Tensor3 recon = cpd_reconstruct(perturbed[0]);
    const Tensor3 truth = cpd_reconstruct(one.factors[0]);
    CHECK((recon.data() - truth.data()).norm() < 1e-8 * truth.norm());
  }

  // noisy multi-user instance: normal equations hold at the minimizer and
  // the coupled objective does not increase
  const auto inst = small_instance({3, 3, 2}, 2, 2, 6, 0.4, rng);
  auto factors = inst.factors;
  for (auto& f : factors) {
    for (int k = 0; k < 3; ++k) f[k] = random_cmat(f[k].rows(), f[k].cols(), rng);
  }
  const double before = objective(inst.obs, factors);
  const int mode = 2;
  const Index user = 0;
  const CMat updated = bcd_update_factor(inst.obs, factors, mode, user);

  // residual of Z = X * D against the Eq.-style normal equations
  const CMat kr = khatri_rao(factors[0][2], factors[0][0]);
  CMat z = CMat::Zero(updated.rows(), updated.cols());
  for (Index l = 0; l < inst.obs.pilot_length(); ++l) {
    z += std::conj(inst.obs.pilots(l, user)) *
         (unfold(residual_tensor(inst.obs, factors, l, user), mode) *
          kr.conjugate());
  }
  const CMat gram =
      inst.obs.pilots.col(user).squaredNorm() * (kr.transpose() * kr.conjugate());
  CHECK((updated * gram - z).norm() < 1e-8 * z.norm());

  // finite-difference gradient of the subproblem at the minimizer (real
  // parameterization, central differences on a few entries)
  auto with_update = factors;
  with_update[static_cast<std::size_t>(user)][mode - 1] = updated;
  const double at_min = subproblem_objective(inst.obs, factors, mode, user, updated);
  const double h = 1e-5;
  double grad_max = 0.0;
  for (const auto& [i, r] : {std::pair<Index, Index>{0, 0}, {1, 1}, {2, 0}}) {
    for (int part = 0; part < 2; ++part) {
      CMat plus = updated, minus = updated;
      const cplx delta = part == 0 ? cplx(h, 0.0) : cplx(0.0, h);
      plus(i, r) += delta;
      minus(i, r) -= delta;
      const double g = (subproblem_objective(inst.obs, factors, mode, user, plus) -
                        subproblem_objective(inst.obs, factors, mode, user, minus)) /
                       (2.0 * h);
      grad_max = std::max(grad_max, std::abs(g));
    }
  }
  CHECK(grad_max < 2e-5 * std::max(1.0, at_min));

  const double after = objective(inst.obs, with_update);
  CHECK(after <= before + 1e-10 * before);
}

TEST_CASE("bcd_solve sweep matches sequential reference updates") {
  Rng rng(505);
  const auto inst = small_instance({3, 3, 3}, 2, 2, 5, 0.3, rng);
  auto init = random_factor_init({3, 3, 3}, {2, 2}, Rng(42));

  BcdOptions options;
  options.max_sweeps = 1;
  const auto solved = bcd_solve(inst.obs, init, options);

  auto reference = init;
  for (Index n = 0; n < 2; ++n) {
    for (int k = 1; k <= 3; ++k) {
      reference[static_cast<std::size_t>(n)][k - 1] =
          bcd_update_factor(inst.obs, reference, k, n);
    }
  }
  for (std::size_t n = 0; n < 2; ++n) {
    for (int k = 0; k < 3; ++k) {
      const double scale = reference[n][k].norm();
      CHECK((solved.factors[n][k] - reference[n][k]).norm() < 1e-10 * scale);
    }
  }
}

TEST_CASE("bcd_solve: fixed point at truth and noiseless recovery") {
  Rng rng(606);
  const auto inst = small_instance({4, 4, 4}, 2, 2, 6, 0.0, rng);
  BcdOptions options;
  const auto at_truth = bcd_solve(inst.obs, inst.factors, options);
  CHECK(at_truth.converged);
  CHECK(at_truth.sweeps == 1);
  CHECK(at_truth.objective_trace.back() < 1e-18);

  // random init, noiseless, exact rank: recover the channel
  int successes = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto init = random_factor_init({4, 4, 4}, {2, 2},
                                   Rng::substream(7, {kStreamBcdInit, seed}));
    options.max_sweeps = 500;
    const auto result = bcd_solve(inst.obs, std::move(init), options);
    double err = 0.0, norm = 0.0;
    for (std::size_t n = 0; n < 2; ++n) {
      const Tensor3 truth = cpd_reconstruct(inst.factors[n]);
      err += (result.channels[n].data() - truth.data()).squaredNorm();
      norm += truth.squared_norm();
    }
    if (std::sqrt(err / norm) < 1e-6) ++successes;
  }
  CHECK(successes >= 2);
}

TEST_CASE("bcd objective trace is non-increasing on the paper setup") {
  const auto scenario = testutil::paper_scenario(20.0, 99);
  BcdOptions options;
  options.max_sweeps = 20;
  options.record_update_objectives = true;
  auto init = random_factor_init({8, 8, 8}, std::vector<int>(5, 3),
                                 Rng::substream(99, {kStreamBcdInit, 0}));
  const auto result = bcd_solve(scenario.obs, std::move(init), options);
  REQUIRE(result.update_objectives.size() > 1);
  for (std::size_t i = 1; i < result.update_objectives.size(); ++i) {
    CHECK(result.update_objectives[i] <=
          result.update_objectives[i - 1] * (1.0 + 1e-10));
  }
}

TEST_CASE("single-user ALS reaches machine fit when k-rank condition holds") {
  Rng rng(707);
  const std::array<Index, 3> dims{4, 3, 2};
  const auto inst = small_instance(dims, 1, 2, 4, 0.0, rng);
  int k_sum = 0;
  for (int k = 0; k < 3; ++k) k_sum += kruskal_rank(inst.factors[0][k]);
  REQUIRE(k_sum >= 2 * 2 + 2);  // uniqueness condition for rank 2

  BcdOptions options;
  options.max_sweeps = 2000;
  bool fit = false;
  for (std::uint64_t seed = 0; seed < 5 && !fit; ++seed) {
    auto init =
        random_factor_init(dims, {2}, Rng::substream(11, {kStreamBcdInit, seed}));
    const auto result = bcd_solve(inst.obs, std::move(init), options);
    double data_norm = 0.0;
    for (const auto& y : inst.obs.observations) data_norm += y.squared_norm();
    fit = result.objective_trace.back() < 1e-20 * data_norm;
  }
  CHECK(fit);
}

TEST_CASE("paper setup: BCD beats LS at 20 dB") {
  const auto s = testutil::paper_scenario(20.0, 1234);
  const CMat ls = ls_estimate(received_matrix(s.obs), s.obs.pilots);
  std::vector<Tensor3> ls_channels;
  for (Index n = 0; n < 5; ++n) {
    ls_channels.emplace_back(std::array<Index, 3>{8, 8, 8},
                             ls.row(n).transpose());
  }
  const double ls_mse = mse(ls_channels, s.channels);

  auto init = random_factor_init({8, 8, 8}, std::vector<int>(5, 3),
                                 Rng::substream(1234, {kStreamBcdInit, 0}));
  const auto bcd = bcd_solve(s.obs, std::move(init), {});
  const double bcd_mse = mse(bcd.channels, s.channels);
  CHECK(bcd_mse < ls_mse);
}
