// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Cholesky>
#include <stdexcept>
#include <string>

#include "muce/types.hpp"

namespace muce::detail {

// Jitter added to a Gram diagonal when its Cholesky factorization fails:
// 1e-10 * trace / dimension.
inline double gram_jitter(const CMat& a) {
  return 1e-10 * a.trace().real() / static_cast<double>(a.rows());
}

// Cholesky of a Hermitian positive definite matrix with one jittered retry.
inline Eigen::LLT<CMat> hpd_factorize(const CMat& a, const char* who) {
  Eigen::LLT<CMat> llt(a);
  if (llt.info() == Eigen::Success) return llt;
  CMat jittered = a;
  jittered.diagonal().array() += gram_jitter(a);
  llt.compute(jittered);
  if (llt.info() == Eigen::Success) return llt;
  throw std::runtime_error(std::string(who) +
                           ": Gram matrix singular even after jitter; "
                           "convergence failure for this run.");
}

// Solves X * A = B for X, A Hermitian positive definite.
inline CMat hpd_solve_right(const CMat& a, const CMat& b, const char* who) {
  return hpd_factorize(a, who).solve(b.adjoint()).adjoint();
}

inline CMat hpd_inverse(const CMat& a, const char* who) {
  return hpd_factorize(a, who).solve(CMat::Identity(a.rows(), a.cols()));
}

}  // namespace muce::detail
