// SPDX-License-Identifier: Apache-2.0
#include "muce/tensor.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>
#include <string>

namespace muce {

void Tensor3::check_dims() const {
  if (dims_[0] < 1 || dims_[1] < 1 || dims_[2] < 1) {
    throw std::invalid_argument("Tensor3: dimensions must be positive.");
  }
}

Tensor3::Tensor3(const std::array<Index, 3>& dims, CVec data)
    : dims_(dims), data_(std::move(data)) {
  check_dims();
  if (data_.size() != dims_[0] * dims_[1] * dims_[2]) {
    throw std::invalid_argument("Tensor3: entry count does not match dims.");
  }
}

Tensor3& Tensor3::operator+=(const Tensor3& other) {
  if (dims_ != other.dims_) {
    throw std::invalid_argument("Tensor3: dimension mismatch in addition.");
  }
  data_ += other.data_;
  return *this;
}

Tensor3& Tensor3::operator-=(const Tensor3& other) {
  if (dims_ != other.dims_) {
    throw std::invalid_argument("Tensor3: dimension mismatch in subtraction.");
  }
  data_ -= other.data_;
  return *this;
}

CMat khatri_rao(const CMat& a, const CMat& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("khatri_rao: column counts differ (" +
                                std::to_string(a.cols()) + " vs " +
                                std::to_string(b.cols()) + ").");
  }
  const Index ia = a.rows(), ib = b.rows(), r = a.cols();
  CMat out(ia * ib, r);
  for (Index c = 0; c < r; ++c) {
    for (Index i = 0; i < ia; ++i) {
      out.col(c).segment(i * ib, ib) = a(i, c) * b.col(c);
    }
  }
  return out;
}

CMat unfold(const Tensor3& x, int mode) {
  const Index i1 = x.dim(0), i2 = x.dim(1), i3 = x.dim(2);
  switch (mode) {
    case 1:
      // storage already is the column-major mode-1 unfolding
      return Eigen::Map<const CMat>(x.data().data(), i1, i2 * i3);
    case 2: {
      CMat m(i2, i1 * i3);
      for (Index c = 0; c < i3; ++c)
        for (Index b = 0; b < i2; ++b)
          for (Index a = 0; a < i1; ++a) m(b, a + i1 * c) = x(a, b, c);
      return m;
    }
    case 3: {
      CMat m(i3, i1 * i2);
      for (Index c = 0; c < i3; ++c)
        for (Index b = 0; b < i2; ++b)
          for (Index a = 0; a < i1; ++a) m(c, a + i1 * b) = x(a, b, c);
      return m;
    }
    default:
      throw std::invalid_argument("unfold: mode must be 1, 2 or 3.");
  }
}

Tensor3 fold(const CMat& m, int mode, const std::array<Index, 3>& dims) {
  if (mode < 1 || mode > 3) {
    throw std::invalid_argument("fold: mode must be 1, 2 or 3.");
  }
  const Index i1 = dims[0], i2 = dims[1], i3 = dims[2];
  const Index rows = dims[static_cast<std::size_t>(mode - 1)];
  const Index cols = i1 * i2 * i3 / rows;
  if (m.rows() != rows || m.cols() != cols) {
    throw std::invalid_argument(
        "fold: matrix shape does not match mode/dims (got " +
        std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
        ", expected " + std::to_string(rows) + "x" + std::to_string(cols) +
        ").");
  }
  Tensor3 x(i1, i2, i3);
  switch (mode) {
    case 1:
      Eigen::Map<CMat>(x.data().data(), i1, i2 * i3) = m;
      break;
    case 2:
      for (Index c = 0; c < i3; ++c)
        for (Index b = 0; b < i2; ++b)
          for (Index a = 0; a < i1; ++a) x(a, b, c) = m(b, a + i1 * c);
      break;
    case 3:
      for (Index c = 0; c < i3; ++c)
        for (Index b = 0; b < i2; ++b)
          for (Index a = 0; a < i1; ++a) x(a, b, c) = m(c, a + i1 * b);
      break;
  }
  return x;
}

Tensor3 cpd_reconstruct(const CMat& a, const CMat& b, const CMat& c) {
  if (a.cols() != b.cols() || a.cols() != c.cols()) {
    throw std::invalid_argument("cpd_reconstruct: factor column counts differ.");
  }
  Tensor3 x(a.rows(), b.rows(), c.rows());
  if (a.cols() == 0) return x;  // empty sum
  Eigen::Map<CMat>(x.data().data(), a.rows(), b.rows() * c.rows()) =
      a * khatri_rao(c, b).transpose();
  return x;
}

Tensor3 cpd_reconstruct(const FactorSet& f) {
  return cpd_reconstruct(f[0], f[1], f[2]);
}

namespace {

double min_singular_value(const CMat& m) {
  Eigen::JacobiSVD<CMat> svd(m);
  return svd.singularValues().minCoeff();
}

// Visits all k-subsets of {0..n-1}; returns false as soon as pred fails.
template <typename Pred>
bool all_subsets(Index n, Index k, const Pred& pred) {
  std::vector<Index> pick(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) pick[static_cast<std::size_t>(i)] = i;
  while (true) {
    if (!pred(pick)) return false;
    Index i = k - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) return true;
    ++pick[static_cast<std::size_t>(i)];
    for (Index j = i + 1; j < k; ++j)
      pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
  }
}

}  // namespace

int kruskal_rank(const CMat& a) {
  const Index n = a.cols();
  if (n == 0) return 0;
  if (n > 12) {
    throw std::invalid_argument(
        "kruskal_rank: diagnostic limited to matrices with at most 12 "
        "columns.");
  }
  Eigen::JacobiSVD<CMat> svd(a);
  const double sigma_max = svd.singularValues().maxCoeff();
  if (sigma_max == 0.0) return 0;
  const double tol = 1e-8 * sigma_max;

  const Index kmax = std::min(a.rows(), n);
  for (Index k = 1; k <= kmax; ++k) {
    const bool ok = all_subsets(n, k, [&](const std::vector<Index>& pick) {
      CMat sub(a.rows(), k);
      for (Index j = 0; j < k; ++j)
        sub.col(j) = a.col(pick[static_cast<std::size_t>(j)]);
      return min_singular_value(sub) > tol;
    });
    if (!ok) return static_cast<int>(k - 1);
  }
  return static_cast<int>(kmax);
}

}  // namespace muce
