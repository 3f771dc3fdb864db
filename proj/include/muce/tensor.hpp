// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <vector>

#include "muce/types.hpp"

namespace muce {

// Dense complex 3-way tensor.
//
// Storage order (also the flattening used by the dataset files): entry
// (i1, i2, i3) lives at flat index  i1 + I1*(i2 + I2*i3),  i.e. the first
// mode varies fastest. With this layout the mode-1 unfolding is a plain
// column-major reinterpretation of the buffer.
class Tensor3 {
 public:
  Tensor3() : dims_{0, 0, 0} {}

  Tensor3(Index i1, Index i2, Index i3) : dims_{i1, i2, i3} {
    check_dims();
    data_ = CVec::Zero(i1 * i2 * i3);
  }

  Tensor3(const std::array<Index, 3>& dims, CVec data);

  const std::array<Index, 3>& dims() const { return dims_; }
  Index dim(int k) const { return dims_[static_cast<std::size_t>(k)]; }
  Index size() const { return data_.size(); }

  cplx& operator()(Index i1, Index i2, Index i3) {
    return data_[i1 + dims_[0] * (i2 + dims_[1] * i3)];
  }
  cplx operator()(Index i1, Index i2, Index i3) const {
    return data_[i1 + dims_[0] * (i2 + dims_[1] * i3)];
  }

  const CVec& data() const { return data_; }
  CVec& data() { return data_; }

  double squared_norm() const { return data_.squaredNorm(); }
  double norm() const { return data_.norm(); }

  Tensor3& operator+=(const Tensor3& other);
  Tensor3& operator-=(const Tensor3& other);
  Tensor3& operator*=(cplx scale) {
    data_ *= scale;
    return *this;
  }

  friend Tensor3 operator+(Tensor3 a, const Tensor3& b) { return a += b; }
  friend Tensor3 operator-(Tensor3 a, const Tensor3& b) { return a -= b; }
  friend Tensor3 operator*(cplx scale, Tensor3 a) { return a *= scale; }

 private:
  void check_dims() const;

  std::array<Index, 3> dims_;
  CVec data_;
};

// Three factor matrices {Xi^(1), Xi^(2), Xi^(3)} of one CPD model,
// with a common column count (the rank).
struct FactorSet {
  std::array<CMat, 3> factors;

  Index rank() const { return factors[0].cols(); }
  const CMat& operator[](int k) const {
    return factors[static_cast<std::size_t>(k)];
  }
  CMat& operator[](int k) { return factors[static_cast<std::size_t>(k)]; }
};

// Khatri-Rao (column-wise Kronecker) product of A [I x R] and B [J x R]:
// column r of the result is kron(A(:,r), B(:,r)) with the A index varying
// slower, i.e. result(i*J + j, r) = A(i, r) * B(j, r).
CMat khatri_rao(const CMat& a, const CMat& b);

// Mode-k unfolding, k in {1,2,3}. Column index of entry (i1,i2,i3):
//   k=1: i2 + I2*i3    k=2: i1 + I1*i3    k=3: i1 + I1*i2
// (remaining modes in ascending order, the lower mode varying fastest).
// This is the convention under which, for X = cpd_reconstruct(F1,F2,F3),
//   unfold(X,1) = F1 * khatri_rao(F3, F2)^T
//   unfold(X,2) = F2 * khatri_rao(F3, F1)^T
//   unfold(X,3) = F3 * khatri_rao(F2, F1)^T
// i.e. the Khatri-Rao factors appear in descending mode order.
CMat unfold(const Tensor3& x, int mode);

// Inverse of unfold: rebuilds the tensor with the given dims.
Tensor3 fold(const CMat& m, int mode, const std::array<Index, 3>& dims);

// Sum of rank-1 terms: entry (i1,i2,i3) = sum_r A(i1,r) B(i2,r) C(i3,r).
Tensor3 cpd_reconstruct(const CMat& a, const CMat& b, const CMat& c);
Tensor3 cpd_reconstruct(const FactorSet& f);

// Kruskal rank: the largest k such that every set of k columns is linearly
// independent (smallest singular value above 1e-8 times the largest singular
// value of the whole matrix). Returns 0 if any column is numerically zero.
// Exhaustive over column subsets, so restricted to at most 12 columns.
int kruskal_rank(const CMat& a);

}  // namespace muce
