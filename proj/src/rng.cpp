// SPDX-License-Identifier: Apache-2.0
#include "muce/rng.hpp"

#include <cmath>
#include <numbers>

namespace muce {

namespace {

// splitmix64 finalizer (Steele/Lea/Flood mixing constants).
std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::derive_key(std::uint64_t master,
                              std::initializer_list<std::uint64_t> tags) {
  std::uint64_t key = mix64(master + 0x9E3779B97F4A7C15ull);
  for (std::uint64_t tag : tags) {
    key = mix64(key ^ (0x9E3779B97F4A7C15ull * (tag + 0x632BE59BD9B4E019ull)));
  }
  return key;
}

double Rng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

cplx Rng::complex_normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-std::log(1.0 - u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(theta), r * std::sin(theta)};
}

}  // namespace muce
