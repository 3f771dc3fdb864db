// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "muce/types.hpp"

namespace muce {

// Deterministic random streams for reproducible Monte-Carlo runs.
//
// Stream derivation rule: a 64-bit master seed is folded with a sequence of
// integer tags (purpose id, trial index, axis indices, ...) through the
// splitmix64 finalizer; the resulting key seeds an independent mt19937_64
// stream. Identical (master, tags...) always yields the same stream, so
// trials can run in parallel without sharing generator state.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : eng_(key) {}

  static std::uint64_t derive_key(std::uint64_t master,
                                  std::initializer_list<std::uint64_t> tags);

  static Rng substream(std::uint64_t master,
                       std::initializer_list<std::uint64_t> tags) {
    return Rng(derive_key(master, tags));
  }

  std::uint64_t bits() { return eng_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(bits() >> 11) * 0x1.0p-53;
  }

  // Standard real normal N(0, 1) via Box-Muller (fixed draw count per call).
  double normal();

  // Circularly-symmetric complex normal CN(0, 1): E|z|^2 = 1,
  // real and imaginary parts each N(0, 1/2).
  cplx complex_normal();

 private:
  std::mt19937_64 eng_;
};

// Stream purposes used across the toolkit; part of the documented
// seed-derivation contract (changing these renumbers every experiment).
enum StreamPurpose : std::uint64_t {
  kStreamPaths = 1,
  kStreamPilots = 2,
  kStreamNoise = 3,
  kStreamBcdInit = 4,
  kStreamViInit = 5,
  kStreamTrialKey = 6,
};

}  // namespace muce
