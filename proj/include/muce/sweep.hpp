// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "muce/estimators.hpp"
#include "muce/vi.hpp"

namespace muce {

enum class Algo { kLs, kBcdGenie, kBcdBound, kVi };

std::string algo_name(Algo algo);
Algo algo_from_name(const std::string& name);

// One Monte-Carlo experiment: all sweep axes (SNR, pilot length, rank bound)
// are run for every trial on shared per-trial data, so algorithm comparisons
// are paired.
struct ExperimentConfig {
  std::array<Index, 3> dims{8, 8, 8};
  std::array<double, 3> spacing{0.5, 0.5, 0.5};
  double wavelength = 1.0;
  int users = 5;
  std::vector<int> true_ranks;        // per user; filled from scalar if empty
  std::vector<int> rank_bounds{8};    // sweep axis (vi and bcd-bound)
  std::vector<Index> pilot_lengths{10};  // sweep axis
  std::vector<double> snr_dbs{20.0};     // sweep axis
  std::vector<Algo> algorithms{Algo::kLs, Algo::kBcdGenie, Algo::kBcdBound,
                               Algo::kVi};
  int trials = 100;
  std::uint64_t master_seed = 1;
  BcdOptions bcd;
  ViOptions vi;
  std::string output_path = "results.csv";

  std::vector<int> resolved_true_ranks() const;
  void validate() const;
};

struct ResultRow {
  int trial = 0;
  Algo algo = Algo::kLs;
  double snr_db = 0.0;
  Index pilot_len = 0;
  int rank_bound = 0;
  double mse = 0.0;
  int iters = 0;
  double seconds = 0.0;
  std::vector<int> path_counts;  // vi only
  bool converged = false;
  std::uint64_t seed = 0;  // per-trial derived key
};

// Runs every (trial x pilot length x SNR x rank bound x algorithm)
// combination; trials execute in parallel with independent substreams.
// Per-trial solver failures are recorded in the row (mse = NaN), not fatal.
// Output is sorted by (trial, algorithm, snr, pilot length, rank bound).
std::vector<ResultRow> run_monte_carlo(const ExperimentConfig& config);

// CSV with header
//   trial,algo,snr_db,pilot_len,rank_bound,mse,iters,seconds,path_counts,converged,seed
// Floats are written in full round-trip precision; path_counts are
// semicolon-joined integers.
void emit_results(const std::vector<ResultRow>& rows, const std::string& path);

std::vector<ResultRow> parse_results(const std::string& path);

// Reads an ExperimentConfig from a JSON file (missing keys keep defaults).
ExperimentConfig load_config(const std::string& path);

}  // namespace muce
