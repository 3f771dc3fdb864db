// SPDX-License-Identifier: Apache-2.0
//
// muce - simulation and estimation toolkit for multi-user 3D massive MIMO
// channels. Subcommands: simulate, estimate, sweep, bench.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "muce/dataset.hpp"
#include "muce/metrics.hpp"
#include "muce/parallel.hpp"
#include "muce/sweep.hpp"

namespace {

using namespace muce;

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

void write_vi_trace(const std::string& path, const ViResult& result) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open trace file '" + path + "'.");
  }
  out << "iter,mse,e_beta,gammas\n";
  for (int i = 0; i < result.iterations; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    char buf[64];
    out << (i + 1) << ',';
    if (idx < result.mse_trace.size()) {
      std::snprintf(buf, sizeof(buf), "%.17g", result.mse_trace[idx]);
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), ",%.17g,", result.beta_trace[idx]);
    out << buf;
    const auto& gammas = result.gamma_trace[idx];
    for (std::size_t g = 0; g < gammas.size(); ++g) {
      std::snprintf(buf, sizeof(buf), "%s%.17g", g ? ";" : "", gammas[g]);
      out << buf;
    }
    out << '\n';
  }
}

int run_simulate(const std::array<Index, 3>& dims,
                 const std::array<double, 3>& spacing, double wavelength,
                 int users, int paths, Index pilot_len, double snr_db,
                 std::uint64_t seed, const std::string& out_path) {
  const Dataset ds = make_dataset(dims, spacing, wavelength, users, paths,
                                  pilot_len, snr_db, seed);
  save_dataset(out_path, ds);
  std::cout << "wrote dataset: " << out_path << " (users=" << users
            << " paths=" << paths << " L=" << pilot_len << " snr=" << snr_db
            << " dB, seed=" << seed << ")\n";
  return 0;
}

int run_estimate(const std::string& algo_name_str, const std::string& in_path,
                 const std::string& out_path, int bcd_rank, int rank_bound,
                 int max_iters, double tol, double epsilon,
                 std::uint64_t init_seed, bool init_seed_set,
                 const std::string& trace_path) {
  const Dataset ds = load_dataset(in_path);
  const auto truth = synthesize_channels(ds.geometry, ds.paths);
  const int users = static_cast<int>(ds.obs.user_count());
  const std::uint64_t seed = init_seed_set ? init_seed : ds.obs.seed;

  ResultRow row;
  row.trial = 0;
  row.snr_db = ds.obs.snr_db;
  row.pilot_len = ds.obs.pilot_length();
  row.seed = seed;

  const auto start = std::chrono::steady_clock::now();
  if (algo_name_str == "ls") {
    const CMat h = ls_estimate(received_matrix(ds.obs), ds.obs.pilots);
    std::vector<Tensor3> channels;
    for (Index n = 0; n < h.rows(); ++n) {
      channels.emplace_back(ds.geometry.dims, h.row(n).transpose());
    }
    row.algo = Algo::kLs;
    row.mse = mse(channels, truth);
    row.converged = true;
  } else if (algo_name_str == "bcd") {
    std::vector<int> ranks;
    for (const auto& user : ds.paths.users) {
      ranks.push_back(bcd_rank > 0 ? bcd_rank : static_cast<int>(user.size()));
    }
    BcdOptions options;
    if (max_iters > 0) options.max_sweeps = max_iters;
    if (tol > 0) options.rel_tol = tol;
    auto init = random_factor_init(ds.geometry.dims, ranks,
                                   Rng::substream(seed, {kStreamBcdInit, 0}));
    const auto result = bcd_solve(ds.obs, std::move(init), options);
    row.algo = Algo::kBcdBound;
    row.rank_bound = ranks[0];
    row.mse = mse(result.channels, truth);
    row.iters = result.sweeps;
    row.converged = result.converged;
  } else if (algo_name_str == "vi") {
    ViOptions options;
    if (max_iters > 0) options.max_iters = max_iters;
    if (tol > 0) options.rel_tol = tol;
    if (epsilon > 0) options.epsilon = epsilon;
    const auto result = vi_solve(
        ds.obs, std::vector<int>(static_cast<std::size_t>(users), rank_bound),
        options, Rng::substream(seed, {kStreamViInit, 0}), &truth);
    row.algo = Algo::kVi;
    row.rank_bound = rank_bound;
    row.mse = mse(result.channels, truth);
    row.iters = result.iterations;
    row.converged = result.converged;
    row.path_counts = estimate_path_counts(result.state);
    if (!trace_path.empty()) write_vi_trace(trace_path, result);
  } else {
    throw std::invalid_argument("estimate: --algo must be ls, bcd or vi.");
  }
  row.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  emit_results({row}, out_path);
  std::cout << algo_name_str << ": mse=" << row.mse << " iters=" << row.iters
            << " seconds=" << row.seconds << " -> " << out_path << '\n';
  return 0;
}

int run_sweep(const std::string& config_path, const std::string& out_override,
              int trials_override, std::int64_t seed_override) {
  ExperimentConfig config = load_config(config_path);
  if (!out_override.empty()) config.output_path = out_override;
  if (trials_override > 0) config.trials = trials_override;
  if (seed_override >= 0) {
    config.master_seed = static_cast<std::uint64_t>(seed_override);
  }
  const auto rows = run_monte_carlo(config);
  emit_results(rows, config.output_path);
  std::cout << "wrote " << rows.size() << " rows to " << config.output_path
            << " (threads=" << thread_count() << ")\n";
  return 0;
}

int run_bench(int trials, std::uint64_t seed, const std::string& out_path) {
  ExperimentConfig config;
  config.users = 5;
  config.true_ranks = {3};
  config.rank_bounds = {8};
  config.pilot_lengths = {10};
  config.snr_dbs = {10.0, 20.0};
  config.algorithms = {Algo::kBcdGenie, Algo::kBcdBound, Algo::kVi};
  config.trials = trials;
  config.master_seed = seed;
  const auto rows = run_monte_carlo(config);
  if (!out_path.empty()) emit_results(rows, out_path);

  std::printf("median solve time over %d trials (seconds)\n", trials);
  std::printf("%8s %12s %12s %12s\n", "SNR", "bcd-genie", "bcd-bound", "vi");
  for (double snr : config.snr_dbs) {
    std::vector<double> per_algo;
    std::printf("%6.0fdB", snr);
    for (Algo algo : config.algorithms) {
      std::vector<double> seconds;
      for (const auto& row : rows) {
        if (row.algo == algo && row.snr_db == snr) seconds.push_back(row.seconds);
      }
      std::printf(" %12.4f", median(seconds));
    }
    std::printf("\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-user 3D massive MIMO channel estimation toolkit"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a dataset file");
  std::vector<Index> sim_dims{8, 8, 8};
  std::vector<double> sim_spacing{0.5, 0.5, 0.5};
  double sim_wavelength = 1.0;
  int sim_users = 5, sim_paths = 3;
  Index sim_pilot_len = 10;
  double sim_snr = 20.0;
  std::uint64_t sim_seed = 1;
  std::string sim_out;
  sim->add_option("--dims", sim_dims, "array dims I1 I2 I3")->expected(3);
  sim->add_option("--spacing", sim_spacing, "antenna spacing per axis (m)")
      ->expected(3);
  sim->add_option("--wavelength", sim_wavelength, "carrier wavelength (m)");
  sim->add_option("--users", sim_users, "number of users");
  sim->add_option("--paths", sim_paths, "propagation paths per user");
  sim->add_option("--pilot-len", sim_pilot_len, "pilot sequence length");
  sim->add_option("--snr", sim_snr, "target SNR in dB (inf = noiseless)");
  sim->add_option("--seed", sim_seed, "master seed");
  sim->add_option("--out", sim_out, "output dataset path")->required();

  // estimate
  auto* est = app.add_subcommand("estimate", "run one estimator on a dataset");
  std::string est_algo, est_in, est_out, est_trace;
  int est_rank = 0, est_bound = 8, est_iters = 0;
  double est_tol = 0.0, est_eps = 0.0;
  std::int64_t est_seed = -1;
  est->add_option("--algo", est_algo, "ls | bcd | vi")->required();
  est->add_option("--in", est_in, "input dataset path")->required();
  est->add_option("--out", est_out, "output CSV path")->required();
  est->add_option("--rank", est_rank, "bcd path-number guess (0 = true count)");
  est->add_option("--rank-bound", est_bound, "vi rank upper bound");
  est->add_option("--max-iters", est_iters, "iteration cap override");
  est->add_option("--tol", est_tol, "stopping tolerance override");
  est->add_option("--epsilon", est_eps, "vi hyperparameter override");
  est->add_option("--init-seed", est_seed, "initialization seed (default: dataset seed)");
  est->add_option("--trace", est_trace, "vi per-iteration trace CSV path");

  // sweep
  auto* swp = app.add_subcommand("sweep", "run a Monte-Carlo experiment");
  std::string swp_config, swp_out;
  int swp_trials = 0;
  std::int64_t swp_seed = -1;
  swp->add_option("--config", swp_config, "experiment config JSON")->required();
  swp->add_option("--out", swp_out, "output CSV override");
  swp->add_option("--trials", swp_trials, "trial count override");
  swp->add_option("--seed", swp_seed, "master seed override");

  // bench
  auto* ben = app.add_subcommand("bench", "solver timing table");
  int ben_trials = 10;
  std::uint64_t ben_seed = 1;
  std::string ben_out;
  ben->add_option("--trials", ben_trials, "trials per point");
  ben->add_option("--seed", ben_seed, "master seed");
  ben->add_option("--out", ben_out, "also write per-trial rows CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      return run_simulate({sim_dims[0], sim_dims[1], sim_dims[2]},
                          {sim_spacing[0], sim_spacing[1], sim_spacing[2]},
                          sim_wavelength, sim_users, sim_paths, sim_pilot_len,
                          sim_snr, sim_seed, sim_out);
    }
    if (est->parsed()) {
      return run_estimate(est_algo, est_in, est_out, est_rank, est_bound,
                          est_iters, est_tol, est_eps,
                          est_seed >= 0 ? static_cast<std::uint64_t>(est_seed) : 0,
                          est_seed >= 0, est_trace);
    }
    if (swp->parsed()) {
      return run_sweep(swp_config, swp_out, swp_trials, swp_seed);
    }
    if (ben->parsed()) {
      return run_bench(ben_trials, ben_seed, ben_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
