// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "muce/dataset.hpp"
#include "muce/metrics.hpp"
#include "muce/sweep.hpp"
#include "test_util.hpp"

using namespace muce;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("mse: perfect estimate, hand computation, loop oracle") {
  Rng rng(12);
  std::vector<Tensor3> truth;
  truth.push_back(testutil::random_tensor(4, 4, 4, rng));
  truth.push_back(testutil::random_tensor(4, 4, 4, rng));
  CHECK(mse(truth, truth) == 0.0);

  // truth zero, estimates all ones, M = 512, N = 5 -> 1
  std::vector<Tensor3> zeros, ones;
  for (int n = 0; n < 5; ++n) {
    zeros.emplace_back(8, 8, 8);
    Tensor3 t(8, 8, 8);
    t.data().setOnes();
    ones.push_back(std::move(t));
  }
  CHECK(mse(ones, zeros) == doctest::Approx(1.0));

  std::vector<Tensor3> est;
  est.push_back(testutil::random_tensor(4, 4, 4, rng));
  est.push_back(testutil::random_tensor(4, 4, 4, rng));
  double oracle = 0.0;
  for (std::size_t n = 0; n < 2; ++n) {
    for (Index i = 0; i < 64; ++i) {
      oracle += std::norm(est[n].data()[i] - truth[n].data()[i]);
    }
  }
  oracle /= 64.0 * 2.0;
  CHECK(std::abs(mse(est, truth) - oracle) < 1e-12 * oracle);

  std::vector<Tensor3> wrong;
  wrong.push_back(testutil::random_tensor(4, 4, 2, rng));
  wrong.push_back(testutil::random_tensor(4, 4, 4, rng));
  CHECK_THROWS_AS(mse(wrong, truth), std::invalid_argument);
}

TEST_CASE("run_monte_carlo row counting, determinism, pairing") {
  ExperimentConfig config;
  config.dims = {4, 4, 4};
  config.users = 2;
  config.true_ranks = {2};
  config.rank_bounds = {3};
  config.pilot_lengths = {6};
  config.snr_dbs = {10.0, 20.0, 30.0};
  config.algorithms = {Algo::kLs, Algo::kBcdGenie};
  config.trials = 2;
  config.master_seed = 7;
  config.bcd.max_sweeps = 60;

  const auto rows = run_monte_carlo(config);
  CHECK(rows.size() == 2 * 2 * 3);  // trials x algos x snrs

  const auto rows2 = run_monte_carlo(config);
  REQUIRE(rows2.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].mse == rows2[i].mse);
    CHECK(rows[i].trial == rows2[i].trial);
    CHECK(rows[i].algo == rows2[i].algo);
    CHECK(rows[i].seed == rows2[i].seed);
  }

  // rows are sorted by (trial, algorithm, ...)
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto key = [](const ResultRow& r) {
      return std::make_tuple(r.trial, static_cast<int>(r.algo), r.snr_db);
    };
    CHECK(key(rows[i - 1]) <= key(rows[i]));
  }

  // ls does not depend on the rank bound: replicated rows carry equal mse
  ExperimentConfig multi = config;
  multi.rank_bounds = {2, 4};
  multi.snr_dbs = {20.0};
  multi.algorithms = {Algo::kLs};
  const auto ls_rows = run_monte_carlo(multi);
  CHECK(ls_rows.size() == 2 * 2);  // trials x bounds
  CHECK(ls_rows[0].mse == ls_rows[1].mse);
}

TEST_CASE("emit_results and parse_results round trip") {
  const std::string path = temp_path("muce_test_results.csv");

  emit_results({}, path);
  {
    std::ifstream in(path);
    std::string header;
    REQUIRE(std::getline(in, header));
    CHECK(header ==
          "trial,algo,snr_db,pilot_len,rank_bound,mse,iters,seconds,"
          "path_counts,converged,seed");
    std::string extra;
    CHECK_FALSE(std::getline(in, extra));
  }

  ResultRow row;
  row.trial = 3;
  row.algo = Algo::kVi;
  row.snr_db = 12.5;
  row.pilot_len = 10;
  row.rank_bound = 8;
  row.mse = 0.00123456789012345678;
  row.iters = 211;
  row.seconds = 1.25;
  row.path_counts = {3, 3, 4};
  row.converged = true;
  row.seed = 0xFEEDFACEull;
  emit_results({row}, path);
  const auto parsed = parse_results(path);
  REQUIRE(parsed.size() == 1);
  CHECK(parsed[0].trial == row.trial);
  CHECK(parsed[0].algo == row.algo);
  CHECK(parsed[0].snr_db == row.snr_db);
  CHECK(parsed[0].pilot_len == row.pilot_len);
  CHECK(parsed[0].rank_bound == row.rank_bound);
  CHECK(parsed[0].mse == row.mse);  // full round-trip precision
  CHECK(parsed[0].iters == row.iters);
  CHECK(parsed[0].seconds == row.seconds);
  CHECK(parsed[0].path_counts == row.path_counts);
  CHECK(parsed[0].converged == row.converged);
  CHECK(parsed[0].seed == row.seed);

  CHECK_THROWS_AS(emit_results({}, "/nonexistent_dir_xyz/out.csv"),
                  std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("dataset save/load round trip") {
  const std::string path = temp_path("muce_test_dataset.json");
  const Dataset ds = make_dataset({4, 3, 2}, {0.5, 0.5, 0.5}, 1.0, 2, 2, 5,
                                  15.0, 99);
  save_dataset(path, ds);
  const Dataset back = load_dataset(path);

  CHECK(back.geometry.dims == ds.geometry.dims);
  CHECK(back.geometry.wavelength == ds.geometry.wavelength);
  REQUIRE(back.paths.users.size() == ds.paths.users.size());
  for (std::size_t n = 0; n < ds.paths.users.size(); ++n) {
    for (std::size_t r = 0; r < ds.paths.users[n].size(); ++r) {
      CHECK(back.paths.users[n][r].gain == ds.paths.users[n][r].gain);
      CHECK(back.paths.users[n][r].elevation == ds.paths.users[n][r].elevation);
      CHECK(back.paths.users[n][r].azimuth == ds.paths.users[n][r].azimuth);
    }
  }
  CHECK((back.obs.pilots - ds.obs.pilots).norm() == 0.0);
  REQUIRE(back.obs.observations.size() == ds.obs.observations.size());
  for (std::size_t l = 0; l < ds.obs.observations.size(); ++l) {
    CHECK((back.obs.observations[l].data() - ds.obs.observations[l].data())
              .norm() == 0.0);
  }
  CHECK(back.obs.snr_db == ds.obs.snr_db);
  CHECK(back.obs.noise_precision == ds.obs.noise_precision);
  CHECK(back.obs.seed == ds.obs.seed);
  std::filesystem::remove(path);

  // noiseless dataset: infinities survive the round trip as null
  const std::string path2 = temp_path("muce_test_dataset_inf.json");
  const Dataset clean = make_dataset(
      {3, 3, 3}, {0.5, 0.5, 0.5}, 1.0, 1, 1, 4,
      std::numeric_limits<double>::infinity(), 5);
  save_dataset(path2, clean);
  const Dataset clean_back = load_dataset(path2);
  CHECK(std::isinf(clean_back.obs.snr_db));
  CHECK(std::isinf(clean_back.obs.noise_precision));
  std::filesystem::remove(path2);
}

TEST_CASE("config loading with overrides and validation") {
  const std::string path = temp_path("muce_test_config.json");
  {
    std::ofstream out(path);
    out << R"({
      "dims": [4, 4, 4],
      "users": 2,
      "true_paths": 2,
      "rank_bounds": [4],
      "pilot_lengths": [6, 8],
      "snr_dbs": [20.0],
      "algorithms": ["ls", "vi"],
      "trials": 3,
      "seed": 11,
      "vi": {"max_iters": 120, "rel_tol": 1e-5, "epsilon": 1e-6},
      "bcd": {"max_iters": 250},
      "output": "out.csv"
    })";
  }
  const auto config = load_config(path);
  CHECK(config.dims[0] == 4);
  CHECK(config.users == 2);
  CHECK(config.resolved_true_ranks() == std::vector<int>{2, 2});
  CHECK(config.pilot_lengths.size() == 2);
  CHECK(config.algorithms.size() == 2);
  CHECK(config.trials == 3);
  CHECK(config.master_seed == 11);
  CHECK(config.vi.max_iters == 120);
  CHECK(config.vi.rel_tol == 1e-5);
  CHECK(config.bcd.max_sweeps == 250);
  CHECK(config.output_path == "out.csv");
  std::filesystem::remove(path);

  ExperimentConfig bad;
  bad.trials = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  ExperimentConfig bad2;
  bad2.algorithms.clear();
  CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);
}

TEST_CASE("failed solves are recorded, not fatal") {
  ExperimentConfig config;
  config.dims = {3, 3, 3};
  config.users = 4;
  config.true_ranks = {1};
  config.rank_bounds = {2};
  config.pilot_lengths = {2};  // L < N: ls must fail per trial
  config.snr_dbs = {20.0};
  config.algorithms = {Algo::kLs};
  config.trials = 1;
  const auto rows = run_monte_carlo(config);
  REQUIRE(rows.size() == 1);
  CHECK(std::isnan(rows[0].mse));
  CHECK_FALSE(rows[0].converged);
}
