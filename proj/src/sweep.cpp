// SPDX-License-Identifier: Apache-2.0
#include "muce/sweep.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "muce/metrics.hpp"
#include "muce/parallel.hpp"

namespace muce {

namespace {

constexpr const char* kCsvHeader =
    "trial,algo,snr_db,pilot_len,rank_bound,mse,iters,seconds,path_counts,"
    "converged,seed";

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

}  // namespace

std::string algo_name(Algo algo) {
  switch (algo) {
    case Algo::kLs: return "ls";
    case Algo::kBcdGenie: return "bcd-genie";
    case Algo::kBcdBound: return "bcd-bound";
    case Algo::kVi: return "vi";
  }
  throw std::logic_error("algo_name: unknown algorithm.");
}

Algo algo_from_name(const std::string& name) {
  if (name == "ls") return Algo::kLs;
  if (name == "bcd-genie") return Algo::kBcdGenie;
  if (name == "bcd-bound" || name == "bcd") return Algo::kBcdBound;
  if (name == "vi") return Algo::kVi;
  throw std::invalid_argument("unknown algorithm '" + name + "'.");
}

std::vector<int> ExperimentConfig::resolved_true_ranks() const {
  if (true_ranks.empty()) {
    return std::vector<int>(static_cast<std::size_t>(users), 3);
  }
  if (true_ranks.size() == 1) {
    return std::vector<int>(static_cast<std::size_t>(users), true_ranks[0]);
  }
  if (static_cast<int>(true_ranks.size()) != users) {
    throw std::invalid_argument("config: true_ranks must have one entry per user.");
  }
  return true_ranks;
}

void ExperimentConfig::validate() const {
  if (trials < 1) throw std::invalid_argument("config: trials must be >= 1.");
  if (users < 1) throw std::invalid_argument("config: users must be >= 1.");
  if (algorithms.empty()) {
    throw std::invalid_argument("config: no algorithms selected.");
  }
  if (pilot_lengths.empty() || snr_dbs.empty()) {
    throw std::invalid_argument("config: empty sweep axis.");
  }
  if (rank_bounds.empty()) {
    throw std::invalid_argument("config: rank_bounds must be non-empty.");
  }
  for (int r : resolved_true_ranks()) {
    if (r < 1) throw std::invalid_argument("config: true ranks must be >= 1.");
  }
  for (int b : rank_bounds) {
    if (b < 1) throw std::invalid_argument("config: rank bounds must be >= 1.");
  }
}

namespace {

struct SolveOutcome {
  double mse = std::numeric_limits<double>::quiet_NaN();
  int iters = 0;
  double seconds = 0.0;
  bool converged = false;
  std::vector<int> path_counts;
};

std::vector<Tensor3> ls_channels(const ObservationBatch& obs,
                                 const std::array<Index, 3>& dims) {
  const CMat h = ls_estimate(received_matrix(obs), obs.pilots);
  std::vector<Tensor3> channels;
  channels.reserve(static_cast<std::size_t>(h.rows()));
  for (Index n = 0; n < h.rows(); ++n) {
    channels.emplace_back(dims, h.row(n).transpose());
  }
  return channels;
}

// Runs one algorithm on one observation batch, timing the solve only.
SolveOutcome run_algorithm(Algo algo, const ExperimentConfig& config,
                           const ObservationBatch& obs,
                           const std::vector<Tensor3>& truth, int rank_bound,
                           std::uint64_t master, std::uint64_t trial,
                           std::uint64_t l_tag, std::uint64_t snr_tag) {
  SolveOutcome out;
  const auto start = std::chrono::steady_clock::now();
  try {
    switch (algo) {
      case Algo::kLs: {
        out.mse = mse(ls_channels(obs, config.dims), truth);
        out.converged = true;
        break;
      }
      case Algo::kBcdGenie:
      case Algo::kBcdBound: {
        const auto ranks =
            algo == Algo::kBcdGenie
                ? config.resolved_true_ranks()
                : std::vector<int>(static_cast<std::size_t>(config.users),
                                   rank_bound);
        auto init = random_factor_init(
            config.dims, ranks,
            Rng::substream(master, {kStreamBcdInit, trial, l_tag, snr_tag,
                                    static_cast<std::uint64_t>(
                                        algo == Algo::kBcdGenie ? 0 : rank_bound)}));
        const auto result = bcd_solve(obs, std::move(init), config.bcd);
        out.mse = mse(result.channels, truth);
        out.iters = result.sweeps;
        out.converged = result.converged;
        break;
      }
      case Algo::kVi: {
        const auto result = vi_solve(
            obs,
            std::vector<int>(static_cast<std::size_t>(config.users), rank_bound),
            config.vi,
            Rng::substream(master, {kStreamViInit, trial, l_tag, snr_tag,
                                    static_cast<std::uint64_t>(rank_bound)}));
        out.mse = mse(result.channels, truth);
        out.iters = result.iterations;
        out.converged = result.converged;
        out.path_counts = estimate_path_counts(result.state);
        break;
      }
    }
  } catch (const std::exception&) {
    out.mse = std::numeric_limits<double>::quiet_NaN();
    out.converged = false;
  }
  out.seconds = elapsed_seconds(start);
  return out;
}

bool row_order(const ResultRow& a, const ResultRow& b) {
  const auto key = [](const ResultRow& r) {
    return std::make_tuple(r.trial, static_cast<int>(r.algo), r.snr_db,
                           r.pilot_len, r.rank_bound);
  };
  return key(a) < key(b);
}

}  // namespace

std::vector<ResultRow> run_monte_carlo(const ExperimentConfig& config) {
  config.validate();
  const auto geom = build_geometry(config.dims, config.spacing, config.wavelength);
  const auto true_ranks = config.resolved_true_ranks();
  const std::uint64_t master = config.master_seed;

  std::vector<ResultRow> rows;
  std::mutex rows_mutex;

  parallel_for(config.trials, [&](int trial_int) {
    const auto trial = static_cast<std::uint64_t>(trial_int);
    const std::uint64_t trial_key =
        Rng::derive_key(master, {kStreamTrialKey, trial});
    const auto paths = sample_paths(config.users, true_ranks,
                                    Rng::substream(master, {kStreamPaths, trial}));
    const auto truth = synthesize_channels(geom, paths);

    std::vector<ResultRow> local;
    for (Index pilot_len : config.pilot_lengths) {
      const auto l_tag = static_cast<std::uint64_t>(pilot_len);
      const CMat pilots = generate_pilots(
          pilot_len, config.users,
          Rng::substream(master, {kStreamPilots, trial, l_tag}));
      for (std::size_t si = 0; si < config.snr_dbs.size(); ++si) {
        const double snr = config.snr_dbs[si];
        const auto snr_tag = static_cast<std::uint64_t>(si);
        const auto obs = synthesize_observations(
            truth, pilots, snr,
            Rng::substream(master, {kStreamNoise, trial, l_tag, snr_tag}),
            trial_key);

        // ls and bcd-genie do not depend on the rank bound: solve once and
        // replicate the outcome across the bound axis.
        std::vector<std::pair<Algo, SolveOutcome>> bound_free;
        for (Algo algo : config.algorithms) {
          if (algo == Algo::kLs || algo == Algo::kBcdGenie) {
            bound_free.emplace_back(
                algo, run_algorithm(algo, config, obs, truth, 0, master, trial,
                                    l_tag, snr_tag));
          }
        }
        for (int bound : config.rank_bounds) {
          for (Algo algo : config.algorithms) {
            SolveOutcome outcome;
            if (algo == Algo::kLs || algo == Algo::kBcdGenie) {
              for (const auto& [a, o] : bound_free) {
                if (a == algo) outcome = o;
              }
            } else {
              outcome = run_algorithm(algo, config, obs, truth, bound, master,
                                      trial, l_tag, snr_tag);
            }
            ResultRow row;
            row.trial = trial_int;
            row.algo = algo;
            row.snr_db = snr;
            row.pilot_len = pilot_len;
            row.rank_bound = bound;
            row.mse = outcome.mse;
            row.iters = outcome.iters;
            row.seconds = outcome.seconds;
            row.path_counts = outcome.path_counts;
            row.converged = outcome.converged;
            row.seed = trial_key;
            local.push_back(std::move(row));
          }
        }
      }
    }
    std::lock_guard<std::mutex> lock(rows_mutex);
    rows.insert(rows.end(), std::make_move_iterator(local.begin()),
                std::make_move_iterator(local.end()));
  });

  std::sort(rows.begin(), rows.end(), row_order);
  return rows;
}

void emit_results(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("emit_results: cannot open '" + path + "'.");
  }
  out << kCsvHeader << '\n';
  for (const auto& row : rows) {
    std::string counts;
    for (std::size_t i = 0; i < row.path_counts.size(); ++i) {
      if (i > 0) counts += ';';
      counts += std::to_string(row.path_counts[i]);
    }
    out << row.trial << ',' << algo_name(row.algo) << ','
        << format_double(row.snr_db) << ',' << row.pilot_len << ','
        << row.rank_bound << ',' << format_double(row.mse) << ',' << row.iters
        << ',' << format_double(row.seconds) << ',' << counts << ','
        << (row.converged ? 1 : 0) << ',' << row.seed << '\n';
  }
  if (!out) {
    throw std::runtime_error("emit_results: write failed for '" + path + "'.");
  }
}

std::vector<ResultRow> parse_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("parse_results: cannot open '" + path + "'.");
  }
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw std::runtime_error("parse_results: unexpected header in '" + path + "'.");
  }
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    auto next = [&]() {
      if (!std::getline(ss, field, ',')) {
        throw std::runtime_error("parse_results: truncated row.");
      }
      return field;
    };
    ResultRow row;
    row.trial = std::stoi(next());
    row.algo = algo_from_name(next());
    row.snr_db = std::strtod(next().c_str(), nullptr);
    row.pilot_len = std::stoll(next());
    row.rank_bound = std::stoi(next());
    row.mse = std::strtod(next().c_str(), nullptr);
    row.iters = std::stoi(next());
    row.seconds = std::strtod(next().c_str(), nullptr);
    const std::string counts = next();
    std::stringstream cs(counts);
    std::string c;
    while (std::getline(cs, c, ';')) {
      if (!c.empty()) row.path_counts.push_back(std::stoi(c));
    }
    row.converged = next() == "1";
    row.seed = std::stoull(next());
    rows.push_back(std::move(row));
  }
  return rows;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_config: cannot open '" + path + "'.");
  }
  nlohmann::json j;
  in >> j;
  ExperimentConfig config;
  if (j.contains("dims")) {
    for (int k = 0; k < 3; ++k) {
      config.dims[static_cast<std::size_t>(k)] =
          j.at("dims").at(static_cast<std::size_t>(k)).get<Index>();
    }
  }
  if (j.contains("spacing")) {
    for (int k = 0; k < 3; ++k) {
      config.spacing[static_cast<std::size_t>(k)] =
          j.at("spacing").at(static_cast<std::size_t>(k)).get<double>();
    }
  }
  config.wavelength = j.value("wavelength", config.wavelength);
  config.users = j.value("users", config.users);
  if (j.contains("true_paths")) {
    const auto& tp = j.at("true_paths");
    if (tp.is_array()) {
      config.true_ranks = tp.get<std::vector<int>>();
    } else {
      config.true_ranks = {tp.get<int>()};
    }
  }
  if (j.contains("rank_bounds")) {
    config.rank_bounds = j.at("rank_bounds").get<std::vector<int>>();
  }
  if (j.contains("pilot_lengths")) {
    config.pilot_lengths = j.at("pilot_lengths").get<std::vector<Index>>();
  }
  if (j.contains("snr_dbs")) {
    config.snr_dbs = j.at("snr_dbs").get<std::vector<double>>();
  }
  if (j.contains("algorithms")) {
    config.algorithms.clear();
    for (const auto& name : j.at("algorithms")) {
      config.algorithms.push_back(algo_from_name(name.get<std::string>()));
    }
  }
  config.trials = j.value("trials", config.trials);
  config.master_seed = j.value("seed", config.master_seed);
  if (j.contains("bcd")) {
    const auto& b = j.at("bcd");
    config.bcd.max_sweeps = b.value("max_iters", config.bcd.max_sweeps);
    config.bcd.rel_tol = b.value("rel_tol", config.bcd.rel_tol);
  }
  if (j.contains("vi")) {
    const auto& v = j.at("vi");
    config.vi.max_iters = v.value("max_iters", config.vi.max_iters);
    config.vi.rel_tol = v.value("rel_tol", config.vi.rel_tol);
    config.vi.epsilon = v.value("epsilon", config.vi.epsilon);
  }
  config.output_path = j.value("output", config.output_path);
  config.validate();
  return config;
}

}  // namespace muce
