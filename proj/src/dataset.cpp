// SPDX-License-Identifier: Apache-2.0
#include "muce/dataset.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace muce {

namespace {

using nlohmann::json;

json complex_to_json(const cplx& z) { return json::array({z.real(), z.imag()}); }

cplx complex_from_json(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

json cvec_to_json(const CVec& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(complex_to_json(v[i]));
  return out;
}

CVec cvec_from_json(const json& j) {
  CVec v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i)
    v[i] = complex_from_json(j.at(static_cast<std::size_t>(i)));
  return v;
}

json finite_or_null(double x) {
  if (std::isinf(x)) return nullptr;
  return x;
}

double finite_or_inf(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  return j.get<double>();
}

}  // namespace

Dataset make_dataset(const std::array<Index, 3>& dims,
                     const std::array<double, 3>& spacing, double wavelength,
                     int n_users, int paths_per_user, Index pilot_length,
                     double snr_db, std::uint64_t seed) {
  Dataset ds;
  ds.geometry = build_geometry(dims, spacing, wavelength);
  ds.paths = sample_paths(n_users, paths_per_user,
                          Rng::substream(seed, {kStreamPaths, 0}));
  const auto channels = synthesize_channels(ds.geometry, ds.paths);
  const CMat pilots =
      generate_pilots(pilot_length, n_users,
                      Rng::substream(seed, {kStreamPilots, 0,
                                            static_cast<std::uint64_t>(pilot_length)}));
  ds.obs = synthesize_observations(
      channels, pilots, snr_db,
      Rng::substream(seed, {kStreamNoise, 0,
                            static_cast<std::uint64_t>(pilot_length), 0}),
      seed);
  return ds;
}

void save_dataset(const std::string& path, const Dataset& dataset) {
  json j;
  j["format"] = "muce-dataset";
  j["version"] = 1;
  j["geometry"] = {
      {"dims", {dataset.geometry.dims[0], dataset.geometry.dims[1],
                dataset.geometry.dims[2]}},
      {"spacing", {dataset.geometry.spacing[0], dataset.geometry.spacing[1],
                   dataset.geometry.spacing[2]}},
      {"wavelength", dataset.geometry.wavelength},
  };
  json users = json::array();
  for (const auto& user : dataset.paths.users) {
    json paths = json::array();
    for (const auto& p : user) {
      paths.push_back({{"gain", complex_to_json(p.gain)},
                       {"elevation", p.elevation},
                       {"azimuth", p.azimuth}});
    }
    users.push_back(std::move(paths));
  }
  j["path_parameters"] = std::move(users);
  j["pilot_length"] = dataset.obs.pilot_length();
  j["users"] = dataset.obs.user_count();
  j["pilots"] = cvec_to_json(
      Eigen::Map<const CVec>(dataset.obs.pilots.data(), dataset.obs.pilots.size()));
  json obs = json::array();
  for (const auto& y : dataset.obs.observations) {
    obs.push_back(cvec_to_json(y.data()));
  }
  j["observations"] = std::move(obs);
  j["snr_db"] = finite_or_null(dataset.obs.snr_db);
  j["noise_precision"] = finite_or_null(dataset.obs.noise_precision);
  j["seed"] = dataset.obs.seed;

  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_dataset: cannot open '" + path + "'.");
  }
  out << j.dump() << '\n';
  if (!out) {
    throw std::runtime_error("save_dataset: write failed for '" + path + "'.");
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_dataset: cannot open '" + path + "'.");
  }
  json j;
  in >> j;
  if (j.value("format", "") != "muce-dataset") {
    throw std::runtime_error("load_dataset: '" + path +
                             "' is not a muce dataset file.");
  }
  Dataset ds;
  const auto& g = j.at("geometry");
  std::array<Index, 3> dims{g.at("dims").at(0).get<Index>(),
                            g.at("dims").at(1).get<Index>(),
                            g.at("dims").at(2).get<Index>()};
  std::array<double, 3> spacing{g.at("spacing").at(0).get<double>(),
                                g.at("spacing").at(1).get<double>(),
                                g.at("spacing").at(2).get<double>()};
  ds.geometry = build_geometry(dims, spacing, g.at("wavelength").get<double>());

  for (const auto& user : j.at("path_parameters")) {
    UserPaths paths;
    for (const auto& p : user) {
      paths.push_back(Path{complex_from_json(p.at("gain")),
                           p.at("elevation").get<double>(),
                           p.at("azimuth").get<double>()});
    }
    if (paths.empty()) {
      throw std::runtime_error("load_dataset: user with no paths.");
    }
    ds.paths.users.push_back(std::move(paths));
  }

  const Index l_len = j.at("pilot_length").get<Index>();
  const Index n_users = j.at("users").get<Index>();
  const CVec pilot_data = cvec_from_json(j.at("pilots"));
  if (pilot_data.size() != l_len * n_users ||
      n_users != static_cast<Index>(ds.paths.users.size())) {
    throw std::runtime_error("load_dataset: pilot shape mismatch.");
  }
  ds.obs.pilots = Eigen::Map<const CMat>(pilot_data.data(), l_len, n_users);
  for (Index n = 0; n < n_users; ++n) {
    if (ds.obs.pilots.col(n).norm() == 0.0) {
      throw std::runtime_error("load_dataset: all-zero pilot column.");
    }
  }

  const auto& obs = j.at("observations");
  if (static_cast<Index>(obs.size()) != l_len) {
    throw std::runtime_error("load_dataset: observation count != pilot length.");
  }
  for (const auto& y : obs) {
    ds.obs.observations.emplace_back(dims, cvec_from_json(y));
  }
  ds.obs.snr_db = finite_or_inf(j.at("snr_db"));
  ds.obs.noise_precision = finite_or_inf(j.at("noise_precision"));
  if (!(ds.obs.noise_precision > 0.0)) {
    throw std::runtime_error("load_dataset: noise precision must be positive.");
  }
  ds.obs.seed = j.at("seed").get<std::uint64_t>();
  return ds;
}

}  // namespace muce
