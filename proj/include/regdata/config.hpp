#pragma once

// Experiment configuration: UTF-8 JSON with matrices as row-major nested
// arrays. Parsing either succeeds completely or fails with a field
// diagnostic; resolve() materializes every default so a run can be
// reproduced from the config it writes next to its outputs.

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "regdata/datagen.hpp"
#include "regdata/oracle.hpp"
#include "regdata/sysmodel.hpp"

namespace regdata {

using json = nlohmann::json;

struct SimulationConfig {
  double T = 30.0;
  double h = 1e-3;
  Index sample_stride = 100;
  std::uint64_t seed = 1;
  double amplitude = 0.5;
  double band_lo = 0.3;
  double band_hi = 8.0;
  double blowup_cap = 1e9;
  std::optional<Vec> x0, z0;  // default zero, sized during resolve()
};

struct AlgorithmConfig {
  std::string name = "improved";  // pi-lqr | vi-lqr | first | improved
  double eps_c = 1.0;
  double b0_scale = 10.0;
  double eps_conv = 1e-6;
  long max_iter = 1000000;
  int reset_cap = 30;
  double pi_tol = 1e-10;
  long pi_max_iter = 100;
  bool d_is_zero = false;
  std::optional<Mat> P0;  // value-iteration start; identity when absent
  std::optional<Mat> K0;  // pi-lqr initial gain; bootstrapped when absent
};

struct EvaluationConfig {
  double settle_tol = 1e-4;
  double T = 0.0;  // <= 0: derive from the closed-loop spectrum
  double h = 1e-3;
  std::optional<Vec> x0, z0;
};

struct ExperimentConfig {
  Plant plant;
  Exosystem exo;
  std::optional<std::vector<double>> minpoly_override;
  std::optional<Mat> Q, R;
  SimulationConfig sim;
  AlgorithmConfig alg;
  EvaluationConfig eval;
  bool blind_mode = false;
  bool export_trajectory = false;
  std::string output_dir = "out";
};

namespace cfgdetail {

inline Mat parse_matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j.front().is_array())
    throw ConfigError(where + ": expected a nested array of rows");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = static_cast<Index>(j.front().size());
  Mat a(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols)
      throw ConfigError(where + ": ragged row " + std::to_string(i));
    for (Index k = 0; k < cols; ++k) {
      const auto& cell = row[static_cast<size_t>(k)];
      if (!cell.is_number())
        throw ConfigError(where + ": entry (" + std::to_string(i) + "," +
                          std::to_string(k) + ") is not a number");
      a(i, k) = cell.get<double>();
    }
  }
  return a;
}

inline Vec parse_vector(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array");
  Vec v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) {
    const auto& cell = j[static_cast<size_t>(i)];
    if (!cell.is_number())
      throw ConfigError(where + ": entry " + std::to_string(i) + " is not a number");
    v[i] = cell.get<double>();
  }
  return v;
}

inline json dump_matrix(const Mat& a) {
  json j = json::array();
  for (Index i = 0; i < a.rows(); ++i) {
    json row = json::array();
    for (Index k = 0; k < a.cols(); ++k) row.push_back(a(i, k));
    j.push_back(std::move(row));
  }
  return j;
}

inline json dump_vector(const Vec& v) {
  json j = json::array();
  for (Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

inline const json& require(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(where + ": missing field '" + key + "'");
  return *it;
}

template <typename T>
void maybe_get(const json& j, const char* key, T& into, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    into = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace cfgdetail

inline ExperimentConfig parse_config(const json& j) {
  using namespace cfgdetail;
  ExperimentConfig cfg;

  const json& plant = require(j, "plant", "config");
  cfg.plant.A = parse_matrix(require(plant, "A", "plant"), "plant.A");
  cfg.plant.B = parse_matrix(require(plant, "B", "plant"), "plant.B");
  cfg.plant.C = parse_matrix(require(plant, "C", "plant"), "plant.C");
  cfg.plant.D = parse_matrix(require(plant, "D", "plant"), "plant.D");
  cfg.plant.E = parse_matrix(require(plant, "E", "plant"), "plant.E");
  cfg.plant.F = parse_matrix(require(plant, "F", "plant"), "plant.F");
  try {
    cfg.plant.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("plant: ") + e.what());
  }

  const json& exo = require(j, "exosystem", "config");
  cfg.exo.S = parse_matrix(require(exo, "S", "exosystem"), "exosystem.S");
  cfg.exo.v0 = parse_vector(require(exo, "v0", "exosystem"), "exosystem.v0");
  try {
    cfg.exo.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("exosystem: ") + e.what());
  }
  if (cfg.exo.q() != cfg.plant.q())
    throw ConfigError("exosystem.S dimension does not match plant q");

  if (auto it = j.find("minimal_polynomial_override"); it != j.end()) {
    std::vector<double> c;
    for (const auto& cell : *it) c.push_back(cell.get<double>());
    cfg.minpoly_override = std::move(c);
  }

  if (auto it = j.find("weights"); it != j.end()) {
    if (it->contains("Q")) cfg.Q = parse_matrix((*it)["Q"], "weights.Q");
    if (it->contains("R")) cfg.R = parse_matrix((*it)["R"], "weights.R");
  }

  if (auto it = j.find("simulation"); it != j.end()) {
    const json& s = *it;
    maybe_get(s, "T", cfg.sim.T, "simulation");
    maybe_get(s, "h", cfg.sim.h, "simulation");
    long stride = cfg.sim.sample_stride;
    maybe_get(s, "sample_stride", stride, "simulation");
    cfg.sim.sample_stride = stride;
    maybe_get(s, "seed", cfg.sim.seed, "simulation");
    maybe_get(s, "amplitude", cfg.sim.amplitude, "simulation");
    if (s.contains("band")) {
      Vec band = parse_vector(s["band"], "simulation.band");
      if (band.size() != 2) throw ConfigError("simulation.band: expected [lo, hi]");
      cfg.sim.band_lo = band[0];
      cfg.sim.band_hi = band[1];
    }
    maybe_get(s, "blowup_cap", cfg.sim.blowup_cap, "simulation");
    if (s.contains("x0")) cfg.sim.x0 = parse_vector(s["x0"], "simulation.x0");
    if (s.contains("z0")) cfg.sim.z0 = parse_vector(s["z0"], "simulation.z0");
    if (cfg.sim.h <= 0.0 || cfg.sim.T < cfg.sim.h)
      throw ConfigError("simulation: need h > 0 and T >= h");
    if (cfg.sim.sample_stride < 2)
      throw ConfigError("simulation.sample_stride must be >= 2");
  }

  if (auto it = j.find("algorithm"); it != j.end()) {
    const json& a = *it;
    maybe_get(a, "name", cfg.alg.name, "algorithm");
    maybe_get(a, "eps_c", cfg.alg.eps_c, "algorithm");
    maybe_get(a, "b0_scale", cfg.alg.b0_scale, "algorithm");
    maybe_get(a, "eps_conv", cfg.alg.eps_conv, "algorithm");
    maybe_get(a, "max_iter", cfg.alg.max_iter, "algorithm");
    maybe_get(a, "reset_cap", cfg.alg.reset_cap, "algorithm");
    maybe_get(a, "pi_tol", cfg.alg.pi_tol, "algorithm");
    maybe_get(a, "pi_max_iter", cfg.alg.pi_max_iter, "algorithm");
    maybe_get(a, "d_is_zero", cfg.alg.d_is_zero, "algorithm");
    if (a.contains("P0")) cfg.alg.P0 = parse_matrix(a["P0"], "algorithm.P0");
    if (a.contains("K0")) cfg.alg.K0 = parse_matrix(a["K0"], "algorithm.K0");
    static const char* known[] = {"pi-lqr", "vi-lqr", "first", "improved"};
    bool ok = false;
    for (const char* k : known) ok = ok || cfg.alg.name == k;
    if (!ok)
      throw ConfigError("algorithm.name must be one of pi-lqr, vi-lqr, first, improved");
  }

  if (auto it = j.find("evaluation"); it != j.end()) {
    const json& e = *it;
    maybe_get(e, "settle_tol", cfg.eval.settle_tol, "evaluation");
    maybe_get(e, "T", cfg.eval.T, "evaluation");
    maybe_get(e, "h", cfg.eval.h, "evaluation");
    if (e.contains("x0")) cfg.eval.x0 = parse_vector(e["x0"], "evaluation.x0");
    if (e.contains("z0")) cfg.eval.z0 = parse_vector(e["z0"], "evaluation.z0");
  }

  cfgdetail::maybe_get(j, "blind_mode", cfg.blind_mode, "config");
  cfgdetail::maybe_get(j, "export_trajectory", cfg.export_trajectory, "config");
  cfgdetail::maybe_get(j, "output_dir", cfg.output_dir, "config");
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config: " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(j);
}

inline json dump_config(const ExperimentConfig& cfg) {
  using namespace cfgdetail;
  json j;
  j["plant"] = {{"A", dump_matrix(cfg.plant.A)}, {"B", dump_matrix(cfg.plant.B)},
                {"C", dump_matrix(cfg.plant.C)}, {"D", dump_matrix(cfg.plant.D)},
                {"E", dump_matrix(cfg.plant.E)}, {"F", dump_matrix(cfg.plant.F)}};
  j["exosystem"] = {{"S", dump_matrix(cfg.exo.S)}, {"v0", dump_vector(cfg.exo.v0)}};
  if (cfg.minpoly_override) j["minimal_polynomial_override"] = *cfg.minpoly_override;
  if (cfg.Q || cfg.R) {
    json w;
    if (cfg.Q) w["Q"] = dump_matrix(*cfg.Q);
    if (cfg.R) w["R"] = dump_matrix(*cfg.R);
    j["weights"] = std::move(w);
  }
  json s{{"T", cfg.sim.T},
         {"h", cfg.sim.h},
         {"sample_stride", static_cast<long>(cfg.sim.sample_stride)},
         {"seed", cfg.sim.seed},
         {"amplitude", cfg.sim.amplitude},
         {"band", {cfg.sim.band_lo, cfg.sim.band_hi}},
         {"blowup_cap", cfg.sim.blowup_cap}};
  if (cfg.sim.x0) s["x0"] = dump_vector(*cfg.sim.x0);
  if (cfg.sim.z0) s["z0"] = dump_vector(*cfg.sim.z0);
  j["simulation"] = std::move(s);
  json a{{"name", cfg.alg.name},
         {"eps_c", cfg.alg.eps_c},
         {"b0_scale", cfg.alg.b0_scale},
         {"eps_conv", cfg.alg.eps_conv},
         {"max_iter", cfg.alg.max_iter},
         {"reset_cap", cfg.alg.reset_cap},
         {"pi_tol", cfg.alg.pi_tol},
         {"pi_max_iter", cfg.alg.pi_max_iter},
         {"d_is_zero", cfg.alg.d_is_zero}};
  if (cfg.alg.P0) a["P0"] = dump_matrix(*cfg.alg.P0);
  if (cfg.alg.K0) a["K0"] = dump_matrix(*cfg.alg.K0);
  j["algorithm"] = std::move(a);
  json e{{"settle_tol", cfg.eval.settle_tol}, {"T", cfg.eval.T}, {"h", cfg.eval.h}};
  if (cfg.eval.x0) e["x0"] = dump_vector(*cfg.eval.x0);
  if (cfg.eval.z0) e["z0"] = dump_vector(*cfg.eval.z0);
  j["evaluation"] = std::move(e);
  j["blind_mode"] = cfg.blind_mode;
  j["export_trajectory"] = cfg.export_trajectory;
  j["output_dir"] = cfg.output_dir;
  return j;
}

}  // namespace regdata
