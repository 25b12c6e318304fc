#pragma once

// Config-driven experiment runners behind the CLI subcommands. Each cmd_*
// returns the process exit code for domain outcomes (an assumption or settle
// verdict); hard failures travel as exceptions and are mapped to the exit
// contract in exit_code_for().

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "regdata/config.hpp"
#include "regdata/csv.hpp"
#include "regdata/learner.hpp"

namespace regdata {

// 0 ok, 1 precondition, 2 parse, 3 blow-up, 4 iteration cap.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const BlowUpError*>(&e)) return 3;
  if (dynamic_cast<const IterationCapError*>(&e)) return 4;
  return 1;
}

inline int log_level() {
  static const int level = [] {
    const char* env = std::getenv("REGDATA_LOG");
    if (!env) return 0;
    return std::atoi(env);
  }();
  return level;
}

inline void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[regdata] " << msg << "\n";
}

struct PreparedExperiment {
  ExperimentConfig cfg;
  MinimalPolynomial minpoly;
  InternalModel im;
  AugmentedSystem aug;
};

inline PreparedExperiment prepare(ExperimentConfig cfg) {
  cfg.plant.validate();
  cfg.exo.validate();
  PreparedExperiment prep;
  prep.minpoly = minimal_polynomial(cfg.exo.S, cfg.minpoly_override);
  prep.im = build_internal_model(prep.minpoly.coeffs, cfg.plant.p());
  prep.aug = build_augmented(cfg.plant, prep.im);
  prep.cfg = std::move(cfg);
  return prep;
}

namespace expdetail {

inline std::string spectrum_string(const std::vector<std::complex<double>>& ev) {
  std::ostringstream os;
  os << std::setprecision(6);
  for (size_t i = 0; i < ev.size(); ++i) {
    if (i) os << ", ";
    os << ev[i].real() << (ev[i].imag() < 0 ? " - " : " + ")
       << std::abs(ev[i].imag()) << "i";
  }
  return os.str();
}

inline std::string poly_string(const std::vector<double>& c) {
  std::ostringstream os;
  os << std::setprecision(12) << "[";
  for (size_t i = 0; i < c.size(); ++i) {
    if (i) os << ", ";
    os << c[i];
  }
  os << "] (ascending)";
  return os.str();
}

inline bool is_lqr_algorithm(const std::string& name) {
  return name == "pi-lqr" || name == "vi-lqr";
}

inline LqrWeights resolve_weights(const ExperimentConfig& cfg, Index state_dim,
                                  Index m) {
  LqrWeights w;
  w.Q = cfg.Q ? *cfg.Q : Mat::Identity(state_dim, state_dim);
  w.R = cfg.R ? *cfg.R : Mat::Identity(m, m);
  try {
    w.validate(state_dim, m);
  } catch (const Error& e) {
    throw ConfigError(std::string("weights: ") + e.what());
  }
  return w;
}

inline ViOptions vi_options(const AlgorithmConfig& alg) {
  ViOptions opt;
  opt.eps_c = alg.eps_c;
  opt.b0_scale = alg.b0_scale;
  opt.eps_conv = alg.eps_conv;
  opt.max_iter = alg.max_iter;
  opt.reset_cap = alg.reset_cap;
  return opt;
}

inline Vec resolved_ic(const std::optional<Vec>& given, Index dim,
                       const char* what) {
  if (!given) return Vec::Zero(dim);
  if (given->size() != dim)
    throw ConfigError(std::string(what) + ": expected length " +
                      std::to_string(dim));
  return *given;
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory: " + dir);
}

inline void write_resolved_config(const ExperimentConfig& cfg,
                                  const std::string& dir) {
  std::ofstream f(dir + "/resolved_config.json", std::ios::binary);
  if (!f) throw Error("cannot write resolved config in " + dir);
  f << dump_config(cfg).dump(2) << '\n';
}

}  // namespace expdetail

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

inline int cmd_check(const ExperimentConfig& cfg, std::ostream& out) {
  auto prep = prepare(cfg);
  auto rep = check_assumptions(cfg.plant, cfg.exo);
  out << "plant: n=" << cfg.plant.n() << " m=" << cfg.plant.m()
      << " p=" << cfg.plant.p() << " q=" << cfg.plant.q() << "\n";
  out << "eigenvalues of S: " << expdetail::spectrum_string(rep.exo_spectrum)
      << "\n";
  out << "minimal polynomial: " << expdetail::poly_string(prep.minpoly.coeffs)
      << (prep.minpoly.from_override
              ? " [user override, validated against S]"
              : " [characteristic polynomial; minimality not verified]")
      << "\n";
  out << "internal model: degree " << prep.im.degree() << ", n_z = "
      << prep.im.n_z() << ", augmented dim = " << prep.aug.dim() << "\n";
  out << "A1 (stabilizability of (A, B)): " << (rep.a1 ? "pass" : "FAIL") << "\n";
  out << "A2 (spectrum of S not in open left half plane): "
      << (rep.a2 ? "pass" : "FAIL") << "\n";
  out << "A3 (transmission rank n + p at each eigenvalue of S): "
      << (rep.a3 ? "pass" : "FAIL") << "\n";
  if (log_level() >= 2) out << rep.details;
  return rep.all() ? 0 : 1;
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

inline int cmd_oracle(const ExperimentConfig& cfg, const std::string& out_dir,
                      std::ostream& out) {
  auto prep = prepare(cfg);
  auto rep = check_assumptions(cfg.plant, cfg.exo);
  if (!rep.all()) {
    out << "assumptions fail (A1 " << (rep.a1 ? "pass" : "FAIL") << ", A2 "
        << (rep.a2 ? "pass" : "FAIL") << ", A3 " << (rep.a3 ? "pass" : "FAIL")
        << "); no oracle computed\n";
    return 1;
  }
  const Index dim = prep.aug.dim(), m = cfg.plant.m();
  auto w = expdetail::resolve_weights(cfg, dim, m);
  if (!observable_sqrt_q(prep.aug.Y, w.Q))
    out << "note: (Y, sqrt(Q)) observability check failed (advisory)\n";

  log_info("solving the Riccati equation for the augmented pair");
  auto sol = solve_riccati(prep.aug.Y, prep.aug.J, w,
                           expdetail::vi_options(cfg.alg));
  auto reg = solve_regulator_equations(cfg.plant, cfg.exo.S, prep.im, sol.K);

  expdetail::ensure_dir(out_dir);
  write_matrix_csv(out_dir + "/P_star.csv", sol.P);
  write_matrix_csv(out_dir + "/K_star.csv", sol.K);
  write_matrix_csv(out_dir + "/X.csv", reg.X);
  write_matrix_csv(out_dir + "/Z.csv", reg.Z);
  write_matrix_csv(out_dir + "/U.csv", reg.U);
  Mat residuals(1, 4);
  residuals << sol.residual, reg.res_state, reg.res_compensator, reg.res_error;
  write_matrix_csv(out_dir + "/residuals.csv", residuals);
  ExperimentConfig resolved = prep.cfg;
  resolved.Q = w.Q;
  resolved.R = w.R;
  expdetail::write_resolved_config(resolved, out_dir);

  out << "closed-loop spectrum: "
      << expdetail::spectrum_string(
             eigenvalues(Mat(prep.aug.Y + prep.aug.J * sol.K)))
      << "\n";
  out << "riccati residual: " << format_real(sol.residual) << "\n";
  out << "regulator residuals: state " << format_real(reg.res_state)
      << ", compensator " << format_real(reg.res_compensator) << ", error "
      << format_real(reg.res_error) << "\n";
  out << "wrote P_star, K_star, X, Z, U, residuals to " << out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// learn
// ---------------------------------------------------------------------------

struct LearnOutcome {
  std::string algorithm;
  DataViResult vi;        // populated for the vi-based algorithms
  PiResult pi;            // populated for pi-lqr
  bool used_pi = false;
  bool blind = false;
  std::optional<Mat> p_star;
  Mat k0_used;            // pi-lqr only: the gain the iteration started from
  double seconds = 0.0;
  Trajectory trajectory;
};

// Fills every field a learn run depends on, so the resolved config written
// next to the outputs reproduces the run verbatim.
inline void materialize_learn_defaults(PreparedExperiment& prep,
                                       const std::string& algorithm) {
  ExperimentConfig& cfg = prep.cfg;
  const bool lqr_mode = expdetail::is_lqr_algorithm(algorithm);
  const Index state_dim = lqr_mode ? cfg.plant.n() : prep.aug.dim();
  const Index nz = lqr_mode ? 0 : prep.im.n_z();
  cfg.alg.name = algorithm;
  if (!cfg.Q) cfg.Q = Mat::Identity(state_dim, state_dim);
  if (!cfg.R) cfg.R = Mat::Identity(cfg.plant.m(), cfg.plant.m());
  if (!cfg.alg.P0) cfg.alg.P0 = Mat::Identity(state_dim, state_dim);
  if (!cfg.sim.x0) cfg.sim.x0 = Vec::Zero(cfg.plant.n());
  if (!cfg.sim.z0) cfg.sim.z0 = Vec::Zero(nz);
  if (!cfg.eval.x0) cfg.eval.x0 = Vec::Zero(cfg.plant.n());
  if (!cfg.eval.z0) cfg.eval.z0 = Vec::Zero(prep.im.n_z());
}

inline LearnOutcome run_learn(const PreparedExperiment& prep,
                              const std::string& algorithm) {
  const ExperimentConfig& cfg = prep.cfg;
  const Plant& pl = cfg.plant;
  const bool lqr_mode = expdetail::is_lqr_algorithm(algorithm);
  const Index state_dim = lqr_mode ? pl.n() : prep.aug.dim();
  const Index nz = lqr_mode ? 0 : prep.im.n_z();
  auto w = expdetail::resolve_weights(cfg, state_dim, pl.m());

  // Collection. The LQR schemes learn the plant alone, so the exogenous
  // channel is silenced for them regardless of the configured v0.
  auto input = make_exploration_input(
      pl.m(), lqr_mode ? 0 : pl.q(), pl.n(), nz, cfg.sim.seed,
      cfg.sim.amplitude, cfg.sim.band_lo, cfg.sim.band_hi);
  const CompensatorMode mode = lqr_mode ? CompensatorMode::none
                               : (algorithm == "first" ? CompensatorMode::control
                                                       : CompensatorMode::learning);
  SimOptions sim;
  sim.T = cfg.sim.T;
  sim.h = cfg.sim.h;
  sim.blowup_cap = cfg.sim.blowup_cap;
  const Vec x0 = expdetail::resolved_ic(cfg.sim.x0, pl.n(), "simulation.x0");
  // z0/v0 only matter when a compensator runs; the LQR schemes silence both.
  const Vec z0 =
      lqr_mode ? Vec() : expdetail::resolved_ic(cfg.sim.z0, nz, "simulation.z0");
  const Vec v0 = lqr_mode ? Vec(Vec::Zero(pl.q())) : cfg.exo.v0;
  log_info("collecting data: mode " + std::string(to_string(mode)) + ", T = " +
           std::to_string(sim.T));
  LearnOutcome res;
  res.algorithm = algorithm;
  res.blind = cfg.blind_mode;
  res.trajectory =
      simulate(pl, cfg.exo, lqr_mode ? nullptr : &prep.im, mode, input, sim,
               x0, z0, v0);
  auto dm = build_data_matrices(res.trajectory, cfg.sim.sample_stride);

  if (!cfg.blind_mode) {
    log_info("computing the model-based reference solution");
    if (lqr_mode)
      res.p_star = solve_riccati(pl.A, pl.B, w).P;
    else
      res.p_star = solve_riccati(prep.aug.Y, prep.aug.J, w).P;
  }
  const Mat* p_ref = res.p_star ? &*res.p_star : nullptr;

  auto opt = expdetail::vi_options(cfg.alg);
  const Mat p0 = cfg.alg.P0 ? *cfg.alg.P0
                            : Mat(Mat::Identity(state_dim, state_dim));

  const auto t0 = std::chrono::steady_clock::now();
  if (algorithm == "pi-lqr") {
    Mat k0;
    if (cfg.alg.K0) {
      k0 = *cfg.alg.K0;
    } else {
      log_info("no K0 supplied; bootstrapping one with vi-lqr on the same data");
      ViOptions boot = opt;
      boot.eps_conv = std::max(opt.eps_conv, 1e-3);
      k0 = vi_lqr(dm, w, p0, boot).K;
    }
    res.k0_used = k0;
    PiOptions popt;
    popt.tol = cfg.alg.pi_tol;
    popt.max_iter = cfg.alg.pi_max_iter;
    res.pi = pi_lqr(dm, w, k0, popt);
    res.used_pi = true;
  } else if (algorithm == "vi-lqr") {
    res.vi = vi_lqr(dm, w, p0, opt, p_ref);
  } else if (algorithm == "first") {
    res.vi = vi_or_first(dm, w, p0, opt, p_ref,
                         cfg.blind_mode ? nullptr : &prep.aug.J);
  } else if (algorithm == "improved") {
    res.vi = vi_or_improved(dm, w, p0, cfg.alg.d_is_zero, opt, p_ref);
  } else {
    throw ConfigError("unknown algorithm: " + algorithm);
  }
  res.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return res;
}

inline int cmd_learn(const ExperimentConfig& cfg, const std::string& algorithm,
                     const std::string& out_dir, std::ostream& out) {
  auto prep = prepare(cfg);
  materialize_learn_defaults(prep, algorithm);
  auto res = run_learn(prep, algorithm);

  expdetail::ensure_dir(out_dir);
  const Mat& gain = res.used_pi ? res.pi.K : res.vi.K;
  write_matrix_csv(out_dir + "/K.csv", gain);

  std::vector<ViIterRow> trace;
  if (res.used_pi) {
    for (size_t i = 0; i < res.pi.P_trace.size(); ++i) {
      ViIterRow row;
      row.k = static_cast<long>(i);
      row.q = 0;
      row.eps_k = 0.0;
      row.stat = i ? (res.pi.P_trace[i] - res.pi.P_trace[i - 1]).norm() : 0.0;
      row.update_norm = row.stat;
      if (res.p_star) row.p_err = (res.pi.P_trace[i] - *res.p_star).norm();
      trace.push_back(row);
    }
  } else {
    trace = res.vi.trace;
  }
  write_learn_report_csv(out_dir + "/report.csv", trace, !res.blind);

  if (res.algorithm == "improved") {
    write_matrix_csv(out_dir + "/J_hat.csv", res.vi.J_hat);
    write_matrix_csv(out_dir + "/E_hat.csv", res.vi.E_hat);
  } else if (res.algorithm == "first") {
    write_matrix_csv(out_dir + "/EG_hat.csv", res.vi.EG_hat);
  }
  if (cfg.export_trajectory)
    write_trajectory_csv(out_dir + "/trajectory.csv", res.trajectory);

  ExperimentConfig resolved = prep.cfg;
  if (res.used_pi) resolved.alg.K0 = res.k0_used;
  expdetail::write_resolved_config(resolved, out_dir);

  std::ostringstream summary;
  summary << "algorithm: " << res.algorithm << "\n";
  if (res.used_pi) {
    summary << "iterations: " << res.pi.iterations << "\n";
    summary << "rank: " << res.pi.rank.rank << " / " << res.pi.rank.required
            << "\n";
  } else {
    summary << "iterations: " << res.vi.iterations << "\n";
    summary << "resets: " << res.vi.resets << "\n";
    summary << "rank: " << res.vi.rank.rank << " / " << res.vi.rank.required
            << "\n";
    if (res.vi.kk_gap >= 0.0)
      summary << "gain identity gap |K + R^-1 J' P|: "
              << format_real(res.vi.kk_gap) << "\n";
  }
  if (res.p_star) {
    const Mat& p_final = res.used_pi ? res.pi.P : res.vi.P;
    summary << "final |P - P*|_F / |P*|_F: "
            << format_real((p_final - *res.p_star).norm() / res.p_star->norm())
            << "\n";
  } else {
    summary << "blind mode: no oracle comparison\n";
  }
  summary << "learning seconds: " << res.seconds << "\n";
  std::ofstream sf(out_dir + "/summary.txt", std::ios::binary);
  sf << summary.str();
  out << summary.str();
  out << "wrote report.csv, K.csv to " << out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

inline int cmd_evaluate(const ExperimentConfig& cfg, const std::string& gain_path,
                        const std::string& out_dir, std::ostream& out) {
  auto prep = prepare(cfg);
  Mat k = read_matrix_csv(gain_path);
  if (k.rows() != cfg.plant.m() || k.cols() != prep.aug.dim())
    throw DimensionError("evaluate: gain must be m x (n + n_z); got " +
                         std::to_string(k.rows()) + " x " +
                         std::to_string(k.cols()));

  EvalOptions opt;
  opt.T = cfg.eval.T;
  opt.h = cfg.eval.h;
  opt.settle_tol = cfg.eval.settle_tol;
  opt.blowup_cap = cfg.sim.blowup_cap;
  const Vec x0 = expdetail::resolved_ic(cfg.eval.x0, cfg.plant.n(), "evaluation.x0");
  const Vec z0 = expdetail::resolved_ic(cfg.eval.z0, prep.im.n_z(), "evaluation.z0");
  auto res = evaluate_controller(cfg.plant, cfg.exo, prep.im, k, opt, x0, z0,
                                 cfg.exo.v0);

  expdetail::ensure_dir(out_dir);
  write_eval_csv(out_dir + "/evaluation.csv", res.traj);
  ExperimentConfig resolved = prep.cfg;
  resolved.eval.x0 = x0;
  resolved.eval.z0 = z0;
  expdetail::write_resolved_config(resolved, out_dir);

  out << "horizon: " << res.horizon << "\n";
  out << "|e(0)| = " << format_real(res.e0_norm)
      << ", |e(T)| = " << format_real(res.final_e_norm) << "\n";
  out << (res.settled ? "settled" : "NOT settled") << " (tolerance "
      << format_real(opt.settle_tol) << " * (1 + |e(0)|))\n";
  return res.settled ? 0 : 1;
}

// ---------------------------------------------------------------------------
// report-tables
// ---------------------------------------------------------------------------

inline int cmd_report_tables(Index n, Index m, Index p, Index q,
                             std::optional<Index> n_z_opt, bool d_zero,
                             std::ostream& out) {
  if (n < 1 || m < 1 || p < 1 || q < 1)
    throw ConfigError("report-tables: dimensions must be positive");
  const Index n_z = n_z_opt ? *n_z_opt : std::max<Index>(1, p * q / 2);
  if (n_z < 1) throw ConfigError("report-tables: n_z must be positive");
  const Index first = count_unknowns(n, m, p, q, n_z, UnknownCount::first_or);
  const Index k0 = count_unknowns(n, m, p, q, n_z, UnknownCount::improved_k0);
  const Index kge1 = count_unknowns(n, m, p, q, n_z, UnknownCount::improved_kge1);

  out << "dimensions: n=" << n << " m=" << m << " p=" << p << " q=" << q
      << " n_z=" << n_z << " (augmented dim " << (n + n_z) << ")\n";
  out << "unknown variables per iteration:\n";
  out << "  first algorithm:           " << first << "\n";
  out << "  improved algorithm (k>=1): " << kge1 << "\n";
  out << "rank condition for data collection:\n";
  out << "  first algorithm:           " << first << "\n";
  out << "  improved algorithm:        " << k0 << "\n";
  if (d_zero)
    out << "  improved algorithm (D=0):  "
        << count_unknowns(n, m, p, q, n_z, UnknownCount::improved_k0_D0) << "\n";
  return 0;
}

}  // namespace regdata
