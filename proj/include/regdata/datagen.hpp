#pragma once

// Trajectory generation and the integral regression blocks. A single RK4
// pass produces x, z (or the learning filter state), v, u, y, e on a uniform
// fine grid; build_data_matrices then forms the per-interval rows
//   delta:    vecv endpoint differences
//   I_ss:     integrals of vecv(state)
//   gamma_*:  integrals of state (x) u, state (x) v, x (x) v, state (x) state
// all on identical interval boundaries, by trapezoidal quadrature.

#include <cstdint>
#include <random>
#include <variant>
#include <vector>

#include "regdata/numerics.hpp"
#include "regdata/sysmodel.hpp"

namespace regdata {

enum class CompensatorMode {
  none,      // plant alone; state for regression is x
  control,   // z' = G1 z + G2 e; state is (x, z)
  learning,  // z' = G1 z + G2 y; state is (x, z)
};

inline const char* to_string(CompensatorMode m) {
  switch (m) {
    case CompensatorMode::none: return "none";
    case CompensatorMode::control: return "control";
    case CompensatorMode::learning: return "learning";
  }
  return "?";
}

// Per-channel sinusoid bank, deterministic in the seed.
struct ExplorationInput {
  Mat amplitudes;   // m x n_sin
  Mat frequencies;  // m x n_sin, rad/s, pairwise distinct per channel
  Mat phases;       // m x n_sin, in [0, 2pi)
  std::uint64_t seed = 0;

  Index channels() const { return amplitudes.rows(); }

  Vec eval(double t) const {
    Vec u = Vec::Zero(channels());
    for (Index i = 0; i < channels(); ++i)
      for (Index k = 0; k < amplitudes.cols(); ++k)
        u[i] += amplitudes(i, k) * std::sin(frequencies(i, k) * t + phases(i, k));
    return u;
  }
};

// Sized so the sinusoid count comfortably exceeds the largest unknown count
// any of the regressions needs (the first output-regulation system).
inline ExplorationInput make_exploration_input(Index m, Index q, Index n,
                                               Index n_z, std::uint64_t seed,
                                               double amplitude, double w_lo,
                                               double w_hi) {
  if (!(0.0 < w_lo && w_lo < w_hi))
    throw DimensionError("make_exploration_input: need 0 < w_lo < w_hi");
  if (m < 1) throw DimensionError("make_exploration_input: m must be >= 1");
  const Index dim = n + n_z;
  const Index unknowns = sym_size(dim) + (m + q) * dim;
  const Index n_sin = static_cast<Index>(
      std::ceil(1.2 * static_cast<double>(unknowns) / static_cast<double>(m)));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> freq(w_lo, w_hi);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);

  ExplorationInput in;
  in.seed = seed;
  in.amplitudes = Mat::Constant(m, n_sin, amplitude);
  in.frequencies = Mat(m, n_sin);
  in.phases = Mat(m, n_sin);
  for (Index i = 0; i < m; ++i)
    for (Index k = 0; k < n_sin; ++k) {
      double w = freq(rng);
      bool distinct = false;
      while (!distinct) {
        distinct = true;
        for (Index r = 0; r < k; ++r)
          if (in.frequencies(i, r) == w) {
            distinct = false;
            w = freq(rng);
            break;
          }
      }
      in.frequencies(i, k) = w;
      in.phases(i, k) = phase(rng);
    }
  return in;
}

// Static feedback on the simulated state (x alone when there is no
// compensator, (x, z) otherwise).
struct FeedbackGain {
  Mat K;
};

using InputLaw = std::variant<ExplorationInput, FeedbackGain>;

struct SimOptions {
  double T = 30.0;
  double h = 1e-3;
  double blowup_cap = 1e9;
};

struct Trajectory {
  double h = 0.0;
  CompensatorMode mode = CompensatorMode::none;
  std::vector<double> t;
  Mat x, z, v, u, y, e;  // one row per sample; z has zero columns in mode none

  Index samples() const { return static_cast<Index>(t.size()); }
};

// Fixed-step RK4 on the joint (x, z, v) dynamics. The exploration input is a
// function of time only; a feedback gain closes the loop through the stage
// states. Throws BlowUpError when any state norm passes the cap.
inline Trajectory simulate(const Plant& plant, const Exosystem& exo,
                           const InternalModel* im, CompensatorMode mode,
                           const InputLaw& input, const SimOptions& opt,
                           const Vec& x0, const Vec& z0, const Vec& v0) {
  plant.validate();
  exo.validate();
  if (exo.q() != plant.q())
    throw DimensionError("simulate: exosystem dimension != plant q");
  if (opt.h <= 0.0 || opt.T < opt.h)
    throw DimensionError("simulate: need h > 0 and T >= h");
  if (mode != CompensatorMode::none && im == nullptr)
    throw DimensionError("simulate: compensator mode needs an internal model");
  const Index n = plant.n(), m = plant.m(), p = plant.p(), q = plant.q();
  const Index nz = (mode == CompensatorMode::none) ? 0 : im->n_z();
  if (x0.size() != n || z0.size() != nz || v0.size() != q)
    throw DimensionError("simulate: initial condition dimension mismatch");
  if (const auto* gain = std::get_if<FeedbackGain>(&input);
      gain && (gain->K.rows() != m || gain->K.cols() != n + nz))
    throw DimensionError("simulate: feedback gain must be m x (state dim)");

  const auto steps = static_cast<Index>(std::llround(opt.T / opt.h));
  const double h = opt.h;

  Trajectory traj;
  traj.h = h;
  traj.mode = mode;
  traj.t.resize(static_cast<size_t>(steps) + 1);
  traj.x.resize(steps + 1, n);
  traj.z.resize(steps + 1, nz);
  traj.v.resize(steps + 1, q);
  traj.u.resize(steps + 1, m);
  traj.y.resize(steps + 1, p);
  traj.e.resize(steps + 1, p);

  auto input_at = [&](double t, const Vec& x, const Vec& z) -> Vec {
    if (const auto* expl = std::get_if<ExplorationInput>(&input))
      return expl->eval(t);
    const auto& gain = std::get<FeedbackGain>(input);
    Vec xi(n + nz);
    xi << x, z;
    return gain.K * xi;
  };

  // w = (x, z, v) packed; returns dw/dt.
  auto deriv = [&](double t, const Vec& w) -> Vec {
    const Vec x = w.segment(0, n);
    const Vec z = w.segment(n, nz);
    const Vec v = w.segment(n + nz, q);
    const Vec u = input_at(t, x, z);
    Vec dw(n + nz + q);
    dw.segment(0, n) = plant.A * x + plant.B * u + plant.E * v;
    if (nz > 0) {
      const Vec y = plant.C * x + plant.D * u;
      if (mode == CompensatorMode::control)
        dw.segment(n, nz) = im->G1 * z + im->G2 * (y + plant.F * v);
      else
        dw.segment(n, nz) = im->G1 * z + im->G2 * y;
    }
    dw.segment(n + nz, q) = exo.S * v;
    return dw;
  };

  Vec w(n + nz + q);
  w << x0, z0, v0;
  for (Index i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) * h;
    const Vec x = w.segment(0, n);
    const Vec z = w.segment(n, nz);
    const Vec v = w.segment(n + nz, q);
    const Vec u = input_at(t, x, z);
    const Vec y = plant.C * x + plant.D * u;

    traj.t[static_cast<size_t>(i)] = t;
    traj.x.row(i) = x;
    traj.z.row(i) = z;
    traj.v.row(i) = v;
    traj.u.row(i) = u;
    traj.y.row(i) = y;
    traj.e.row(i) = y + plant.F * v;

    if (!w.allFinite() || w.norm() > opt.blowup_cap)
      throw BlowUpError(
          "simulate: state exceeded the blow-up cap; shorten the learning "
          "window T or lower the input amplitude");
    if (i == steps) break;

    const Vec k1 = deriv(t, w);
    const Vec k2 = deriv(t + 0.5 * h, Vec(w + 0.5 * h * k1));
    const Vec k3 = deriv(t + 0.5 * h, Vec(w + 0.5 * h * k2));
    const Vec k4 = deriv(t + h, Vec(w + h * k3));
    w += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Data matrices
// ---------------------------------------------------------------------------

struct DataMatrices {
  CompensatorMode mode = CompensatorMode::none;
  Index dim = 0;     // regression state dimension (n or n + n_z)
  Index n = 0, m = 0, q = 0;
  Index stride = 0;  // fine steps per interval
  double h = 0.0;

  Mat delta;     // s x sym_size(dim)
  Mat I_ss;      // s x sym_size(dim)
  Mat gamma_ss;  // s x dim^2
  Mat gamma_su;  // s x dim*m
  Mat gamma_sv;  // s x dim*q
  Mat gamma_xv;  // s x n*q

  Index samples() const { return delta.rows(); }
};

inline DataMatrices build_data_matrices(const Trajectory& traj,
                                        Index sample_stride) {
  if (sample_stride < 2)
    throw DimensionError("build_data_matrices: sample_stride must be >= 2");
  const Index fine = traj.samples() - 1;
  const Index s = fine / sample_stride;
  if (s < 1)
    throw DimensionError(
        "build_data_matrices: trajectory too short for one interval");

  const Index n = traj.x.cols(), nz = traj.z.cols(), m = traj.u.cols(),
              q = traj.v.cols();
  const Index dim = n + nz;

  DataMatrices dm;
  dm.mode = traj.mode;
  dm.dim = dim;
  dm.n = n;
  dm.m = m;
  dm.q = q;
  dm.stride = sample_stride;
  dm.h = traj.h;
  dm.delta.resize(s, sym_size(dim));
  dm.I_ss.resize(s, sym_size(dim));
  dm.gamma_ss.resize(s, dim * dim);
  dm.gamma_su.resize(s, dim * m);
  dm.gamma_sv.resize(s, dim * q);
  dm.gamma_xv.resize(s, n * q);

  auto state_at = [&](Index i) -> Vec {
    Vec xi(dim);
    if (nz > 0)
      xi << traj.x.row(i).transpose(), traj.z.row(i).transpose();
    else
      xi = traj.x.row(i).transpose();
    return xi;
  };

  const double h = traj.h;
  for (Index j = 0; j < s; ++j) {
    const Index a = j * sample_stride, b = (j + 1) * sample_stride;
    Vec i_ss = Vec::Zero(sym_size(dim));
    Vec g_ss = Vec::Zero(dim * dim);
    Vec g_su = Vec::Zero(dim * m);
    Vec g_sv = Vec::Zero(dim * q);
    Vec g_xv = Vec::Zero(n * q);

    Vec xi_prev = state_at(a);
    Vec vv_prev = vecv(xi_prev);
    for (Index i = a; i < b; ++i) {
      const Vec xi_next = state_at(i + 1);
      const Vec vv_next = vecv(xi_next);
      const Vec u_prev = traj.u.row(i).transpose(), u_next = traj.u.row(i + 1).transpose();
      const Vec v_prev = traj.v.row(i).transpose(), v_next = traj.v.row(i + 1).transpose();
      const double w = 0.5 * h;
      i_ss += w * (vv_prev + vv_next);
      g_ss += w * (kron(Mat(xi_prev), Mat(xi_prev)) + kron(Mat(xi_next), Mat(xi_next)));
      g_su += w * (kron(Mat(xi_prev), Mat(u_prev)) + kron(Mat(xi_next), Mat(u_next)));
      if (q > 0) {
        g_sv += w * (kron(Mat(xi_prev), Mat(v_prev)) + kron(Mat(xi_next), Mat(v_next)));
        g_xv += w * (kron(Mat(xi_prev.head(n)), Mat(v_prev)) +
                     kron(Mat(xi_next.head(n)), Mat(v_next)));
      }
      xi_prev = xi_next;
      vv_prev = vv_next;
    }
    dm.delta.row(j) = vv_prev - vecv(state_at(a));
    dm.I_ss.row(j) = i_ss;
    dm.gamma_ss.row(j) = g_ss;
    dm.gamma_su.row(j) = g_su;
    dm.gamma_sv.row(j) = g_sv;
    dm.gamma_xv.row(j) = g_xv;
  }
  return dm;
}

// ---------------------------------------------------------------------------
// Rank conditions
// ---------------------------------------------------------------------------

enum class RankCase {
  pi_lqr,
  vi_lqr,
  first_or,
  improved_or,
  improved_or_D0,
};

inline const char* to_string(RankCase c) {
  switch (c) {
    case RankCase::pi_lqr: return "pi_lqr";
    case RankCase::vi_lqr: return "vi_lqr";
    case RankCase::first_or: return "first_or";
    case RankCase::improved_or: return "improved_or";
    case RankCase::improved_or_D0: return "improved_or_D0";
  }
  return "?";
}

struct RankReport {
  bool ok = false;
  Index rank = 0;
  Index required = 0;
};

// Stacks the case-specific blocks and compares the numerical rank against
// the unknown count the corresponding regression has to pin down.
inline RankReport check_rank_condition(const DataMatrices& dm, RankCase which,
                                       double tol = -1.0) {
  const Index dim = dm.dim, n = dm.n, m = dm.m, q = dm.q;
  Mat stacked;
  Index required = 0;
  switch (which) {
    case RankCase::pi_lqr:
      stacked.resize(dm.samples(), dm.gamma_ss.cols() + dm.gamma_su.cols());
      stacked << dm.gamma_ss, dm.gamma_su;
      required = sym_size(dim) + m * dim;
      break;
    case RankCase::vi_lqr:
      stacked.resize(dm.samples(), dm.I_ss.cols() + dm.gamma_su.cols());
      stacked << dm.I_ss, dm.gamma_su;
      required = sym_size(dim) + m * dim;
      break;
    case RankCase::first_or:
      stacked.resize(dm.samples(),
                     dm.I_ss.cols() + dm.gamma_su.cols() + dm.gamma_sv.cols());
      stacked << dm.I_ss, dm.gamma_su, dm.gamma_sv;
      required = sym_size(dim) + (m + q) * dim;
      break;
    case RankCase::improved_or:
      stacked.resize(dm.samples(),
                     dm.I_ss.cols() + dm.gamma_su.cols() + dm.gamma_xv.cols());
      stacked << dm.I_ss, dm.gamma_su, dm.gamma_xv;
      required = sym_size(dim) + dim * m + n * q;
      break;
    case RankCase::improved_or_D0:
      stacked.resize(dm.samples(),
                     dm.I_ss.cols() + n * m + dm.gamma_xv.cols());
      stacked << dm.I_ss, dm.gamma_su.leftCols(n * m), dm.gamma_xv;
      required = sym_size(dim) + n * m + n * q;
      break;
  }
  RankReport rep;
  rep.required = required;
  rep.rank = numerical_rank(stacked, tol);
  rep.ok = rep.rank >= required;
  return rep;
}

}  // namespace regdata
