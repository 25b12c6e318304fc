#pragma once

// The data-driven algorithms. All four consume one set of integral data
// matrices collected offline and never touch the plant matrices:
//   pi_lqr          policy iteration on (x, u) data, needs a stabilizing K0
//   vi_lqr          value iteration on (x, u) data, needs none
//   vi_or_first     value iteration on (xi, u, v) data with the control
//                   compensator in the loop; unknowns H_k, K_k, and the
//                   stacked exogenous block
//   vi_or_improved  the reduced scheme on (xi_hat, u, v) data with the
//                   learning compensator: one big solve at k = 0 identifies
//                   J and E, after that every step solves only for H_k
//                   through a cached least-squares operator.

#include <cmath>
#include <optional>
#include <vector>

#include "regdata/datagen.hpp"
#include "regdata/numerics.hpp"
#include "regdata/oracle.hpp"

namespace regdata {

// ---------------------------------------------------------------------------
// Unknown counts
// ---------------------------------------------------------------------------

enum class UnknownCount {
  first_or,
  improved_k0,
  improved_k0_D0,
  improved_kge1,
};

inline Index count_unknowns(Index n, Index m, [[maybe_unused]] Index p, Index q,
                            Index n_z, UnknownCount which) {
  const Index dim = n + n_z;
  switch (which) {
    case UnknownCount::first_or: return sym_size(dim) + (m + q) * dim;
    case UnknownCount::improved_k0: return sym_size(dim) + dim * m + n * q;
    case UnknownCount::improved_k0_D0: return sym_size(dim) + n * (m + q);
    case UnknownCount::improved_kge1: return sym_size(dim);
  }
  throw DimensionError("count_unknowns: unknown case");
}

// ---------------------------------------------------------------------------
// Column-scaled least squares
// ---------------------------------------------------------------------------

namespace detail {

// Normalizes every column to unit 2-norm before factorizing and rescales
// the solution; mixed vecv/Kronecker units otherwise wreck conditioning.
// Columns that are identically zero (no signal in that channel) can be
// dropped: their unknowns are pinned to zero.
class ScaledLeastSquares {
 public:
  ScaledLeastSquares(const Mat& a, bool drop_zero_columns = false,
                     double zero_col_tol = 1e-12) {
    cols_ = a.cols();
    Vec norms(cols_);
    for (Index j = 0; j < cols_; ++j) norms[j] = a.col(j).norm();
    const double biggest = cols_ ? norms.maxCoeff() : 0.0;
    for (Index j = 0; j < cols_; ++j) {
      if (drop_zero_columns && norms[j] <= zero_col_tol * biggest) continue;
      active_.push_back(j);
    }
    Mat scaled(a.rows(), static_cast<Index>(active_.size()));
    scale_.resize(static_cast<Index>(active_.size()));
    for (size_t k = 0; k < active_.size(); ++k) {
      const Index j = active_[k];
      scale_[static_cast<Index>(k)] = norms[j] > 0.0 ? norms[j] : 1.0;
      scaled.col(static_cast<Index>(k)) = a.col(j) / scale_[static_cast<Index>(k)];
    }
    ls_.emplace(std::move(scaled));
  }

  Index active_count() const { return static_cast<Index>(active_.size()); }
  Index dropped_count() const { return cols_ - active_count(); }
  bool full_column_rank() const { return ls_->full_column_rank(); }
  Index rank() const { return ls_->rank(); }

  // Solution in the original column order, zeros in dropped positions.
  Mat solve(const Mat& b) const {
    Mat y = ls_->solve(b);
    Mat x = Mat::Zero(cols_, b.cols());
    for (size_t k = 0; k < active_.size(); ++k)
      x.row(active_[k]) = y.row(static_cast<Index>(k)) / scale_[static_cast<Index>(k)];
    return x;
  }

 private:
  Index cols_ = 0;
  std::vector<Index> active_;
  Vec scale_;
  std::optional<LeastSquares> ls_;
};

inline void require_rank(const RankReport& rep, const char* who) {
  if (!rep.ok)
    throw RankDeficientError(std::string(who) + ": data rank condition failed",
                             rep.rank, rep.required);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Policy iteration on data
// ---------------------------------------------------------------------------

struct PiOptions {
  double tol = 1e-10;
  long max_iter = 100;
  double p_cap = 1e12;
};

struct PiResult {
  Mat P, K;
  std::vector<Mat> P_trace;
  long iterations = 0;
  RankReport rank;
};

inline PiResult pi_lqr(const DataMatrices& dm, const LqrWeights& w,
                       const Mat& k0, const PiOptions& opt = {}) {
  const Index dim = dm.dim, m = dm.m;
  w.validate(dim, m);
  if (k0.rows() != m || k0.cols() != dim)
    throw DimensionError("pi_lqr: K0 must be m x state-dim");
  PiResult out;
  out.rank = check_rank_condition(dm, RankCase::pi_lqr);
  detail::require_rank(out.rank, "pi_lqr");

  const Mat id = Mat::Identity(dim, dim);
  const Mat gamma_su_r = dm.gamma_su * kron(id, w.R);
  Mat k = k0;
  Mat p_prev;
  for (long it = 0; it < opt.max_iter; ++it) {
    Mat psi(dm.samples(), sym_size(dim) + dim * m);
    psi << dm.delta,
        -2.0 * dm.gamma_ss * kron(id, Mat(k.transpose() * w.R)) + 2.0 * gamma_su_r;
    Vec phi = -dm.gamma_ss * vec(Mat(w.Q + k.transpose() * w.R * k));

    detail::ScaledLeastSquares ls(psi);
    if (!ls.full_column_rank())
      throw RankDeficientError("pi_lqr: regression lost rank", ls.rank(),
                               ls.active_count());
    Vec sol = ls.solve(phi);
    Mat p = unvecs(sol.head(sym_size(dim)));
    k = unvec(sol.tail(dim * m), m, dim);

    if (!all_finite(p) || p.norm() > opt.p_cap)
      throw NotHurwitzError("pi_lqr: iterates diverged; K0 is likely not stabilizing");
    // Policy iteration from a stabilizing gain keeps every P_k above P* >= 0;
    // an indefinite iterate proves the gain was bad.
    if (min_eigenvalue_sym(p) < -1e-9 * std::max(1.0, p.norm()))
      throw NotHurwitzError(
          "pi_lqr: iterate is not positive semidefinite; K0 is not stabilizing");
    out.P_trace.push_back(p);
    out.iterations = it + 1;
    if (it > 0 && (p - p_prev).norm() <= opt.tol) {
      out.P = p;
      out.K = k;
      return out;
    }
    p_prev = p;
  }
  throw IterationCapError("pi_lqr: no convergence within iteration cap");
}

// ---------------------------------------------------------------------------
// Value iteration on data
// ---------------------------------------------------------------------------

struct DataViResult {
  Mat P, K;
  Mat H_final;
  Mat EG_hat;        // vi_or_first: recovered [E; G2 F]
  Mat J_hat, E_hat;  // vi_or_improved: identified input/exogenous matrices
  std::vector<ViIterRow> trace;
  long iterations = 0;
  int resets = 0;
  RankReport rank;
  double kk_gap = -1.0;  // |K_k + R^{-1} J' P_k| at the last iterate, if J known
};

namespace detail {

// Shared value-iteration step bookkeeping: bounded-set reset, convergence
// test, trace row. Returns true when the run converged at the current P.
class ViLoop {
 public:
  ViLoop(const ViOptions& opt, const Mat& p0, const Mat* p_ref)
      : opt_(opt), p0_(p0), b0_(opt.b0_scale * p0.norm()), p_ref_(p_ref) {}

  long k() const { return k_; }
  int resets() const { return q_; }
  std::vector<ViIterRow>&& take_trace() { return std::move(trace_); }

  bool exhausted() const { return k_ >= opt_.max_iter; }

  // update = the bracketed matrix multiplying eps_k.
  bool step(Mat& p, const Mat& update) {
    const double eps_k = opt_.eps_c / static_cast<double>(k_ + 1);
    const double stat = update.norm();
    if (opt_.record_trace) {
      ViIterRow row{k_, q_, eps_k, stat, eps_k * stat, -1.0};
      if (p_ref_) row.p_err = (p - *p_ref_).norm();
      trace_.push_back(row);
    }
    Mat p_tilde = p + eps_k * update;
    ++k_;
    if (!in_bounded_set(p_tilde, b0_ * std::pow(2.0, q_))) {
      p = p0_;
      ++q_;
      if (q_ > opt_.reset_cap)
        throw IterationCapError(
            "value iteration: reset cap exceeded; adjust eps_c or b0_scale");
      return false;
    }
    if (stat < opt_.eps_conv) return true;
    p = p_tilde;
    return false;
  }

 private:
  const ViOptions& opt_;
  Mat p0_;
  double b0_;
  const Mat* p_ref_;
  long k_ = 0;
  int q_ = 0;
  std::vector<ViIterRow> trace_;
};

}  // namespace detail

inline DataViResult vi_lqr(const DataMatrices& dm, const LqrWeights& w,
                           const Mat& p0, const ViOptions& opt = {},
                           const Mat* p_ref = nullptr) {
  const Index dim = dm.dim, m = dm.m;
  w.validate(dim, m);
  if (p0.rows() != dim || p0.cols() != dim)
    throw DimensionError("vi_lqr: P0 dimension mismatch");
  if (min_eigenvalue_sym(p0) <= 0.0)
    throw Error("vi_lqr: P0 must be positive definite");
  DataViResult out;
  out.rank = check_rank_condition(dm, RankCase::vi_lqr);
  detail::require_rank(out.rank, "vi_lqr");

  // Fixed regression matrix [I_xx, -2 I_xu]; only the right-hand side
  // moves with P_k.
  Mat psi(dm.samples(), sym_size(dim) + dim * m);
  psi << dm.I_ss, -2.0 * dm.gamma_su * kron(Mat::Identity(dim, dim), w.R);
  detail::ScaledLeastSquares ls(psi);
  if (!ls.full_column_rank())
    throw RankDeficientError("vi_lqr: regression matrix is rank deficient",
                             ls.rank(), ls.active_count());

  Mat p = p0;
  Mat k_gain, h;
  detail::ViLoop loop(opt, p0, p_ref);
  while (!loop.exhausted()) {
    Vec sol = ls.solve(Vec(dm.delta * vecs(p)));
    h = unvecs(sol.head(sym_size(dim)));
    k_gain = unvec(sol.tail(dim * m), m, dim);
    if (loop.step(p, Mat(h - k_gain.transpose() * w.R * k_gain + w.Q))) {
      out.P = symmetrize(p);
      out.K = k_gain;
      out.H_final = h;
      out.iterations = loop.k();
      out.resets = loop.resets();
      out.trace = loop.take_trace();
      return out;
    }
  }
  throw IterationCapError("vi_lqr: iteration cap reached before convergence");
}

inline DataViResult vi_or_first(const DataMatrices& dm, const LqrWeights& w,
                                const Mat& p0, const ViOptions& opt = {},
                                const Mat* p_ref = nullptr,
                                const Mat* j_true = nullptr) {
  const Index dim = dm.dim, m = dm.m, q = dm.q;
  w.validate(dim, m);
  if (dm.mode != CompensatorMode::control)
    throw DimensionError("vi_or_first: needs data with the control compensator");
  if (p0.rows() != dim || p0.cols() != dim)
    throw DimensionError("vi_or_first: P0 dimension mismatch");
  if (min_eigenvalue_sym(p0) <= 0.0)
    throw Error("vi_or_first: P0 must be positive definite");

  // Psi = [I_ss, -2 Gamma_su (I o R), 2 Gamma_sv], constant over k.
  // Identically-zero columns (a dead exogenous channel, v == 0) carry no
  // information; they are dropped and their unknowns pinned to zero, which
  // reduces the scheme to vi_lqr on the augmented state.
  Mat psi(dm.samples(), sym_size(dim) + dim * m + dim * q);
  psi << dm.I_ss, -2.0 * dm.gamma_su * kron(Mat::Identity(dim, dim), w.R),
      2.0 * dm.gamma_sv;
  detail::ScaledLeastSquares ls(psi, /*drop_zero_columns=*/true);

  DataViResult out;
  {
    Mat rank_stack(dm.samples(), dm.I_ss.cols() + dm.gamma_su.cols() + dm.gamma_sv.cols());
    rank_stack << dm.I_ss, dm.gamma_su, dm.gamma_sv;
    detail::ScaledLeastSquares rank_ls(rank_stack, /*drop_zero_columns=*/true);
    out.rank.required = rank_ls.active_count();
    out.rank.rank = rank_ls.rank();
    out.rank.ok = rank_ls.full_column_rank();
  }
  detail::require_rank(out.rank, "vi_or_first");
  if (!ls.full_column_rank())
    throw RankDeficientError("vi_or_first: regression matrix is rank deficient",
                             ls.rank(), ls.active_count());

  Mat p = p0;
  Mat k_gain, h, theta_eg;
  detail::ViLoop loop(opt, p0, p_ref);
  while (!loop.exhausted()) {
    Vec sol = ls.solve(Vec(dm.delta * vecs(p)));
    h = unvecs(sol.head(sym_size(dim)));
    k_gain = unvec(sol.segment(sym_size(dim), dim * m), m, dim);
    theta_eg = unvec(sol.tail(dim * q), q, dim);  // [E; G2 F]' P_k
    if (loop.step(p, Mat(h - k_gain.transpose() * w.R * k_gain + w.Q))) {
      out.P = symmetrize(p);
      out.K = k_gain;
      out.H_final = h;
      out.EG_hat = solve_linear(out.P, Mat(theta_eg.transpose()));
      if (j_true)
        out.kk_gap =
            (k_gain + w.R.llt().solve(j_true->transpose() * out.P)).norm();
      out.iterations = loop.k();
      out.resets = loop.resets();
      out.trace = loop.take_trace();
      return out;
    }
  }
  throw IterationCapError("vi_or_first: iteration cap reached before convergence");
}

// Fixed operator of the k >= 1 reduction: with J and E identified, the
// unknown shrinks to vecs(H_k) and
//   vecs(H_k) = lstsq(I_ss) applied to
//               [delta - 2 Gamma_su (I o J') M - 2 Gamma_sv (I o [E;0]') M]
// times vecs(P_k). Computed once, reused every iteration.
inline Mat improved_h_operator(const DataMatrices& dm, const Mat& j_hat,
                               const Mat& e_hat) {
  const Index dim = dm.dim, n = dm.n, q = dm.q;
  Mat e0_hat = Mat::Zero(dim, q);
  e0_hat.topRows(n) = e_hat;
  const Mat dup = duplication_matrix(dim);
  const Mat id = Mat::Identity(dim, dim);
  Mat phi = dm.delta -
            2.0 * dm.gamma_su * kron(id, Mat(j_hat.transpose())) * dup -
            2.0 * dm.gamma_sv * kron(id, Mat(e0_hat.transpose())) * dup;
  detail::ScaledLeastSquares ls(dm.I_ss);
  if (!ls.full_column_rank())
    throw RankDeficientError("improved_h_operator: I_ss is rank deficient",
                             ls.rank(), ls.active_count());
  return ls.solve(phi);
}

inline DataViResult vi_or_improved(const DataMatrices& dm, const LqrWeights& w,
                                   const Mat& p0, bool d_is_zero = false,
                                   const ViOptions& opt = {},
                                   const Mat* p_ref = nullptr) {
  const Index dim = dm.dim, n = dm.n, m = dm.m, q = dm.q;
  const Index nz = dim - n;
  w.validate(dim, m);
  if (dm.mode != CompensatorMode::learning)
    throw DimensionError("vi_or_improved: needs data with the learning compensator");
  if (p0.rows() != dim || p0.cols() != dim)
    throw DimensionError("vi_or_improved: P0 dimension mismatch");
  if (p0.topRightCorner(n, nz).cwiseAbs().maxCoeff() > 0.0 ||
      p0.bottomLeftCorner(nz, n).cwiseAbs().maxCoeff() > 0.0)
    throw Error("vi_or_improved: P0 must be block diagonal in (x, z)");
  const Mat p01 = p0.topLeftCorner(n, n);
  const Mat p02 = p0.bottomRightCorner(nz, nz);
  if (min_eigenvalue_sym(p01) <= 0.0 || min_eigenvalue_sym(p02) <= 0.0)
    throw Error("vi_or_improved: P0 blocks must be positive definite");

  DataViResult out;
  out.rank = check_rank_condition(
      dm, d_is_zero ? RankCase::improved_or_D0 : RankCase::improved_or);
  if (!out.rank.ok) {
    const Index r_i = numerical_rank(dm.I_ss);
    const Index r_u = numerical_rank(dm.gamma_su);
    const Index r_v = numerical_rank(dm.gamma_xv);
    throw RankDeficientError(
        "vi_or_improved: data rank condition failed (block ranks I_ss " +
            std::to_string(r_i) + "/" + std::to_string(sym_size(dim)) +
            ", Gamma_su " + std::to_string(r_u) + "/" + std::to_string(dim * m) +
            ", Gamma_xv " + std::to_string(r_v) + "/" + std::to_string(n * q) +
            ")",
        out.rank.rank, out.rank.required);
  }

  // k = 0: one big solve identifies H_0, J' P0 and E' P01.
  const Index ju_cols = d_is_zero ? n * m : dim * m;
  Mat psi0(dm.samples(), sym_size(dim) + ju_cols + n * q);
  psi0 << dm.I_ss, 2.0 * dm.gamma_su.leftCols(ju_cols), 2.0 * dm.gamma_xv;
  detail::ScaledLeastSquares ls0(psi0);
  if (!ls0.full_column_rank())
    throw RankDeficientError("vi_or_improved: k=0 regression is rank deficient",
                             ls0.rank(), ls0.active_count());
  Vec sol0 = ls0.solve(Vec(dm.delta * vecs(p0)));
  Mat h = unvecs(sol0.head(sym_size(dim)));
  if (d_is_zero) {
    Mat theta_b = unvec(sol0.segment(sym_size(dim), n * m), m, n);  // B' P01
    out.J_hat = Mat::Zero(dim, m);
    out.J_hat.topRows(n) = solve_linear(p01, Mat(theta_b.transpose()));
  } else {
    Mat theta_j = unvec(sol0.segment(sym_size(dim), dim * m), m, dim);  // J' P0
    out.J_hat = solve_linear(p0, Mat(theta_j.transpose()));
  }
  Mat theta_e = unvec(sol0.tail(n * q), q, n);  // E' P01
  out.E_hat = solve_linear(p01, Mat(theta_e.transpose()));

  // k >= 1: only H_k is unknown through the cached fixed operator.
  const Mat h_operator = improved_h_operator(dm, out.J_hat, out.E_hat);

  const Mat j_rinv_jt = out.J_hat * w.R.llt().solve(out.J_hat.transpose());
  Mat p = p0;
  detail::ViLoop loop(opt, p0, p_ref);
  while (!loop.exhausted()) {
    if (loop.k() > 0) h = unvecs(Vec(h_operator * vecs(p)));
    if (loop.step(p, Mat(h - p * j_rinv_jt * p + w.Q))) {
      out.P = symmetrize(p);
      out.K = -w.R.llt().solve(out.J_hat.transpose() * out.P);
      out.H_final = h;
      out.iterations = loop.k();
      out.resets = loop.resets();
      out.trace = loop.take_trace();
      return out;
    }
  }
  throw IterationCapError(
      "vi_or_improved: iteration cap reached before convergence");
}

// Cached-operator equivalence helper: H_k from a fresh full solve of the
// k >= 1 system at a given P. Test-facing, mirrors the loop body above.
inline Mat improved_h_full_resolve(const DataMatrices& dm, const Mat& j_hat,
                                   const Mat& e_hat, const Mat& p) {
  const Index dim = dm.dim, n = dm.n, q = dm.q;
  Mat e0_hat = Mat::Zero(dim, q);
  e0_hat.topRows(n) = e_hat;
  Vec rhs = dm.delta * vecs(p) -
            2.0 * dm.gamma_su * vec(Mat(j_hat.transpose() * p)) -
            2.0 * dm.gamma_sv * vec(Mat(e0_hat.transpose() * p));
  detail::ScaledLeastSquares ls(dm.I_ss);
  return unvecs(Vec(ls.solve(rhs)));
}

// ---------------------------------------------------------------------------
// Closed-loop evaluation
// ---------------------------------------------------------------------------

struct EvalOptions {
  double T = 0.0;  // <= 0: 40 / |slowest closed-loop mode|
  double h = 1e-3;
  double settle_tol = 1e-4;
  double blowup_cap = 1e9;
  double fallback_T = 50.0;  // horizon when the loop is not even stable
};

struct EvalResult {
  Trajectory traj;
  bool settled = false;
  double e0_norm = 0.0;
  double final_e_norm = 0.0;
  double horizon = 0.0;
};

// Runs the true closed loop with the control compensator z' = G1 z + G2 e
// and u = Kx x + Kz z, and checks the terminal tracking error.
inline EvalResult evaluate_controller(const Plant& plant, const Exosystem& exo,
                                      const InternalModel& im, const Mat& k,
                                      const EvalOptions& opt, const Vec& x0,
                                      const Vec& z0, const Vec& v0) {
  auto aug = build_augmented(plant, im);
  if (k.rows() != plant.m() || k.cols() != aug.dim())
    throw DimensionError("evaluate_controller: K must be m x (n + n_z)");

  EvalResult out;
  out.horizon = opt.T;
  if (out.horizon <= 0.0) {
    const double alpha = spectral_abscissa(Mat(aug.Y + aug.J * k));
    out.horizon = (alpha < -1e-6) ? 40.0 / std::abs(alpha) : opt.fallback_T;
  }
  SimOptions sim;
  sim.T = out.horizon;
  sim.h = opt.h;
  sim.blowup_cap = opt.blowup_cap;
  out.traj = simulate(plant, exo, &im, CompensatorMode::control,
                      FeedbackGain{k}, sim, x0, z0, v0);
  out.e0_norm = out.traj.e.row(0).norm();
  out.final_e_norm = out.traj.e.row(out.traj.samples() - 1).norm();
  out.settled = out.final_e_norm <= opt.settle_tol * (1.0 + out.e0_norm);
  return out;
}

}  // namespace regdata
