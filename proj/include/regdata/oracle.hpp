#pragma once

// Model-based ground truth: Lyapunov solves, Kleinman policy iteration,
// model-based value iteration, and the regulator equations. Everything the
// data-driven learners produce is checked against this header.

#include <cmath>
#include <vector>

#include "regdata/numerics.hpp"
#include "regdata/sysmodel.hpp"

namespace regdata {

struct LqrWeights {
  Mat Q;  // symmetric PSD, state dimension
  Mat R;  // symmetric PD, input dimension

  void validate(Index state_dim, Index input_dim) const {
    if (Q.rows() != state_dim || Q.cols() != state_dim)
      throw DimensionError("weights: Q has wrong dimension");
    if (R.rows() != input_dim || R.cols() != input_dim)
      throw DimensionError("weights: R has wrong dimension");
    if ((Q - Q.transpose()).norm() > 1e-10 * std::max(1.0, Q.norm()))
      throw NotSymmetricError("weights: Q is not symmetric");
    if ((R - R.transpose()).norm() > 1e-10 * std::max(1.0, R.norm()))
      throw NotSymmetricError("weights: R is not symmetric");
    if (min_eigenvalue_sym(Q) < -1e-10)
      throw Error("weights: Q must be positive semidefinite");
    if (min_eigenvalue_sym(R) <= 0.0)
      throw Error("weights: R must be positive definite");
  }

  static LqrWeights identity(Index state_dim, Index input_dim) {
    return {Mat::Identity(state_dim, state_dim),
            Mat::Identity(input_dim, input_dim)};
  }
};

// Hautus observability of (Y, sqrt(Q)) at every eigenvalue of Y. Advisory:
// callers report it, nothing enforces it.
inline bool observable_sqrt_q(const Mat& y, const Mat& q) {
  const Index n = y.rows();
  const Mat c = sqrt_psd(q);
  for (const auto& lam : eigenvalues(y)) {
    Mat re(2 * n, n), im(2 * n, n);
    re << y - lam.real() * Mat::Identity(n, n), c;
    im.setZero();
    im.topLeftCorner(n, n) = -lam.imag() * Mat::Identity(n, n);
    if (complex_rank(re, im) != n) return false;
  }
  return true;
}

struct RiccatiSolution {
  Mat P;  // symmetric positive definite
  Mat K;  // -R^{-1} J' P
  double residual = 0.0;
};

inline double riccati_residual(const Mat& y, const Mat& j, const LqrWeights& w,
                               const Mat& p) {
  Mat rinv_jt_p = w.R.llt().solve(j.transpose() * p);
  return (y.transpose() * p + p * y + w.Q - p * j * rinv_jt_p).norm();
}

// ---------------------------------------------------------------------------
// Lyapunov
// ---------------------------------------------------------------------------

// Solves Ac' P + P Ac + Qc = 0 for symmetric P through the Kronecker system
// restricted to symmetric unknowns by the duplication matrix.
inline Mat solve_lyapunov(const Mat& ac, const Mat& qc) {
  if (ac.rows() != ac.cols()) throw DimensionError("solve_lyapunov: Ac must be square");
  if (qc.rows() != ac.rows() || qc.cols() != ac.cols())
    throw DimensionError("solve_lyapunov: Qc dimension mismatch");
  if ((qc - qc.transpose()).norm() > 1e-10 * std::max(1.0, qc.norm()))
    throw NotSymmetricError("solve_lyapunov: Qc is not symmetric");
  if (!is_hurwitz(ac))
    throw NotHurwitzError("solve_lyapunov: Ac is not Hurwitz");
  const Index n = ac.rows();
  const Mat id = Mat::Identity(n, n);
  Mat op = (kron(id, ac.transpose()) + kron(ac.transpose(), id)) *
           duplication_matrix(n);
  LstsqResult sol;
  try {
    sol = lstsq(op, Vec(-vec(symmetrize(qc))));
  } catch (const RankDeficientError&) {
    throw SingularMatrixError("solve_lyapunov: Lyapunov operator is singular");
  }
  return symmetrize(unvecs(sol.x));
}

// ---------------------------------------------------------------------------
// Kleinman policy iteration
// ---------------------------------------------------------------------------

struct KleinmanResult {
  RiccatiSolution sol;
  std::vector<Mat> P_trace;  // per-iteration P_k
  std::vector<Mat> K_trace;  // gain used at iteration k
  long iterations = 0;
};

inline KleinmanResult kleinman_pi(const Mat& y, const Mat& j,
                                  const LqrWeights& w, const Mat& k0,
                                  double tol = 1e-11, long max_iter = 200) {
  const Index dim = y.rows(), m = j.cols();
  if (j.rows() != dim) throw DimensionError("kleinman_pi: J row mismatch");
  if (k0.rows() != m || k0.cols() != dim)
    throw DimensionError("kleinman_pi: K0 must be m x dim");
  w.validate(dim, m);
  if (!is_hurwitz(y + j * k0))
    throw NotHurwitzError("kleinman_pi: K0 is not stabilizing");

  KleinmanResult out;
  Mat k = k0;
  Mat p_prev;
  auto r_llt = w.R.llt();
  for (long it = 0; it < max_iter; ++it) {
    Mat p = solve_lyapunov(y + j * k, Mat(w.Q + k.transpose() * w.R * k));
    out.P_trace.push_back(p);
    out.K_trace.push_back(k);
    k = -r_llt.solve(j.transpose() * p);
    out.iterations = it + 1;
    if (it > 0 && (p - p_prev).norm() <= tol) {
      out.sol.P = p;
      out.sol.K = k;
      out.sol.residual = riccati_residual(y, j, w, p);
      return out;
    }
    p_prev = p;
  }
  throw IterationCapError("kleinman_pi: no convergence within iteration cap");
}

// ---------------------------------------------------------------------------
// Model-based value iteration
// ---------------------------------------------------------------------------

struct ViOptions {
  double eps_c = 1.0;      // step size eps_k = eps_c / (k + 1)
  double b0_scale = 10.0;  // bounded-set radius b0 = b0_scale * |P0|_F
  double eps_conv = 1e-6;  // threshold on |Ptilde - P| / eps_k
  long max_iter = 1000000;
  int reset_cap = 30;
  bool record_trace = true;
};

struct ViIterRow {
  long k = 0;
  int q = 0;
  double eps_k = 0.0;
  double stat = 0.0;         // |Ptilde - P| / eps_k
  double update_norm = 0.0;  // |Ptilde - P|
  double p_err = -1.0;       // |P - P_ref|_F when a reference is given
};

struct ViResult {
  RiccatiSolution sol;
  std::vector<ViIterRow> trace;
  long iterations = 0;
  int resets = 0;
};

namespace detail {

// Membership in B_q = {P psd : |P|_F <= radius}. The iterate must stay in
// the PSD cone, so a negative eigenvalue beyond roundoff also exits the set.
inline bool in_bounded_set(const Mat& p, double radius) {
  if (!all_finite(p)) return false;
  const double norm = p.norm();
  if (norm > radius) return false;
  return min_eigenvalue_sym(p) >= -1e-10 * std::max(1.0, norm);
}

}  // namespace detail

// Algorithm: P_{k+1} = P_k + eps_k * riccati(P_k), with a reset to P0
// whenever the candidate leaves the current bounded set, and the
// convergence test |Ptilde - P_k| / eps_k < eps_conv.
inline ViResult model_based_vi(const Mat& y, const Mat& j, const LqrWeights& w,
                               const Mat& p0, const ViOptions& opt = {},
                               const Mat* p_ref = nullptr) {
  const Index dim = y.rows(), m = j.cols();
  if (j.rows() != dim) throw DimensionError("model_based_vi: J row mismatch");
  if (p0.rows() != dim || p0.cols() != dim)
    throw DimensionError("model_based_vi: P0 dimension mismatch");
  w.validate(dim, m);
  if ((p0 - p0.transpose()).norm() > 1e-10 * std::max(1.0, p0.norm()))
    throw NotSymmetricError("model_based_vi: P0 is not symmetric");
  if (min_eigenvalue_sym(p0) <= 0.0)
    throw Error("model_based_vi: P0 must be positive definite");

  const Mat j_rinv_jt = j * w.R.llt().solve(j.transpose());
  const double b0 = opt.b0_scale * p0.norm();

  ViResult out;
  Mat p = p0;
  int q = 0;
  for (long k = 0; k < opt.max_iter; ++k) {
    const double eps_k = opt.eps_c / static_cast<double>(k + 1);
    Mat ricc = y.transpose() * p + p * y - p * j_rinv_jt * p + w.Q;
    Mat p_tilde = p + eps_k * ricc;
    const double update = eps_k * ricc.norm();
    const double stat = ricc.norm();

    if (opt.record_trace) {
      ViIterRow row{k, q, eps_k, stat, update, -1.0};
      if (p_ref) row.p_err = (p - *p_ref).norm();
      out.trace.push_back(row);
    }
    out.iterations = k + 1;

    if (!detail::in_bounded_set(p_tilde, b0 * std::pow(2.0, q))) {
      p = p0;
      ++q;
      if (q > opt.reset_cap)
        throw IterationCapError(
            "model_based_vi: reset cap exceeded; adjust eps_c or b0_scale");
    } else if (stat < opt.eps_conv) {
      out.sol.P = symmetrize(p);
      out.sol.K = -w.R.llt().solve(j.transpose() * out.sol.P);
      out.sol.residual = riccati_residual(y, j, w, out.sol.P);
      out.resets = q;
      return out;
    } else {
      p = p_tilde;
    }
  }
  throw IterationCapError("model_based_vi: iteration cap reached before convergence");
}

// Riccati solve with no user-provided stabilizing gain: VI bootstraps one
// (it needs none), Kleinman refines it to full accuracy. The bootstrap
// ladders over step-size constants because the 1/(k+1) schedule's tail rate
// depends on the closed-loop spectrum, which is unknown up front.
inline RiccatiSolution solve_riccati(const Mat& y, const Mat& j,
                                     const LqrWeights& w,
                                     const ViOptions& boot_opt = {}) {
  ViOptions opt = boot_opt;
  opt.record_trace = false;
  opt.eps_conv = std::max(boot_opt.eps_conv, 1e-4);
  opt.reset_cap = std::max(boot_opt.reset_cap, 60);
  opt.max_iter = std::min(boot_opt.max_iter, 1000000L);
  for (double scale : {8.0, 1.0, 32.0, 128.0}) {
    opt.eps_c = boot_opt.eps_c * scale;
    try {
      ViResult vi =
          model_based_vi(y, j, w, Mat::Identity(y.rows(), y.rows()), opt);
      return kleinman_pi(y, j, w, vi.sol.K).sol;
    } catch (const IterationCapError&) {
      continue;
    } catch (const NotHurwitzError&) {
      continue;
    }
  }
  throw NotHurwitzError("solve_riccati: bootstrap failed to stabilize");
}

// ---------------------------------------------------------------------------
// Regulator equations
// ---------------------------------------------------------------------------

struct RegulatorSolution {
  Mat X;  // n x q
  Mat Z;  // n_z x q
  Mat U;  // m x q
  double res_state = 0.0;       // XS - AX - BU - E
  double res_compensator = 0.0; // ZS - G1 Z - G2 (CX + DU + F)
  double res_error = 0.0;       // CX + DU + F (implied, reported only)
};

// Solves the coupled Sylvester system W S = (Y + JK) W + EG for W = [X; Z]
// via its Kronecker form, then reads off U = Kx X + Kz Z. Unique because
// the closed-loop spectrum is disjoint from sigma(S).
inline RegulatorSolution solve_regulator_equations(const Plant& plant,
                                                   const Mat& s,
                                                   const InternalModel& im,
                                                   const Mat& k) {
  auto aug = build_augmented(plant, im);
  const Index dim = aug.dim(), q = plant.q(), n = plant.n(), nz = aug.n_z;
  if (s.rows() != q || s.cols() != q)
    throw DimensionError("solve_regulator_equations: S must be q x q");
  if (k.rows() != plant.m() || k.cols() != dim)
    throw DimensionError("solve_regulator_equations: K must be m x (n + n_z)");
  const Mat acl = aug.Y + aug.J * k;
  if (!is_hurwitz(acl))
    throw NotHurwitzError("solve_regulator_equations: Y + JK is not Hurwitz");

  Mat op = kron(s.transpose(), Mat::Identity(dim, dim)) -
           kron(Mat::Identity(q, q), acl);
  Mat w_stack;
  try {
    w_stack = unvec(solve_linear(op, Vec(vec(aug.EG))), dim, q);
  } catch (const SingularMatrixError&) {
    throw SingularMatrixError(
        "solve_regulator_equations: closed loop shares an eigenvalue with S");
  }

  RegulatorSolution out;
  out.X = w_stack.topRows(n);
  out.Z = w_stack.bottomRows(nz);
  const Mat kx = k.leftCols(n), kz = k.rightCols(nz);
  out.U = kx * out.X + kz * out.Z;
  out.res_state =
      (out.X * s - plant.A * out.X - plant.B * out.U - plant.E).norm();
  out.res_compensator =
      (out.Z * s - im.G1 * out.Z -
       im.G2 * (plant.C * out.X + plant.D * out.U + plant.F))
          .norm();
  out.res_error = (plant.C * out.X + plant.D * out.U + plant.F).norm();
  return out;
}

}  // namespace regdata
