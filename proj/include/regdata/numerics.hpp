#pragma once

// Dense real linear-algebra kernel: the symmetric-matrix vectorization
// calculus (vecv / vecs / vec / Kronecker / duplication matrix) plus the
// QR- and Schur-based solvers every other header builds on.
//
// Conventions, used consistently everywhere:
//   vec(A)   stacks columns (column-major).
//   vecs(P)  walks the upper triangle row-major, diagonal unscaled,
//            strict-upper entries doubled.
//   vecv(b)  quadratic monomials b_i*b_j in the same (i<=j) order.
//   duplication_matrix(n) maps vecs to vec, so its off-diagonal rows
//   carry 1/2 to undo the factor-2 convention of vecs.
//
// All functions are pure; safe to call from multiple threads.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "regdata/errors.hpp"

namespace regdata {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

inline Index sym_size(Index n) { return n * (n + 1) / 2; }

// Position of (i,j), i <= j, in the row-major upper-triangle order.
inline Index sym_index(Index n, Index i, Index j) {
  return i * n - i * (i - 1) / 2 + (j - i);
}

inline bool all_finite(const Mat& a) { return a.allFinite(); }

inline Mat symmetrize(const Mat& p) { return 0.5 * (p + p.transpose()); }

// ---------------------------------------------------------------------------
// Vectorization calculus
// ---------------------------------------------------------------------------

inline Vec vecv(const Vec& b) {
  const Index n = b.size();
  if (n < 1) throw DimensionError("vecv: vector must be nonempty");
  Vec out(sym_size(n));
  Index k = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) out[k++] = b[i] * b[j];
  return out;
}

inline Vec vecs(const Mat& p, double sym_rel_tol = 1e-10) {
  if (p.rows() != p.cols()) throw DimensionError("vecs: matrix must be square");
  const double asym = (p - p.transpose()).norm();
  if (asym > sym_rel_tol * p.norm())
    throw NotSymmetricError("vecs: matrix is not symmetric within tolerance");
  const Index n = p.rows();
  Vec out(sym_size(n));
  Index k = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) out[k++] = (i == j) ? p(i, i) : 2.0 * p(i, j);
  return out;
}

inline Mat unvecs(const Vec& s) {
  const Index len = s.size();
  const Index n = static_cast<Index>(std::llround((std::sqrt(8.0 * static_cast<double>(len) + 1.0) - 1.0) / 2.0));
  if (n < 1 || sym_size(n) != len)
    throw DimensionError("unvecs: length is not a triangular number");
  Mat p(n, n);
  Index k = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) {
      if (i == j) {
        p(i, i) = s[k];
      } else {
        p(i, j) = 0.5 * s[k];
        p(j, i) = 0.5 * s[k];
      }
      ++k;
    }
  return p;
}

inline Vec vec(const Mat& a) {
  return Eigen::Map<const Vec>(a.data(), a.size());
}

inline Mat unvec(const Vec& v, Index rows, Index cols) {
  if (v.size() != rows * cols) throw DimensionError("unvec: size mismatch");
  return Eigen::Map<const Mat>(v.data(), rows, cols);
}

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// M_n with M_n * vecs(H) == vec(H) for every symmetric H. Entries are
// 0, 1 on the diagonal positions and 1/2 on the off-diagonal ones.
inline Mat duplication_matrix(Index n) {
  if (n < 1) throw DimensionError("duplication_matrix: n must be >= 1");
  Mat m = Mat::Zero(n * n, sym_size(n));
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const Index lo = std::min(i, j), hi = std::max(i, j);
      m(j * n + i, sym_index(n, lo, hi)) = (i == j) ? 1.0 : 0.5;
    }
  return m;
}

// ---------------------------------------------------------------------------
// Factorization-backed solvers
// ---------------------------------------------------------------------------

namespace detail {

inline double default_rank_tol(Index rows, Index cols) {
  return static_cast<double>(std::max(rows, cols)) *
         std::numeric_limits<double>::epsilon();
}

// Rank from a column-pivoted QR: count of |R_ii| above rel_tol * |R_11|.
inline Index qr_rank(const Eigen::ColPivHouseholderQR<Mat>& qr, double rel_tol) {
  const Mat& r = qr.matrixR();
  const Index k = std::min(r.rows(), r.cols());
  if (k == 0) return 0;
  const double lead = std::abs(r(0, 0));
  if (lead == 0.0) return 0;
  Index rank = 0;
  for (Index i = 0; i < k; ++i)
    if (std::abs(r(i, i)) > rel_tol * lead) ++rank;
  return rank;
}

}  // namespace detail

inline Index numerical_rank(const Mat& a, double rel_tol = -1.0) {
  if (a.size() == 0) return 0;
  if (rel_tol < 0.0) rel_tol = detail::default_rank_tol(a.rows(), a.cols());
  Eigen::ColPivHouseholderQR<Mat> qr(a);
  return detail::qr_rank(qr, rel_tol);
}

// Reusable column-pivoted QR least-squares solve; one factorization, many
// right-hand sides. Throws RankDeficientError unless the matrix has full
// column rank at the tolerance.
class LeastSquares {
 public:
  explicit LeastSquares(Mat a, double rank_rel_tol = -1.0)
      : a_(std::move(a)),
        qr_(a_),
        rank_rel_tol_(rank_rel_tol < 0.0
                          ? detail::default_rank_tol(a_.rows(), a_.cols())
                          : rank_rel_tol),
        rank_(detail::qr_rank(qr_, rank_rel_tol_)) {}

  Index rank() const { return rank_; }
  Index cols() const { return a_.cols(); }
  bool full_column_rank() const { return rank_ == a_.cols(); }

  Mat solve(const Mat& b) const {
    if (b.rows() != a_.rows())
      throw DimensionError("LeastSquares::solve: right-hand side row mismatch");
    if (!full_column_rank())
      throw RankDeficientError("least-squares matrix is rank deficient", rank_,
                               a_.cols());
    return qr_.solve(b);
  }

  double residual_norm(const Mat& b, const Mat& x) const {
    return (a_ * x - b).norm();
  }

 private:
  Mat a_;
  Eigen::ColPivHouseholderQR<Mat> qr_;
  double rank_rel_tol_;
  Index rank_;
};

struct LstsqResult {
  Mat x;
  double residual;
};

inline LstsqResult lstsq(const Mat& a, const Mat& b, double rank_rel_tol = -1.0) {
  LeastSquares ls(a, rank_rel_tol);
  Mat x = ls.solve(b);
  return {x, ls.residual_norm(b, x)};
}

inline Mat solve_linear(const Mat& a, const Mat& b, double rank_rel_tol = -1.0) {
  if (a.rows() != a.cols()) throw DimensionError("solve_linear: matrix must be square");
  if (b.rows() != a.rows()) throw DimensionError("solve_linear: right-hand side row mismatch");
  if (rank_rel_tol < 0.0) rank_rel_tol = detail::default_rank_tol(a.rows(), a.cols());
  Eigen::ColPivHouseholderQR<Mat> qr(a);
  if (detail::qr_rank(qr, rank_rel_tol) < a.cols())
    throw SingularMatrixError("solve_linear: matrix is singular at the rank tolerance");
  return qr.solve(b);
}

// All eigenvalues via Hessenberg reduction + shifted QR (real Schur form),
// complex ones in conjugate pairs, sorted by (real, imag).
inline std::vector<std::complex<double>> eigenvalues(const Mat& a,
                                                     long max_sweeps_per_row = 100) {
  if (a.rows() != a.cols()) throw DimensionError("eigenvalues: matrix must be square");
  const Index n = a.rows();
  std::vector<std::complex<double>> ev;
  if (n == 0) return ev;
  Eigen::RealSchur<Mat> schur(n);
  schur.setMaxIterations(static_cast<Index>(max_sweeps_per_row) * n);
  schur.compute(a, /*computeU=*/false);
  if (schur.info() != Eigen::Success)
    throw IterationCapError("eigenvalues: QR iteration did not converge");
  const Mat& t = schur.matrixT();
  ev.reserve(n);
  Index i = 0;
  while (i < n) {
    if (i + 1 < n && t(i + 1, i) != 0.0) {
      const double tr = t(i, i) + t(i + 1, i + 1);
      const double det = t(i, i) * t(i + 1, i + 1) - t(i, i + 1) * t(i + 1, i);
      const double disc = 0.25 * tr * tr - det;
      const double im = std::sqrt(std::max(0.0, -disc));
      ev.emplace_back(0.5 * tr, -im);
      ev.emplace_back(0.5 * tr, im);
      i += 2;
    } else {
      ev.emplace_back(t(i, i), 0.0);
      i += 1;
    }
  }
  std::sort(ev.begin(), ev.end(), [](const auto& x, const auto& y) {
    if (x.real() != y.real()) return x.real() < y.real();
    return x.imag() < y.imag();
  });
  return ev;
}

inline double spectral_abscissa(const Mat& a) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& ev : eigenvalues(a)) worst = std::max(worst, ev.real());
  return worst;
}

inline bool is_hurwitz(const Mat& a, double margin = 0.0) {
  return spectral_abscissa(a) < -margin;
}

inline double min_eigenvalue_sym(const Mat& p) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(p), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// Symmetric PSD square root, negative ripple clamped to zero.
inline Mat sqrt_psd(const Mat& q) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(q));
  Vec lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace regdata
