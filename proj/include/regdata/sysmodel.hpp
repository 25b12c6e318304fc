#pragma once

// Plant / exosystem descriptions, the p-copy internal model built from the
// minimal polynomial of S, the augmented system (Y, J), and the three
// solvability assumptions (stabilizability, exosystem spectrum, and the
// transmission-zero rank test).

#include <complex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "regdata/numerics.hpp"

namespace regdata {

// x' = Ax + Bu + Ev, y = Cx + Du, e = y + Fv.
struct Plant {
  Mat A, B, C, D, E, F;

  Index n() const { return A.rows(); }
  Index m() const { return B.cols(); }
  Index p() const { return C.rows(); }
  Index q() const { return E.cols(); }

  void validate() const {
    if (A.rows() != A.cols()) throw DimensionError("plant: A must be square");
    if (B.rows() != n()) throw DimensionError("plant: B row count != n");
    if (C.cols() != n()) throw DimensionError("plant: C column count != n");
    if (D.rows() != p() || D.cols() != m())
      throw DimensionError("plant: D must be p x m");
    if (E.rows() != n()) throw DimensionError("plant: E row count != n");
    if (F.rows() != p() || F.cols() != q())
      throw DimensionError("plant: F must be p x q");
    if (n() < 1 || m() < 1 || p() < 1 || q() < 1)
      throw DimensionError("plant: all dimensions must be positive");
    for (const Mat* mat : {&A, &B, &C, &D, &E, &F})
      if (!all_finite(*mat)) throw DimensionError("plant: non-finite entry");
  }
};

// v' = S v from v(0) = v0.
struct Exosystem {
  Mat S;
  Vec v0;

  Index q() const { return S.rows(); }

  void validate() const {
    if (S.rows() != S.cols()) throw DimensionError("exosystem: S must be square");
    if (v0.size() != S.rows())
      throw DimensionError("exosystem: v0 length != dimension of S");
    if (!all_finite(S) || !all_finite(Mat(v0)))
      throw DimensionError("exosystem: non-finite entry");
  }
};

// Minimum p-copy internal model: G1 = blockdiag(beta, ..., beta),
// G2 = blockdiag(sigma, ..., sigma), with char(beta) = minimal polynomial
// of S and (beta, sigma) controllable.
struct InternalModel {
  Mat G1;       // n_z x n_z
  Mat G2;       // n_z x p
  Mat beta;     // d x d companion block
  Vec sigma;    // d
  Index copies; // p

  Index degree() const { return beta.rows(); }
  Index n_z() const { return G1.rows(); }
};

// Compact form of the plant + compensator stack.
struct AugmentedSystem {
  Mat Y;   // [[A, 0], [G2 C, G1]]
  Mat J;   // [B; G2 D]
  Mat EG;  // [E; G2 F]
  Mat E0;  // [E; 0]
  Index n, n_z;

  Index dim() const { return n + n_z; }
};

// ---------------------------------------------------------------------------
// Polynomials
// ---------------------------------------------------------------------------

// Characteristic polynomial by the Faddeev-LeVerrier recursion.
// Coefficients ascending, monic.
inline std::vector<double> characteristic_polynomial(const Mat& a) {
  if (a.rows() != a.cols())
    throw DimensionError("characteristic_polynomial: matrix must be square");
  const Index n = a.rows();
  std::vector<double> c(static_cast<size_t>(n) + 1, 0.0);
  c[static_cast<size_t>(n)] = 1.0;
  Mat m = Mat::Zero(n, n);
  for (Index k = 1; k <= n; ++k) {
    m = a * m + c[static_cast<size_t>(n - k + 1)] * Mat::Identity(n, n);
    c[static_cast<size_t>(n - k)] = -(a * m).trace() / static_cast<double>(k);
  }
  for (double& v : c) v += 0.0;  // flush negative zeros
  return c;
}

// Horner evaluation of a polynomial (ascending coefficients) at a matrix.
inline Mat polyval_matrix(const std::vector<double>& coeffs, const Mat& s) {
  const Index n = s.rows();
  Mat acc = Mat::Zero(n, n);
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it)
    acc = acc * s + *it * Mat::Identity(n, n);
  return acc;
}

struct MinimalPolynomial {
  std::vector<double> coeffs;  // ascending, monic
  bool from_override = false;

  Index degree() const { return static_cast<Index>(coeffs.size()) - 1; }
};

// Returns the user override after validating p(S) ~= 0, or the
// characteristic polynomial otherwise. The override path is the only way to
// get a proper minimal polynomial when S has repeated blocks.
inline MinimalPolynomial minimal_polynomial(
    const Mat& s, const std::optional<std::vector<double>>& user_override = {}) {
  if (s.rows() != s.cols())
    throw DimensionError("minimal_polynomial: S must be square");
  if (user_override) {
    std::vector<double> c = *user_override;
    if (c.size() < 2)
      throw DimensionError("minimal_polynomial: override must have degree >= 1");
    const double lead = c.back();
    if (lead == 0.0)
      throw DimensionError("minimal_polynomial: override leading coefficient is zero");
    for (double& v : c) v /= lead;
    const Index deg = static_cast<Index>(c.size()) - 1;
    const double scale =
        std::pow(std::max(1.0, s.norm()), static_cast<double>(deg));
    if (polyval_matrix(c, s).norm() > 1e-8 * scale)
      throw Error("minimal_polynomial: override does not annihilate S");
    return {c, true};
  }
  return {characteristic_polynomial(s), false};
}

// ---------------------------------------------------------------------------
// Internal model and augmented system
// ---------------------------------------------------------------------------

inline Mat block_diag_copies(const Mat& block, Index copies) {
  Mat out = Mat::Zero(block.rows() * copies, block.cols() * copies);
  for (Index i = 0; i < copies; ++i)
    out.block(i * block.rows(), i * block.cols(), block.rows(), block.cols()) =
        block;
  return out;
}

inline InternalModel build_internal_model(const std::vector<double>& minpoly,
                                          Index p) {
  if (p < 1) throw DimensionError("build_internal_model: p must be >= 1");
  if (minpoly.size() < 2)
    throw DimensionError("build_internal_model: polynomial must have degree >= 1");
  std::vector<double> c = minpoly;
  const double lead = c.back();
  if (lead == 0.0)
    throw DimensionError("build_internal_model: leading coefficient is zero");
  for (double& v : c) v /= lead;
  const Index d = static_cast<Index>(c.size()) - 1;

  // Bottom-row companion form; sigma = e_d makes (beta, sigma) controllable.
  Mat beta = Mat::Zero(d, d);
  for (Index i = 0; i + 1 < d; ++i) beta(i, i + 1) = 1.0;
  for (Index j = 0; j < d; ++j) beta(d - 1, j) = -c[static_cast<size_t>(j)];
  Vec sigma = Vec::Zero(d);
  sigma[d - 1] = 1.0;

  Mat ctrb(d, d);
  Vec col = sigma;
  for (Index k = 0; k < d; ++k) {
    ctrb.col(k) = col;
    col = beta * col;
  }
  if (numerical_rank(ctrb) != d)
    throw Error("build_internal_model: (beta, sigma) controllability check failed");

  InternalModel im;
  im.beta = beta;
  im.sigma = sigma;
  im.copies = p;
  im.G1 = block_diag_copies(beta, p);
  im.G2 = block_diag_copies(Mat(sigma), p);
  return im;
}

inline AugmentedSystem build_augmented(const Plant& plant, const InternalModel& im) {
  plant.validate();
  if (im.copies != plant.p())
    throw DimensionError("build_augmented: internal model copies != plant outputs");
  const Index n = plant.n(), nz = im.n_z(), m = plant.m(), q = plant.q();

  AugmentedSystem aug;
  aug.n = n;
  aug.n_z = nz;
  aug.Y = Mat::Zero(n + nz, n + nz);
  aug.Y.topLeftCorner(n, n) = plant.A;
  aug.Y.bottomLeftCorner(nz, n) = im.G2 * plant.C;
  aug.Y.bottomRightCorner(nz, nz) = im.G1;

  aug.J = Mat::Zero(n + nz, m);
  aug.J.topRows(n) = plant.B;
  aug.J.bottomRows(nz) = im.G2 * plant.D;

  aug.EG = Mat::Zero(n + nz, q);
  aug.EG.topRows(n) = plant.E;
  aug.EG.bottomRows(nz) = im.G2 * plant.F;

  aug.E0 = Mat::Zero(n + nz, q);
  aug.E0.topRows(n) = plant.E;
  return aug;
}

// ---------------------------------------------------------------------------
// Assumption checks
// ---------------------------------------------------------------------------

// Rank of the complex matrix Re + i*Im through its real embedding
// [[Re, -Im], [Im, Re]], whose real rank is twice the complex rank.
inline Index complex_rank(const Mat& re, const Mat& im, double rel_tol = -1.0) {
  if (re.rows() != im.rows() || re.cols() != im.cols())
    throw DimensionError("complex_rank: real/imaginary shape mismatch");
  Mat embed(2 * re.rows(), 2 * re.cols());
  embed << re, -im, im, re;
  return numerical_rank(embed, rel_tol) / 2;
}

struct AssumptionReport {
  bool a1 = false;  // (A, B) stabilizable
  bool a2 = false;  // S has no eigenvalue with negative real part
  bool a3 = false;  // transmission pencil has rank n + p at every eigenvalue of S
  std::vector<std::complex<double>> plant_spectrum;
  std::vector<std::complex<double>> exo_spectrum;
  std::string details;

  bool all() const { return a1 && a2 && a3; }
};

inline AssumptionReport check_assumptions(const Plant& plant, const Exosystem& exo) {
  plant.validate();
  exo.validate();
  if (exo.q() != plant.q())
    throw DimensionError("check_assumptions: exosystem dimension != plant q");
  const Index n = plant.n(), m = plant.m(), p = plant.p();
  constexpr double kRealPartTol = 1e-9;

  AssumptionReport rep;
  rep.plant_spectrum = eigenvalues(plant.A);
  rep.exo_spectrum = eigenvalues(exo.S);
  std::ostringstream details;

  // A1: Hautus test at every closed-right-half-plane eigenvalue of A.
  rep.a1 = true;
  for (const auto& lam : rep.plant_spectrum) {
    if (lam.real() < -kRealPartTol) continue;
    Mat re(n, n + m), im(n, n + m);
    re << plant.A - lam.real() * Mat::Identity(n, n), plant.B;
    im << -lam.imag() * Mat::Identity(n, n), Mat::Zero(n, m);
    const Index rank = complex_rank(re, im);
    if (rank != n) rep.a1 = false;
    details << "A1: eig(A) " << lam.real() << (lam.imag() < 0 ? "-" : "+")
            << std::abs(lam.imag()) << "i rank " << rank << "/" << n << "\n";
  }

  // A2: exosystem spectrum in the closed right half plane.
  rep.a2 = true;
  for (const auto& lam : rep.exo_spectrum)
    if (lam.real() < -kRealPartTol) rep.a2 = false;

  // A3: rank [[A - lambda I, B], [C, D]] == n + p at every eigenvalue of S.
  rep.a3 = true;
  for (const auto& lam : rep.exo_spectrum) {
    Mat re(n + p, n + m), im(n + p, n + m);
    re << plant.A - lam.real() * Mat::Identity(n, n), plant.B, plant.C, plant.D;
    im.setZero();
    im.topLeftCorner(n, n) = -lam.imag() * Mat::Identity(n, n);
    const Index rank = complex_rank(re, im);
    if (rank != n + p) rep.a3 = false;
    details << "A3: eig(S) " << lam.real() << (lam.imag() < 0 ? "-" : "+")
            << std::abs(lam.imag()) << "i rank " << rank << "/" << (n + p)
            << "\n";
  }

  rep.details = details.str();
  return rep;
}

}  // namespace regdata
