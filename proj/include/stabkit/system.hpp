#pragma once

#include <optional>
#include <vector>

#include "numeric.hpp"

namespace stabkit {

// ---------------------------------------------------------------------------
// A finite-dimensional control pair x' = A x + B u together with its grading
// gauge.  gamma in [0, 1) declares how far below the base space the control
// operator acts; rho0 > spectral abscissa of A fixes the gauge operator
// R = rho0*I - A used for all fractional-power scales.
// ---------------------------------------------------------------------------

struct ControlSystem {
  Mat A;  // n x n
  Mat B;  // n x m
  double gamma = 0.0;
  double rho0 = 0.0;
  std::vector<double> labels;  // optional per-coordinate metadata

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
};

inline double spectral_abscissa(const Mat& A) {
  if (A.rows() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::ComplexEigenSolver<Mat> es(A, /*computeEigenvectors=*/false);
  return es.eigenvalues().real().maxCoeff();
}

inline ControlSystem make_system(Mat A, Mat B, double gamma,
                                 std::optional<double> rho0 = std::nullopt) {
  if (A.rows() != A.cols()) throw InvalidArgument("make_system: A not square");
  if (A.rows() < 1) throw InvalidArgument("make_system: empty state space");
  if (B.rows() != A.rows())
    throw InvalidArgument("make_system: B row count != state dimension");
  if (B.cols() < 1) throw InvalidArgument("make_system: empty control space");
  if (!A.allFinite() || !B.allFinite())
    throw InvalidArgument("make_system: non-finite entries");
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw InvalidArgument("make_system: gamma must lie in [0, 1)");
  const double absc = spectral_abscissa(A);
  ControlSystem sys;
  sys.A = std::move(A);
  sys.B = std::move(B);
  sys.gamma = gamma;
  sys.rho0 = rho0.value_or(absc + 1.0);
  if (!(sys.rho0 > absc))
    throw InvalidArgument("make_system: rho0 must exceed the spectral abscissa");
  return sys;
}

// ---------------------------------------------------------------------------
// Semigroup action S(t) = exp(tA).
// ---------------------------------------------------------------------------

inline Mat semigroup(const ControlSystem& sys, double t) {
  return expm(Mat(t * sys.A));
}

inline Vec semigroup_apply(const ControlSystem& sys, double t, const Vec& x) {
  if (x.size() != sys.n())
    throw InvalidArgument("semigroup_apply: state dimension mismatch");
  return semigroup(sys, t) * x;
}

// ---------------------------------------------------------------------------
// Principal-branch fractional power of the gauge operator:
//   fractional_power(sys, beta) = (rho0*I - A)^beta.
// Diagonalizable matrices go through the eigendecomposition; otherwise the
// principal branch is taken on a Schur form via exp(beta * log R).
// ---------------------------------------------------------------------------

inline Mat fractional_matrix_power(const Mat& R, double beta) {
  const int n = static_cast<int>(R.rows());
  if (beta == 0.0) return Mat::Identity(n, n);
  const double scale = std::max(1.0, opnorm(R));
  Eigen::ComplexEigenSolver<Mat> es(R, /*computeEigenvectors=*/true);
  for (int i = 0; i < n; ++i) {
    const Cplx z = es.eigenvalues()(i);
    if (z.real() <= 1e-12 * scale && std::abs(z.imag()) <= 1e-12 * scale)
      throw SingularGauge(
          "fractional power: eigenvalue on the closed negative real axis");
  }
  if (beta == 1.0) return R;
  const Mat& V = es.eigenvectors();
  Eigen::JacobiSVD<Mat> svd(V);
  const double cond = svd.singularValues()(0) /
                      std::max(svd.singularValues()(n - 1), 1e-300);
  if (cond < 1e8) {
    Vec d(n);
    for (int i = 0; i < n; ++i) d(i) = std::pow(es.eigenvalues()(i), beta);
    Mat Vinv = V.partialPivLu().inverse();
    Mat recon = V * es.eigenvalues().asDiagonal() * Vinv;
    if (opnorm(recon - R) <= 1e-9 * scale * cond)
      return V * d.asDiagonal() * Vinv;
  }
  // Defective or badly conditioned eigenbasis: principal branch through the
  // matrix logarithm (computed on a Schur form internally).
  return Mat(Mat(beta * R.log()).exp());
}

inline Mat gauge_operator(const ControlSystem& sys) {
  return Mat(sys.rho0 * Mat::Identity(sys.n(), sys.n()) - sys.A);
}

inline Mat fractional_power(const ControlSystem& sys, double beta) {
  return fractional_matrix_power(gauge_operator(sys), beta);
}

// ---------------------------------------------------------------------------
// Graded norms: ||x||_grade = ||(rho0*I - A)^grade x||_2.  Positive grades
// measure smoothness, negative grades the extrapolated (dual) scale.
// ---------------------------------------------------------------------------

struct GradedVector {
  Vec coords;
  double grade = 0.0;
};

inline double graded_norm(const ControlSystem& sys, const Vec& x,
                          double grade) {
  if (x.size() != sys.n())
    throw InvalidArgument("graded_norm: dimension mismatch");
  if (grade == 0.0) return x.norm();
  return (fractional_power(sys, grade) * x).norm();
}

inline double graded_norm(const ControlSystem& sys, const GradedVector& gv) {
  return graded_norm(sys, gv.coords, gv.grade);
}

// ---------------------------------------------------------------------------
// Adjoint pair (A*, B*) and the state-space shift for gamma in [1/2, 1).
//
// With R = rho0*I - A, the shifted realization is
//   A_shift     = R^{1/2} A R^{-1/2}
//   Bstar_shift = B^H (R^H)^{-1/2} R^{-1/2}
// and for gamma in [0, 1/2) the shift is the identity.  The shift preserves
// the spectrum; its content is the re-weighted control adjoint.
// ---------------------------------------------------------------------------

struct AdjointPair {
  Mat Astar;  // n x n
  Mat Bstar;  // m x n
};

inline AdjointPair adjoint(const ControlSystem& sys) {
  return AdjointPair{sys.A.adjoint(), sys.B.adjoint()};
}

struct ShiftedSystem {
  Mat A_shift;      // n x n
  Mat Bstar_shift;  // m x n
  Mat B_shift;      // n x m, adjoint of Bstar_shift
  double rho0 = 0.0;
  double gamma = 0.0;
};

inline ShiftedSystem shift_state_space(const ControlSystem& sys) {
  ShiftedSystem out;
  out.rho0 = sys.rho0;
  out.gamma = sys.gamma;
  if (sys.gamma < 0.5) {
    out.A_shift = sys.A;
    out.Bstar_shift = sys.B.adjoint();
    out.B_shift = sys.B;
    return out;
  }
  const Mat Rh = fractional_power(sys, 0.5);
  const Mat Rmh = fractional_power(sys, -0.5);
  out.A_shift = Rh * sys.A * Rmh;
  out.Bstar_shift = sys.B.adjoint() * Rmh.adjoint() * Rmh;
  out.B_shift = out.Bstar_shift.adjoint();
  return out;
}

}  // namespace stabkit
