#include "stabkit/system.hpp"

#include <gtest/gtest.h>

#include "oracle_helpers.hpp"
#include "test_support.hpp"

using namespace stabkit;
using testsupport::expect_matrix_near;
using testsupport::random_diagonalizable;
using testsupport::sorted_eigenvalues;

namespace {

ControlSystem nilpotent_shift_system() {
  Mat A(2, 2);
  A << 0, 1, 0, 0;
  Mat B(2, 1);
  B << 0, 1;
  return make_system(A, B, 0.0);
}

}  // namespace

TEST(OperatorCore, SemigroupNilpotentShiftMatchesHandValue) {
  // exp(t[[0,1],[0,0]]) = [[1,t],[0,1]], so S(1)(0,1)^T = (1,1)^T.
  ControlSystem sys = nilpotent_shift_system();
  Vec x(2);
  x << 0, 1;
  Vec y = semigroup_apply(sys, 1.0, x);
  EXPECT_NEAR(std::abs(y(0) - Cplx(1, 0)), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(y(1) - Cplx(1, 0)), 0.0, 1e-14);
}

TEST(OperatorCore, SemigroupMatchesTaylorOracle) {
  Rng rng(101);
  for (int rep = 0; rep < 8; ++rep) {
    const int n = 2 + static_cast<int>(rng.uniform(0, 5));
    Mat A = rng.complex_gaussian_matrix(n, n);
    const double t = rng.uniform(0.0, 2.0);
    Mat S = expm(Mat(t * A));
    Mat S_oracle = oracle::expm_taylor(Mat(t * A));
    expect_matrix_near(S, S_oracle, 1e-11 * std::max(1.0, opnorm(S_oracle)),
                       "semigroup vs Taylor oracle");
  }
}

TEST(OperatorCore, SemigroupLaw) {
  Rng rng(102);
  for (int rep = 0; rep < 12; ++rep) {
    const int n = 2 + static_cast<int>(rng.uniform(0, 15));
    Mat A = rng.complex_gaussian_matrix(n, n);
    Mat B = rng.complex_gaussian_matrix(n, 1);
    ControlSystem sys = make_system(A, B, 0.0);
    const double t = rng.uniform(0.0, 1.5);
    const double s = rng.uniform(0.0, 1.5);
    Mat lhs = semigroup(sys, t) * semigroup(sys, s);
    Mat rhs = semigroup(sys, t + s);
    EXPECT_LE(opnorm(lhs - rhs), 1e-10 * std::max(1.0, opnorm(rhs)));
  }
}

TEST(OperatorCore, SemigroupAtZeroIsIdentity) {
  ControlSystem sys = nilpotent_shift_system();
  expect_matrix_near(semigroup(sys, 0.0), Mat::Identity(2, 2), 1e-15);
}

TEST(OperatorCore, FractionalPowerScalarGauge) {
  // A = diag(-3), rho0 = 1: R = 4, R^{1/2} = 2, R^{-1} x = x/4.
  Mat A(1, 1), B(1, 1);
  A << -3.0;
  B << 1.0;
  ControlSystem sys = make_system(A, B, 0.0, 1.0);
  Mat half = fractional_power(sys, 0.5);
  EXPECT_NEAR(std::abs(half(0, 0) - Cplx(2, 0)), 0.0, 1e-14);
  Vec x(1);
  x << 8.0;
  EXPECT_NEAR(graded_norm(sys, x, -1.0), 2.0, 1e-13);
  EXPECT_NEAR(graded_norm(sys, x, 0.0), 8.0, 1e-15);
}

TEST(OperatorCore, FractionalPowerIdentityAndUnit) {
  Rng rng(103);
  Mat A = random_diagonalizable(rng, 5, -2.0, 0.5);
  ControlSystem sys = make_system(A, rng.complex_gaussian_matrix(5, 2), 0.3);
  expect_matrix_near(fractional_power(sys, 0.0), Mat::Identity(5, 5), 1e-14);
  expect_matrix_near(fractional_power(sys, 1.0), gauge_operator(sys), 1e-12);
}

TEST(OperatorCore, FractionalPowersCompose) {
  Rng rng(104);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 2 + static_cast<int>(rng.uniform(0, 6));
    Mat A = random_diagonalizable(rng, n, -3.0, 1.0);
    ControlSystem sys = make_system(A, rng.complex_gaussian_matrix(n, 1), 0.0);
    const double a = rng.uniform(-1.0, 1.0);
    const double b = rng.uniform(-1.0, 1.0);
    Mat lhs = fractional_power(sys, a) * fractional_power(sys, b);
    Mat rhs = fractional_power(sys, a + b);
    const double scale =
        std::max({1.0, opnorm(lhs), opnorm(rhs)});
    EXPECT_LE(opnorm(lhs - rhs), 1e-8 * scale);
  }
}

TEST(OperatorCore, FractionalPowerJordanBlock) {
  // R = [[2,-1],[0,2]] (from A = [[1,1],[0,1]], rho0 = 3) is defective; for
  // upper-triangular [[l,c],[0,l]] the square root is
  // [[sqrt(l), c/(2 sqrt(l))],[0, sqrt(l)]].
  Mat A(2, 2);
  A << 1, 1, 0, 1;
  Mat B(2, 1);
  B << 1, 0;
  ControlSystem sys = make_system(A, B, 0.0, 3.0);
  Mat root = fractional_power(sys, 0.5);
  Mat expected(2, 2);
  const double s2 = std::sqrt(2.0);
  expected << s2, -1.0 / (2.0 * s2), 0, s2;
  expect_matrix_near(root, expected, 1e-10, "Jordan block square root");
  expect_matrix_near(root * root, gauge_operator(sys), 1e-10);
}

TEST(OperatorCore, FractionalPowerBranchCutRejected) {
  Mat R(2, 2);
  R << -1.0, 0.0, 0.0, 2.0;
  EXPECT_THROW(fractional_matrix_power(R, 0.5), SingularGauge);
  Mat Z = Mat::Zero(2, 2);
  EXPECT_THROW(fractional_matrix_power(Z, 0.5), SingularGauge);
}

TEST(OperatorCore, MakeSystemValidatesInputs) {
  Mat A(2, 2);
  A << 1, 0, 0, -1;
  Mat B(2, 1);
  B << 1, 1;
  EXPECT_THROW(make_system(Mat(2, 3), B, 0.0), InvalidArgument);
  EXPECT_THROW(make_system(A, Mat(3, 1), 0.0), InvalidArgument);
  EXPECT_THROW(make_system(A, B, 1.0), InvalidArgument);
  EXPECT_THROW(make_system(A, B, -0.1), InvalidArgument);
  // rho0 at or below the spectral abscissa is a gauge violation.
  EXPECT_THROW(make_system(A, B, 0.0, 1.0), InvalidArgument);
  EXPECT_THROW(make_system(A, B, 0.0, 0.5), InvalidArgument);
  ControlSystem sys = make_system(A, B, 0.0);
  EXPECT_DOUBLE_EQ(sys.rho0, 2.0);  // default gauge: abscissa + 1
}

TEST(OperatorCore, SpectralAbscissaMatchesCharPolyOracle) {
  Rng rng(105);
  for (int rep = 0; rep < 6; ++rep) {
    Mat A = rng.real_uniform_matrix(8, 8, -2.0, 2.0);
    const double absc = spectral_abscissa(A);
    auto roots = oracle::poly_roots(oracle::char_poly(A));
    double oracle_absc = -1e300;
    for (auto z : roots) oracle_absc = std::max(oracle_absc, z.real());
    EXPECT_NEAR(absc, oracle_absc, 1e-8 * std::max(1.0, std::abs(oracle_absc)));
  }
}

TEST(OperatorCore, SpectralAbscissaTriangular) {
  Mat A(3, 3);
  A << -4, 5, 6, 0, -0.5, 7, 0, 0, -9;
  EXPECT_NEAR(spectral_abscissa(A), -0.5, 1e-12);
}

TEST(OperatorCore, ShiftPreservesSpectrumAndFixesLowGamma) {
  Mat A(2, 2);
  A << -1, 1, 0, -2;
  Mat B(2, 1);
  B << 0, 1;

  ControlSystem raw = make_system(A, B, 0.3);
  ShiftedSystem id = shift_state_space(raw);
  expect_matrix_near(id.A_shift, A, 0.0, "gamma<1/2 shift is the identity");
  expect_matrix_near(id.Bstar_shift, B.adjoint(), 0.0);

  ControlSystem graded = make_system(A, B, 0.6);
  ShiftedSystem sh = shift_state_space(graded);
  auto ev = sorted_eigenvalues(sh.A_shift);
  EXPECT_NEAR(std::abs(ev[0] - Cplx(-2, 0)), 0.0, 1e-9);
  EXPECT_NEAR(std::abs(ev[1] - Cplx(-1, 0)), 0.0, 1e-9);
  // R commutes with A, so the similarity leaves A numerically unchanged.
  expect_matrix_near(sh.A_shift, A, 1e-9, "shift similarity");
}

TEST(OperatorCore, ShiftedControlAdjointDiagonalGauge) {
  // Self-adjoint diagonal A: Bstar_shift collapses to B^H R^{-1}.
  Mat A(2, 2);
  A << -1, 0, 0, -2;
  Mat B(2, 1);
  B << 1, 2;
  ControlSystem sys = make_system(A, B, 0.75, 1.0);  // R = diag(2, 3)
  ShiftedSystem sh = shift_state_space(sys);
  Mat expected(1, 2);
  expected << 0.5, 2.0 / 3.0;
  expect_matrix_near(sh.Bstar_shift, expected, 1e-12);
  expect_matrix_near(sh.B_shift, expected.adjoint(), 1e-12);
}

TEST(OperatorCore, AdjointPair) {
  Rng rng(106);
  Mat A = rng.complex_gaussian_matrix(4, 4);
  Mat B = rng.complex_gaussian_matrix(4, 2);
  ControlSystem sys = make_system(A, B, 0.2);
  AdjointPair ap = adjoint(sys);
  expect_matrix_near(ap.Astar, A.adjoint(), 0.0);
  expect_matrix_near(ap.Bstar, B.adjoint(), 0.0);
}

TEST(OperatorCore, GradedNormConsistency) {
  Rng rng(107);
  Mat A = random_diagonalizable(rng, 6, -4.0, -0.5);
  ControlSystem sys = make_system(A, rng.complex_gaussian_matrix(6, 2), 0.4);
  Vec x = rng.unit_vector(6);
  EXPECT_NEAR(graded_norm(sys, x, 0.0), x.norm(), 1e-14);
  for (double g : {-0.75, -0.5, 0.5, 1.0}) {
    const double direct = (fractional_power(sys, g) * x).norm();
    EXPECT_NEAR(graded_norm(sys, x, g), direct, 1e-12 * std::max(1.0, direct));
    GradedVector gv{x, g};
    EXPECT_NEAR(graded_norm(sys, gv), direct, 1e-12 * std::max(1.0, direct));
  }
}
