#include "stabkit/models.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "stabkit/hautus.hpp"
#include "stabkit/pipeline.hpp"
#include "test_support.hpp"

namespace {

using namespace stabkit;
using testsupport::expect_matrix_near;

Mat scalar_mat(Cplx z) {
  Mat m(1, 1);
  m(0, 0) = z;
  return m;
}

TEST(DirichletMap, ZeroBoundaryAndLinearity) {
  const Vec zero = dirichlet_map_1d(0.0, 9);
  EXPECT_EQ(zero.size(), 9);
  EXPECT_LE(zero.cwiseAbs().maxCoeff(), 0.0);

  const Cplx u(0.7, -1.3);
  const Vec one = dirichlet_map_1d(1.0, 9);
  const Vec scaled = dirichlet_map_1d(u, 9);
  expect_matrix_near(scaled, u * one, 1e-15, "linearity");
  EXPECT_THROW(dirichlet_map_1d(1.0, 0), InvalidArgument);
}

TEST(DirichletMap, MatchesQuadratureOracle) {
  const Vec c = dirichlet_map_1d(1.0, 10);
  const double scale = std::sqrt(2.0 / kPi);
  for (int k = 1; k <= 10; ++k) {
    const Mat integral = integrate_checked(
        [&](double x) {
          return scalar_mat((1.0 - x / kPi) * scale * std::sin(k * x));
        },
        0.0, kPi, 8 + 2 * k, 1e-11);
    EXPECT_NEAR(c(k - 1).real(), integral(0, 0).real(), 1e-10) << "k=" << k;
    EXPECT_NEAR(c(k - 1).imag(), 0.0, 1e-15);
  }
}

TEST(DirichletMap, ReconstructsHarmonicLift) {
  const int N = 400;
  const Vec c = dirichlet_map_1d(1.0, N);
  const double scale = std::sqrt(2.0 / kPi);
  for (double x : {kPi / 4.0, kPi / 2.0, 3.0 * kPi / 4.0}) {
    double value = 0.0;
    for (int k = 1; k <= N; ++k)
      value += c(k - 1).real() * scale * std::sin(k * x);
    EXPECT_NEAR(value, 1.0 - x / kPi, 1e-2) << "x=" << x;
  }
}

TEST(HeatModel, SingleModeMatchesBasisDerivative) {
  const HeatDirichletModel model = build_heat_dirichlet(1);
  EXPECT_EQ(model.N, 1);
  EXPECT_NEAR(model.sys.A(0, 0).real(), -1.0, 1e-15);
  EXPECT_NEAR(model.b(0).real(), std::sqrt(2.0 / kPi), 1e-15);
  EXPECT_NEAR(model.gamma_declared, 0.76, 1e-15);
  EXPECT_EQ(model.sys.rho0, 0.0);
  ASSERT_EQ(model.sys.labels.size(), 1u);
  EXPECT_EQ(model.sys.labels[0], 1.0);
  EXPECT_THROW(build_heat_dirichlet(0), InvalidArgument);
  EXPECT_THROW(build_heat_dirichlet(4, 0.3), InvalidArgument);
}

TEST(HeatModel, ControlColumnIsOperatorTimesLift) {
  const HeatDirichletModel model = build_heat_dirichlet(16);
  const Vec lift = dirichlet_map_1d(1.0, 16);
  const Vec routed = -model.sys.A * lift;
  expect_matrix_near(routed, model.b, 1e-12, "minus-Laplacian route");
}

TEST(HeatModel, BoundaryPairingMatchesContinuumDerivative) {
  // phi(x) = x(pi - x) has phi'(0) = pi and sine coefficients
  // sqrt(2/pi) * 4 / k^3 for odd k, 0 for even k.
  const int N = 64;
  const HeatDirichletModel model = build_heat_dirichlet(N);
  Vec phi = Vec::Zero(N);
  for (int k = 1; k <= N; k += 2)
    phi(k - 1) = std::sqrt(2.0 / kPi) * 4.0 / (double(k) * k * k);
  const Cplx pairing = (model.b.adjoint() * phi)(0);
  EXPECT_NEAR(pairing.real(), kPi, 5.0 / N);
  EXPECT_NEAR(pairing.imag(), 0.0, 1e-14);
}

TEST(HeatModel, ControlGrowthStaysBelowDeclaredGrade) {
  const HeatDirichletModel model = build_heat_dirichlet(40);
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 40; ++k) {
    const double graded =
        model.b(k - 1).real() / std::pow(double(k) * k, model.gamma_declared);
    EXPECT_LT(graded, prev) << "k=" << k;
    prev = graded;
  }
  const double first = model.b(3).real() / std::pow(16.0, 0.76);
  EXPECT_LT(prev, 0.5 * first);
}

TEST(HeatModel, AllModesObservable) {
  const HeatDirichletModel model = build_heat_dirichlet(12);
  for (double alpha : {0.5, 2.0, 10.0}) {
    const PBHReport report = pbh_test(model.sys, alpha);
    EXPECT_TRUE(report.pass()) << "alpha=" << alpha;
  }
  const HautusReport sweep = sweep_halfplane(model.sys, 0.5);
  EXPECT_TRUE(sweep.positive);
}

TEST(HeatModel, StabilizesAtModerateRate) {
  const HeatDirichletModel model = build_heat_dirichlet(16);
  const StabilizeReport report = stabilize(model.sys, 2.0);
  EXPECT_TRUE(report.success);
  EXPECT_LE(report.closed_loop_abscissa, -1.95);
  EXPECT_TRUE(report.l2.in_l2);
  EXPECT_LE(report.trajectory.duhamel_residual, 1e-6);
}

TEST(Thickness, FullAndEmptyMasks) {
  const std::vector<bool> full(64, true);
  const std::vector<bool> empty(64, false);
  EXPECT_TRUE(thickness_check(full, {1.0, 2.0 * kPi}));
  EXPECT_TRUE(thickness_check(full, {0.5, kPi}));
  EXPECT_FALSE(thickness_check(empty, {0.1, kPi}));
  EXPECT_THROW(thickness_check(full, {1.5, kPi}), InvalidArgument);
  EXPECT_THROW(thickness_check(full, {0.5, 0.0}), InvalidArgument);
  const std::vector<bool> coarse(8, true);
  EXPECT_THROW(thickness_check(coarse, {0.5, kPi / 2.0}), InvalidArgument);
}

TEST(Thickness, HalfTorusWindows) {
  std::vector<bool> mask(256, false);
  for (int j = 0; j < 128; ++j) mask[j] = true;
  EXPECT_TRUE(thickness_check(mask, {0.5, 2.0 * kPi}));
  EXPECT_FALSE(thickness_check(mask, {0.9, 2.0 * kPi}));
  // A window of length pi/2 fits entirely inside the uncontrolled half.
  EXPECT_FALSE(thickness_check(mask, {0.1, kPi / 2.0}));
}

TEST(Thickness, MatchesBruteForceCounting) {
  Rng rng(71);
  const int n = 64;
  const double h = 2.0 * kPi / n;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<bool> mask(n);
    for (int j = 0; j < n; ++j) mask[j] = rng.uniform() < 0.5;
    for (double L : {kPi / 2.0, kPi, 2.0 * kPi}) {
      for (double eps : {0.3, 0.7}) {
        const int w = static_cast<int>(std::lround(L / h));
        bool naive = true;
        for (int j = 0; j < n && naive; ++j) {
          int count = 0;
          for (int t = 0; t < w; ++t) count += mask[(j + t) % n] ? 1 : 0;
          if (count * h < eps * L - 1e-9 * std::max(1.0, L)) naive = false;
        }
        EXPECT_EQ(thickness_check(mask, {eps, L}), naive)
            << "rep=" << rep << " L=" << L << " eps=" << eps;
      }
    }
  }
}

TEST(Fractional, FrequencyLayoutAndSymmetry) {
  std::vector<bool> mask(8, true);
  const RealVec a = RealVec::Ones(8);
  const FractionalThickModel model = build_fractional_model(8, 0.5, mask, a);
  const std::vector<double> want = {0, 1, 2, 3, 4, -3, -2, -1};
  ASSERT_EQ(model.sys.labels.size(), want.size());
  for (size_t k = 0; k < want.size(); ++k) {
    EXPECT_EQ(model.sys.labels[k], want[k]);
    EXPECT_NEAR(model.sys.A(k, k).real(), -want[k] * want[k], 1e-15);
  }
  for (int k = 1; k < 4; ++k)
    EXPECT_NEAR(model.multiplier(k).real(), model.multiplier(8 - k).real(),
                1e-15);
  EXPECT_EQ(model.sys.rho0, 1.0);
  EXPECT_EQ(model.sys.gamma, 0.5);
  EXPECT_EQ(model.a_floor, 1.0);
}

TEST(Fractional, ZeroExponentIsMaskedMultiplication) {
  Rng rng(5);
  const int n = 8;
  std::vector<bool> mask(n, true);
  mask[2] = mask[5] = false;
  RealVec a(n);
  for (int j = 0; j < n; ++j) a(j) = 0.5 + rng.uniform();
  const FractionalThickModel model = build_fractional_model(n, 0.0, mask, a);
  Vec aw = Vec::Zero(n);
  for (int j = 0; j < n; ++j) aw(j) = mask[j] ? a(j) : 0.0;
  expect_matrix_near(model.sys.B, model.dft * aw.asDiagonal(), 1e-14,
                     "s=0 composite");
  expect_matrix_near(model.sys.B.adjoint() * model.sys.B,
                     Mat(Vec(aw.cwiseAbs2()).asDiagonal()), 1e-13,
                     "masked multiplier gram");
}

TEST(Fractional, AdjointIdentityOnRandomProbes) {
  Rng rng(901);
  const int n = 16;
  std::vector<bool> mask(n, false);
  for (int j = 0; j < n / 2; ++j) mask[j] = true;
  RealVec a(n);
  for (int j = 0; j < n; ++j) a(j) = 1.0 + rng.uniform();
  const FractionalThickModel model = build_fractional_model(n, 0.6, mask, a);
  for (int rep = 0; rep < 8; ++rep) {
    const Vec u = rng.unit_vector(n);
    const Vec phi = rng.unit_vector(n);
    const Cplx lhs = (phi.adjoint() * (model.sys.B * u))(0);
    const Vec bstar_phi =
        model.a_masked.asDiagonal() *
        (model.dft.adjoint() * Vec(model.multiplier.asDiagonal() * phi));
    const Cplx rhs = (bstar_phi.adjoint() * u)(0);
    EXPECT_LE(std::abs(lhs - rhs), 1e-10 * (1.0 + std::abs(lhs)));
  }
}

TEST(Fractional, RejectsBadArguments) {
  std::vector<bool> mask(8, true);
  RealVec a = RealVec::Ones(8);
  RealVec dipped = a;
  dipped(3) = 0.0;
  EXPECT_THROW(build_fractional_model(8, 0.5, mask, dipped), InvalidArgument);
  EXPECT_THROW(build_fractional_model(12, 0.5, std::vector<bool>(12, true),
                                      RealVec::Ones(12)),
               InvalidArgument);
  EXPECT_THROW(build_fractional_model(8, 1.0, mask, a), InvalidArgument);
  EXPECT_THROW(build_fractional_model(8, 0.5, mask, RealVec::Ones(7)),
               InvalidArgument);
  std::vector<bool> empty(8, false);
  const FractionalThickModel hollow =
      build_fractional_model(8, 0.5, empty, a);
  EXPECT_EQ(hollow.a_floor, 0.0);
  EXPECT_LE(opnorm(hollow.sys.B), 1e-15);
}

TEST(Fractional, ZeroModeBlocksFullControlForPositiveExponent) {
  const int n = 16;
  const std::vector<bool> mask(n, true);
  const RealVec a = RealVec::Ones(n);

  const FractionalThickModel flat = build_fractional_model(n, 0.0, mask, a);
  EXPECT_TRUE(pbh_test(flat.sys, 0.5).pass());

  const FractionalThickModel rough = build_fractional_model(n, 0.5, mask, a);
  const PBHReport full = pbh_test(rough.sys, 0.5);
  ASSERT_FALSE(full.pass());
  EXPECT_LE(std::abs(full.failures.front().lambda), 1e-10);

  const ControlSystem deflated = deflate_zero_mode(rough);
  EXPECT_EQ(deflated.n(), n - 1);
  EXPECT_TRUE(pbh_test(deflated, 0.5).pass());
}

TEST(Fractional, HalfTorusSweepMarginPositive) {
  const int n = 32;
  std::vector<bool> mask(n, false);
  for (int j = 0; j < n / 2; ++j) mask[j] = true;
  const RealVec a = RealVec::Ones(n);
  const FractionalThickModel model = build_fractional_model(n, 0.5, mask, a);
  const HautusReport report = sweep_halfplane(deflate_zero_mode(model), 1.0);
  EXPECT_TRUE(report.positive);
  EXPECT_GT(report.min_margin, 0.0);
  EXPECT_LT(report.C_alpha, std::numeric_limits<double>::infinity());
}

TEST(FractionalBound, ClosedFormAndLimits) {
  EXPECT_NEAR(fractional_hautus_bound(0.0, 1.0), 1.0, 1e-12);
  EXPECT_NEAR(fractional_hautus_bound(0.5, 1.0), 1.0 / 3.0, 1e-10);
  const double expected = std::pow(2.3 / std::pow(1.0 + 4.6, 0.75), 2.0);
  EXPECT_NEAR(fractional_hautus_bound(0.75, 2.3), expected, 1e-12);
  EXPECT_LE(fractional_hautus_bound(0.5, 1e-8), 1e-15);
  EXPECT_THROW(fractional_hautus_bound(1.0, 1.0), InvalidArgument);
  EXPECT_THROW(fractional_hautus_bound(0.5, 0.0), InvalidArgument);
}

TEST(SpectralProbe, FullAndEmptyMasks) {
  const std::vector<bool> full(32, true);
  EXPECT_NEAR(spectral_inequality_probe(full, 5.0), 1.0, 1e-12);
  const std::vector<bool> empty(32, false);
  EXPECT_LE(spectral_inequality_probe(empty, 5.0), 1e-15);
  EXPECT_THROW(spectral_inequality_probe(full, 16.0), InvalidArgument);
}

TEST(SpectralProbe, HalfTorusMatchesGramOracle) {
  const int n = 64;
  const int kept = 32;
  std::vector<bool> mask(n, false);
  for (int j = 0; j < kept; ++j) mask[j] = true;
  const int r = 4;
  const int cols = 2 * r + 1;
  Mat gram(cols, cols);
  for (int c = 0; c < cols; ++c) {
    for (int d = 0; d < cols; ++d) {
      const int delta = c - d;
      if (delta == 0) {
        gram(c, d) = double(kept) / n;
      } else {
        const Cplx step = std::polar(1.0, 2.0 * kPi * delta / n);
        gram(c, d) =
            (1.0 - std::pow(step, kept)) / (1.0 - step) / double(n);
      }
    }
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(gram, Eigen::EigenvaluesOnly);
  const double oracle = std::sqrt(std::max(0.0, es.eigenvalues().minCoeff()));
  EXPECT_NEAR(spectral_inequality_probe(mask, double(r)), oracle, 1e-10);
}

TEST(SpectralProbe, DecreasingInCutoff) {
  const int n = 64;
  std::vector<bool> mask(n, false);
  for (int j = 0; j < n / 2; ++j) mask[j] = true;
  const double p2 = spectral_inequality_probe(mask, 2.0);
  const double p4 = spectral_inequality_probe(mask, 4.0);
  const double p8 = spectral_inequality_probe(mask, 8.0);
  EXPECT_GE(p2, p4);
  EXPECT_GE(p4, p8);
  EXPECT_GT(p8, 1e-8);
}

}  // namespace
