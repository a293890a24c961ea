#pragma once

// Frequency-domain stabilizability tests: half-plane Hautus margins on the
// observed adjoint pair, the PBH eigenvector criterion, and rapid sweeps
// across decay levels.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "stabkit/errors.hpp"
#include "stabkit/numeric.hpp"
#include "stabkit/system.hpp"

namespace stabkit {

struct ObservedPair {
  Mat Astar;
  Mat Bstar;
};

// Adjoint pair the frequency tests run on: the grading-shifted realization
// for gamma in [1/2, 1), the raw adjoints otherwise (or on request).
inline ObservedPair observed_adjoint(const ControlSystem& sys, bool raw = false) {
  if (raw || sys.gamma < 0.5) return {sys.A.adjoint(), sys.B.adjoint()};
  const ShiftedSystem sh = shift_state_space(sys);
  return {sh.A_shift.adjoint(), sh.Bstar_shift};
}

namespace detail {

// Smallest singular value of the stacked map phi -> ((lambda I - A*) phi,
// B* phi); optionally returns the minimizing unit vector.
inline double stacked_margin(const Mat& Astar, const Mat& Bstar, Cplx lambda,
                             Vec* witness = nullptr) {
  const int n = static_cast<int>(Astar.rows());
  const int m = static_cast<int>(Bstar.rows());
  Mat S(n + m, n);
  S.topRows(n) = lambda * Mat::Identity(n, n) - Astar;
  S.bottomRows(m) = Bstar;
  if (n <= 64) {
    Eigen::JacobiSVD<Mat> svd(S, witness ? Eigen::ComputeThinV : 0);
    if (witness) *witness = svd.matrixV().col(n - 1);
    return svd.singularValues()(n - 1);
  }
  // Large systems: the normal equations are a sum of nonnegative terms, so
  // the Rayleigh quotient keeps relative accuracy even for tiny margins.
  const Mat M = S.adjoint() * S;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (M + Mat(M.adjoint())));
  const Vec v = es.eigenvectors().col(0);
  if (witness) *witness = v;
  return std::sqrt(std::max((S * v).squaredNorm(), 0.0));
}

}  // namespace detail

inline double hautus_margin(const ControlSystem& sys, Cplx lambda, bool raw = false) {
  const ObservedPair op = observed_adjoint(sys, raw);
  return detail::stacked_margin(op.Astar, op.Bstar, lambda);
}

struct SweepGrid {
  int re_points = 9;
  int im_points = 41;
  double imag_bound = -1.0;  // negative: use 2 (||A*|| + 1)
};

struct HautusReport {
  double alpha = 0.0;
  std::vector<Cplx> grid;
  std::vector<double> margins;
  Cplx worst_lambda{0, 0};
  Vec worst_witness;
  double min_margin = std::numeric_limits<double>::infinity();
  double C_alpha = std::numeric_limits<double>::infinity();
  double threshold = 0.0;  // positivity cut for the verdict
  bool positive = false;
};

// Samples the Hautus inequality over the half-plane boundary Re = -alpha, an
// interior rectangle up to the spectral abscissa, and the unstable spectrum
// itself (where margins can vanish).
inline HautusReport sweep_halfplane(const ControlSystem& sys, double alpha,
                                    const SweepGrid& res = {}, bool raw = false) {
  if (res.re_points < 1 || res.im_points < 1)
    throw InvalidArgument("sweep_halfplane: empty grid");
  const ObservedPair op = observed_adjoint(sys, raw);
  const double anorm = opnorm(op.Astar);
  const double bound = res.imag_bound > 0.0 ? res.imag_bound : 2.0 * (anorm + 1.0);

  HautusReport rep;
  rep.alpha = alpha;
  rep.threshold = 1e-7 * (1.0 + anorm);
  const double re_max = std::max(-alpha, spectral_abscissa(op.Astar) + 1.0);
  for (double re : linspace(-alpha, re_max, res.re_points))
    for (double im : linspace(-bound, bound, res.im_points))
      rep.grid.emplace_back(re, im);
  Eigen::ComplexEigenSolver<Mat> es(op.Astar, false);
  for (int i = 0; i < op.Astar.rows(); ++i)
    if (es.eigenvalues()(i).real() > -alpha) rep.grid.push_back(es.eigenvalues()(i));

  rep.margins.reserve(rep.grid.size());
  for (const Cplx& lam : rep.grid) {
    const double m = detail::stacked_margin(op.Astar, op.Bstar, lam);
    rep.margins.push_back(m);
    if (m < rep.min_margin) {
      rep.min_margin = m;
      rep.worst_lambda = lam;
    }
  }
  detail::stacked_margin(op.Astar, op.Bstar, rep.worst_lambda, &rep.worst_witness);
  rep.positive = rep.min_margin > rep.threshold;
  if (rep.min_margin > 0.0) rep.C_alpha = 1.0 / (rep.min_margin * rep.min_margin);
  return rep;
}

struct PBHFailure {
  Cplx lambda{0, 0};
  Vec witness;  // unit vector with (lambda I - A*) w ~ 0 and B* w ~ 0
};

struct PBHReport {
  double alpha = 0.0;
  std::vector<PBHFailure> failures;
  bool pass() const { return failures.empty(); }
};

// Eigenvector criterion: for each eigenvalue of A* right of the line, find
// the eigenspace (SVD null space) and check whether B* annihilates any unit
// vector in it.
inline PBHReport pbh_test(const ControlSystem& sys, double alpha, bool raw = false,
                          double tol = 1e-8) {
  const ObservedPair op = observed_adjoint(sys, raw);
  const int n = static_cast<int>(op.Astar.rows());
  PBHReport rep;
  rep.alpha = alpha;
  const double ascale = 1.0 + opnorm(op.Astar);
  const double bscale = 1.0 + opnorm(op.Bstar);

  Eigen::ComplexEigenSolver<Mat> es(op.Astar, false);
  std::vector<Cplx> seen;
  for (int i = 0; i < n; ++i) {
    const Cplx lam = es.eigenvalues()(i);
    if (!(lam.real() > -alpha)) continue;
    bool dup = false;
    for (const Cplx& s : seen) dup = dup || std::abs(s - lam) <= 1e-8 * ascale;
    if (dup) continue;
    seen.push_back(lam);

    Eigen::JacobiSVD<Mat> svd(Mat(op.Astar - lam * Mat::Identity(n, n)),
                              Eigen::ComputeThinV);
    int null_dim = 0;
    for (int j = n - 1; j >= 0; --j)
      if (svd.singularValues()(j) <= 1e-8 * ascale) ++null_dim;
    if (null_dim == 0) null_dim = 1;  // eigenvalue came from the solver
    const Mat V = svd.matrixV().rightCols(null_dim);
    // Normal equations on the restricted map keep the full eigenspace
    // dimension even when there are fewer controls than null directions.
    const Mat BV = op.Bstar * V;
    const Mat NN = BV.adjoint() * BV;
    Eigen::SelfAdjointEigenSolver<Mat> ns(0.5 * (NN + Mat(NN.adjoint())));
    const double smallest = std::sqrt(std::max(ns.eigenvalues()(0), 0.0));
    if (smallest <= tol * bscale) {
      PBHFailure f;
      f.lambda = lam;
      f.witness = V * ns.eigenvectors().col(0);
      f.witness.normalize();
      rep.failures.push_back(std::move(f));
    }
  }
  return rep;
}

inline std::vector<HautusReport> rapid_sweep(const ControlSystem& sys,
                                             const std::vector<double>& alphas,
                                             const SweepGrid& res = {},
                                             bool raw = false) {
  std::vector<HautusReport> out;
  out.reserve(alphas.size());
  double prev = 0.0;
  for (double a : alphas) {
    if (!(a > 0.0) || a < prev)
      throw InvalidArgument("rapid_sweep: alphas must be positive ascending");
    prev = a;
    out.push_back(sweep_halfplane(sys, a, res, raw));
  }
  return out;
}

}  // namespace stabkit
