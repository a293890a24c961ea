#pragma once

#include <vector>

#include "system.hpp"

namespace stabkit {

// ---------------------------------------------------------------------------
// Asymptotic exponential-dichotomy split at a level alpha > 0:
//   X = Q1 (+) Q2, both invariant,  sigma(A|Q1) right of Re = -alpha,
//   ||exp(tA)|Q2|| <= C_stable * exp(-epsilon t).
// P is the (generally oblique) spectral projector onto Q1 along Q2; the
// bases are orthonormal coordinates for the two invariant subspaces.
// ---------------------------------------------------------------------------

struct AedcSplit {
  double alpha = 0.0;
  Mat P;         // n x n projector, P^2 = P, AP = PA
  Mat Q1_basis;  // n x k, orthonormal
  Mat Q2_basis;  // n x (n-k), orthonormal
  Mat A1;        // k x k restriction of A to Q1 in Q1_basis coordinates
  double epsilon = 0.0;   // certified decay rate of the stable part
  double C_stable = 1.0;  // certified transient constant (>= 1)

  int k() const { return static_cast<int>(Q1_basis.cols()); }
};

namespace detail {

// Fit a certified (C, epsilon) pair for the stable part from the restricted
// propagator exp(t * A22) in orthonormal coordinates (no unstable blow-up).
// `rate_gap` is the spectral distance from sigma(A|Q2) to the split line;
// the certificate never claims more than that gap, and the fitted rate is
// shrunk by 5% before use.
inline void certify_stable_part(const Mat& A22, double rate_gap, double& eps,
                                double& C_stable) {
  const int l = static_cast<int>(A22.rows());
  if (l == 0) {
    eps = std::max(rate_gap, 1e-12);
    C_stable = 1.0;
    return;
  }
  const double rate_asym = -spectral_abscissa(A22);
  double horizon = 8.0 / std::max(rate_asym, 1e-3);
  std::vector<double> grid = linspace(0.0, horizon, 65);
  std::vector<double> vals(grid.size());
  for (size_t i = 0; i < grid.size(); ++i)
    vals[i] = opnorm(expm(Mat(grid[i] * A22)));
  const LogFit fit = fit_log_decay(grid, vals);
  double candidate = rate_gap;
  if (fit.used >= 2 && -fit.slope > 0.0)
    candidate = std::min(candidate, 0.95 * (-fit.slope));
  eps = std::max(candidate, 1e-12);

  const auto growth = [&](double t) {
    return opnorm(expm(Mat(t * A22))) * std::exp(eps * t);
  };
  // The prefactor is the sup of d(t) e^{eps t}; a coarse grid clips transient
  // humps between nodes, so zoom on every grid-local maximum.
  auto refine = [&](double lo, double hi) {
    double best = 0.0;
    for (int level = 0; level < 5; ++level) {
      const std::vector<double> ts = linspace(lo, hi, 17);
      size_t arg = 0;
      best = 0.0;
      for (size_t i = 0; i < ts.size(); ++i) {
        const double g = growth(ts[i]);
        if (g > best) best = g, arg = i;
      }
      const double h = (hi - lo) / 16.0;
      lo = std::max(ts[arg] - h, 0.0);
      hi = ts[arg] + h;
    }
    return best;
  };
  // Extend the horizon while the tail is still the running maximum.
  for (int ext = 0; ext < 4; ++ext) {
    size_t arg = 0;
    for (size_t i = 1; i < grid.size(); ++i)
      if (vals[i] * std::exp(eps * grid[i]) >
          vals[arg] * std::exp(eps * grid[arg]))
        arg = i;
    if (arg + 1 < grid.size()) break;
    horizon *= 2.0;
    grid = linspace(0.0, horizon, 65);
    vals.resize(grid.size());
    for (size_t i = 0; i < grid.size(); ++i)
      vals[i] = opnorm(expm(Mat(grid[i] * A22)));
  }
  C_stable = 1.0;
  const double step = grid[1] - grid[0];
  for (size_t i = 0; i < grid.size(); ++i) {
    const double g = vals[i] * std::exp(eps * grid[i]);
    const bool left_ok = i == 0 || vals[i - 1] * std::exp(eps * grid[i - 1]) <= g;
    const bool right_ok =
        i + 1 == grid.size() || vals[i + 1] * std::exp(eps * grid[i + 1]) <= g;
    if (left_ok && right_ok)
      C_stable = std::max(
          C_stable, refine(std::max(grid[i] - step, 0.0), grid[i] + step));
  }
}

inline Mat thin_q(const Mat& W) {
  if (W.cols() == 0) return W;
  Eigen::HouseholderQR<Mat> qr(W);
  return Mat(qr.householderQ() * Mat::Identity(W.rows(), W.cols()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Spectral splitting through an ordered complex Schur form.  Eigenvalues
// within `degeneracy_tol` of the split line Re = -alpha make the problem
// ill-posed and raise SplitDegenerate.
// ---------------------------------------------------------------------------

inline AedcSplit split_spectral(const Mat& A, double alpha,
                                double degeneracy_tol = 1e-6) {
  if (A.rows() != A.cols()) throw InvalidArgument("split_spectral: A not square");
  if (!(alpha > 0.0)) throw InvalidArgument("split_spectral: alpha must be > 0");
  const int n = static_cast<int>(A.rows());

  Eigen::ComplexSchur<Mat> schur(A, /*computeU=*/true);
  Mat T = schur.matrixT();
  Mat U = schur.matrixU();

  std::vector<char> select(static_cast<size_t>(n));
  int k = 0;
  for (int i = 0; i < n; ++i) {
    const double re = T(i, i).real();
    if (std::abs(re + alpha) < degeneracy_tol)
      throw SplitDegenerate("split_spectral: eigenvalue on the split line Re = " +
                            std::to_string(-alpha));
    select[static_cast<size_t>(i)] = re > -alpha;
    k += select[static_cast<size_t>(i)] ? 1 : 0;
  }
  schur_reorder(T, U, select);

  AedcSplit split;
  split.alpha = alpha;
  split.A1 = T.topLeftCorner(k, k);
  split.Q1_basis = U.leftCols(k);

  const int l = n - k;
  double max_re_stable = -std::numeric_limits<double>::infinity();
  for (int i = k; i < n; ++i) max_re_stable = std::max(max_re_stable, T(i, i).real());

  if (k == 0) {
    split.P = Mat::Zero(n, n);
    split.Q2_basis = Mat::Identity(n, n);
  } else if (l == 0) {
    split.P = Mat::Identity(n, n);
    split.Q2_basis = Mat(n, 0);
  } else {
    // P = U [I Y; 0 0] U^H with T11 Y - Y T22 = T12; the complementary
    // invariant subspace is spanned by U [-Y; I].
    const Mat T11 = T.topLeftCorner(k, k);
    const Mat T22 = T.bottomRightCorner(l, l);
    const Mat Y = sylvester_tri(T11, T22, T.topRightCorner(k, l));
    Mat inner = Mat::Zero(n, n);
    inner.topLeftCorner(k, k) = Mat::Identity(k, k);
    inner.topRightCorner(k, l) = Y;
    split.P = U * inner * U.adjoint();
    Mat W(n, l);
    W = U.leftCols(k) * (-Y);
    W += U.rightCols(l);
    split.Q2_basis = detail::thin_q(W);
  }

  const double rate_gap = (l == 0) ? alpha : (-alpha - max_re_stable);
  const Mat A22 = split.Q2_basis.adjoint() * A * split.Q2_basis;
  detail::certify_stable_part(A22, rate_gap, split.epsilon, split.C_stable);
  return split;
}

// ---------------------------------------------------------------------------
// Riesz projection by contour quadrature over a rectangle (composite
// Gauss-Legendre per edge, independent cross-check of the Schur route).
// ---------------------------------------------------------------------------

struct Rectangle {
  double re_min, re_max, im_min, im_max;
};

inline double rect_boundary_distance(const Rectangle& r, Cplx z) {
  auto seg = [&](Cplx a, Cplx b) {
    const Cplx d = b - a;
    const double len2 = std::norm(d);
    double t = len2 > 0 ? ((z - a) * std::conj(d)).real() / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::abs(z - (a + t * d));
  };
  const Cplx c1(r.re_min, r.im_min), c2(r.re_max, r.im_min);
  const Cplx c3(r.re_max, r.im_max), c4(r.re_min, r.im_max);
  return std::min(std::min(seg(c1, c2), seg(c2, c3)),
                  std::min(seg(c3, c4), seg(c4, c1)));
}

inline bool rect_contains(const Rectangle& r, Cplx z) {
  return z.real() > r.re_min && z.real() < r.re_max && z.imag() > r.im_min &&
         z.imag() < r.im_max;
}

// Rectangle around the eigenvalues right of Re = -alpha; the left edge sits
// on the split line and the free edges keep half the spectral gap as margin.
inline Rectangle default_contour(const Mat& A, double alpha) {
  Eigen::ComplexEigenSolver<Mat> es(A, false);
  double gap = std::numeric_limits<double>::infinity();
  double re_max = -alpha, im_max = 0.0;
  bool any = false;
  for (int i = 0; i < A.rows(); ++i) {
    const Cplx z = es.eigenvalues()(i);
    gap = std::min(gap, std::abs(z.real() + alpha));
    if (z.real() > -alpha) {
      any = true;
      re_max = std::max(re_max, z.real());
      im_max = std::max(im_max, std::abs(z.imag()));
    }
  }
  if (!std::isfinite(gap)) gap = 1.0;
  const double margin = std::max(0.5 * gap, 1e-3);
  if (!any) return Rectangle{-alpha + margin, -alpha + 2.0 * margin, -margin, margin};
  return Rectangle{-alpha, re_max + margin, -(im_max + margin), im_max + margin};
}

inline Mat kato_projection(const Mat& A, double alpha, const Rectangle& rect,
                           int nodes = 256, double min_dist = 1e-6) {
  if (A.rows() != A.cols()) throw InvalidArgument("kato_projection: A not square");
  const int n = static_cast<int>(A.rows());
  Eigen::ComplexEigenSolver<Mat> es(A, false);
  for (int i = 0; i < n; ++i) {
    const Cplx z = es.eigenvalues()(i);
    if (rect_boundary_distance(rect, z) < min_dist)
      throw ContourTooClose("kato_projection: eigenvalue within " +
                            std::to_string(min_dist) + " of the contour");
    if (rect_contains(rect, z) != (z.real() > -alpha))
      throw InvalidArgument(
          "kato_projection: contour does not enclose exactly the eigenvalues "
          "right of the split line");
  }

  const Cplx corners[5] = {Cplx(rect.re_min, rect.im_min), Cplx(rect.re_max, rect.im_min),
                           Cplx(rect.re_max, rect.im_max), Cplx(rect.re_min, rect.im_max),
                           Cplx(rect.re_min, rect.im_min)};
  double perimeter = 0.0;
  for (int e = 0; e < 4; ++e) perimeter += std::abs(corners[e + 1] - corners[e]);

  const auto segment_distance = [](Cplx a, Cplx b, Cplx z) {
    const Cplx ab = b - a;
    const double len2 = std::norm(ab);
    double t = len2 > 0.0 ? (std::conj(ab) * (z - a)).real() / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::abs(z - (a + t * ab));
  };

  const int q = 12;
  Mat acc = Mat::Zero(n, n);
  const Mat I = Mat::Identity(n, n);
  for (int e = 0; e < 4; ++e) {
    const Cplx a = corners[e], b = corners[e + 1];
    const double len = std::abs(b - a);
    if (len <= 0.0) continue;
    // Panel length must track the distance to the nearest pole so the
    // per-panel Bernstein ellipse keeps Gauss-Legendre geometric.
    double dmin = len;
    for (int i = 0; i < n; ++i)
      dmin = std::min(dmin, segment_distance(a, b, es.eigenvalues()(i)));
    dmin = std::max(dmin, min_dist);
    int panels = std::max<int>(2, static_cast<int>(std::lround(nodes * len / (perimeter * q))));
    panels = std::max<int>(panels, static_cast<int>(std::ceil(len / (2.0 * dmin))));
    panels = std::min(panels, 512);
    acc += integrate_gl(
        [&](double s) { return Mat(((a + s * (b - a)) * I - A).partialPivLu().inverse()); },
        0.0, 1.0, panels, q) * (b - a);
  }
  return acc / Cplx(0.0, 2.0 * M_PI);
}

// ---------------------------------------------------------------------------
// Validation of a proposed split against the defining conditions.
// ---------------------------------------------------------------------------

struct ValidationReport {
  bool direct_sum_ok = false;
  bool projector_ok = false;
  bool invariance_ok = false;
  bool q1_ok = false;
  bool stable_ok = false;

  double direct_sum_sigma_min = 0.0;  // smallest singular value of [Q1 Q2]
  double projector_residual = 0.0;    // ||P^2 - P|| / (1 + ||P||^2)
  double commute_residual = 0.0;      // ||AP - PA|| / ||A|| (1 + ||P||)
  double invariance_residual = 0.0;   // worst off-block leakage of S(t)
  double q1_margin = 0.0;             // min Re sigma(A1) + alpha
  double a1_norm = 0.0;
  double epsilon = 0.0;
  double C_stable = 0.0;
  double stable_violation = 0.0;  // worst d(t) - C e^{-eps t} overshoot (rel.)
  double stable_fit_rate = 0.0;   // fresh fitted decay slope of the stable part
  double projector_norm = 1.0;    // conditioning indicator for oblique P

  bool pass() const {
    return direct_sum_ok && projector_ok && invariance_ok && q1_ok && stable_ok;
  }
};

inline ValidationReport validate_aedc(const Mat& A, const AedcSplit& split,
                                      std::vector<double> t_grid = {},
                                      double tol = 1e-8) {
  const int n = static_cast<int>(A.rows());
  const int k = split.k();
  const int l = n - k;
  ValidationReport rep;
  rep.epsilon = split.epsilon;
  rep.C_stable = split.C_stable;
  rep.projector_norm = opnorm(split.P);

  // (a) direct sum and projector algebra.
  Mat stacked(n, k + l);
  if (k > 0) stacked.leftCols(k) = split.Q1_basis;
  if (l > 0) stacked.rightCols(l) = split.Q2_basis;
  rep.direct_sum_sigma_min =
      (k + l == n && n > 0) ? smallest_singular_value(stacked) : 0.0;
  rep.direct_sum_ok = k + l == n && rep.direct_sum_sigma_min > 1e-7;

  const double pn = 1.0 + rep.projector_norm * rep.projector_norm;
  rep.projector_residual = opnorm(Mat(split.P * split.P - split.P)) / pn;
  rep.commute_residual = opnorm(Mat(A * split.P - split.P * A)) /
                         (std::max(opnorm(A), 1e-300) * (1.0 + rep.projector_norm));
  rep.projector_ok = rep.projector_residual <= tol && rep.commute_residual <= tol;

  // (b) semigroup invariance of both ranges over the grid.
  const double absc_plus = std::max(0.0, spectral_abscissa(A));
  if (t_grid.empty()) {
    const double horizon = std::min(8.0 / std::max(split.epsilon, 1e-3),
                                    200.0 / std::max(1.0, absc_plus));
    t_grid = linspace(0.0, horizon, 17);
  }
  const Mat Pc = Mat::Identity(n, n) - split.P;
  rep.invariance_residual = 0.0;
  for (double t : t_grid) {
    const Mat S = expm(Mat(t * A));
    const double scale = std::max(opnorm(S), 1e-300) *
                         (1.0 + rep.projector_norm) * (1.0 + rep.projector_norm);
    rep.invariance_residual = std::max(
        rep.invariance_residual,
        std::max(opnorm(Mat(Pc * S * split.P)), opnorm(Mat(split.P * S * Pc))) /
            scale);
  }
  rep.invariance_ok = rep.invariance_residual <= tol;

  // (c) bounded unstable block with spectrum right of the line.
  rep.a1_norm = opnorm(split.A1);
  // min Re sigma(A1) = -abscissa(-A1)
  rep.q1_margin = k == 0 ? split.alpha
                         : split.alpha - spectral_abscissa(Mat(-split.A1));
  rep.q1_ok = std::isfinite(rep.a1_norm) && rep.q1_margin > 0.0;

  // (d) certified exponential decay of the stable part.
  if (l == 0) {
    rep.stable_ok = split.epsilon > 0.0 && split.C_stable >= 1.0;
    rep.stable_fit_rate = -split.epsilon;
  } else {
    const Mat A22 = split.Q2_basis.adjoint() * A * split.Q2_basis;
    std::vector<double> vals(t_grid.size());
    for (size_t i = 0; i < t_grid.size(); ++i)
      vals[i] = opnorm(expm(Mat(t_grid[i] * A22)));
    double worst = 0.0;
    for (size_t i = 0; i < t_grid.size(); ++i) {
      const double bound = split.C_stable * std::exp(-split.epsilon * t_grid[i]);
      worst = std::max(worst, (vals[i] - bound) / std::max(bound, 1e-300));
    }
    rep.stable_violation = worst;
    rep.stable_fit_rate = fit_log_decay(t_grid, vals).slope;
    rep.stable_ok =
        split.epsilon > 0.0 && split.C_stable >= 1.0 && worst <= 1e-6;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Adjoint split: if A splits at alpha with projector P, then A* splits at
// alpha with projector P*.  Bases and certificates are rebuilt for A*.
// ---------------------------------------------------------------------------

inline AedcSplit adjoint_split(const Mat& A, const AedcSplit& split) {
  const int n = static_cast<int>(A.rows());
  const int k = split.k();
  const Mat Astar = A.adjoint();
  AedcSplit out;
  out.alpha = split.alpha;
  out.P = split.P.adjoint();

  // Orthonormal bases for range(P*) and range(I - P*).
  auto range_basis = [&](const Mat& M, int rank) {
    if (rank == 0) return Mat(n, 0);
    Eigen::ColPivHouseholderQR<Mat> qr(M);
    Mat Q = qr.householderQ() * Mat::Identity(n, rank);
    // Column pivoting already ordered by magnitude; rank is known a priori.
    return Q;
  };
  out.Q1_basis = range_basis(out.P, k);
  out.Q2_basis = range_basis(Mat(Mat::Identity(n, n) - out.P), n - k);
  out.A1 = out.Q1_basis.adjoint() * Astar * out.Q1_basis;

  double max_re_stable = -std::numeric_limits<double>::infinity();
  if (n - k > 0) {
    const Mat A22 = out.Q2_basis.adjoint() * Astar * out.Q2_basis;
    max_re_stable = spectral_abscissa(A22);
    detail::certify_stable_part(A22, -split.alpha - max_re_stable, out.epsilon,
                                out.C_stable);
  } else {
    detail::certify_stable_part(Mat(0, 0), split.alpha, out.epsilon,
                                out.C_stable);
  }
  return out;
}

}  // namespace stabkit
