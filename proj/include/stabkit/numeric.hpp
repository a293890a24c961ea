#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace stabkit {

using Real = double;
using Cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RealVec = Eigen::VectorXd;

inline constexpr std::uint64_t kDefaultSeed = 20240817ull;

// ---------------------------------------------------------------------------
// Matrix exponential (scaling-and-squaring via Eigen) and operator norms.
// ---------------------------------------------------------------------------

inline Mat expm(const Mat& M) { return M.exp(); }

// Largest singular value.  Small matrices go through a full SVD; larger ones
// through the Hermitian eigenproblem of M^H M (cheaper, same value).
inline double opnorm(const Mat& M) {
  if (M.rows() == 0 || M.cols() == 0) return 0.0;
  if (std::min(M.rows(), M.cols()) <= 64) {
    return Eigen::JacobiSVD<Mat>(M).singularValues()(0);
  }
  Mat G = M.adjoint() * M;
  Eigen::SelfAdjointEigenSolver<Mat> es(G, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

inline double smallest_singular_value(const Mat& M) {
  Eigen::JacobiSVD<Mat> svd(M);
  return svd.singularValues()(std::min(M.rows(), M.cols()) - 1);
}

// ---------------------------------------------------------------------------
// Gauss-Legendre rules and composite quadrature.
// ---------------------------------------------------------------------------

struct GlRule {
  std::vector<double> x;  // nodes on [-1, 1]
  std::vector<double> w;
};

// Nodes via Newton iteration on the Legendre polynomial P_q.
inline const GlRule& gl_rule(int q) {
  static std::vector<GlRule> cache(65);
  if (q < 1 || q > 64) throw InvalidArgument("gl_rule: order out of range");
  GlRule& r = cache[static_cast<size_t>(q)];
  if (!r.x.empty()) return r;
  r.x.resize(static_cast<size_t>(q));
  r.w.resize(static_cast<size_t>(q));
  for (int i = 0; i < q; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (q + 0.5));
    for (int it = 0; it < 100; ++it) {
      // Evaluate P_q and P_q' by the three-term recurrence.
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= q; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double dp = q * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= q; ++k) {
      double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    double dp = q * (x * p1 - p0) / (x * x - 1.0);
    r.x[static_cast<size_t>(q - 1 - i)] = x;
    r.w[static_cast<size_t>(q - 1 - i)] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return r;
}

// Composite Gauss-Legendre integral of f over [a, b]; works for double and
// Eigen matrix return types alike.
template <class F>
auto integrate_gl(F&& f, double a, double b, int panels, int q = 8)
    -> std::decay_t<decltype(f(a))> {
  using R = std::decay_t<decltype(f(a))>;
  if (panels < 1) panels = 1;
  const GlRule& rule = gl_rule(q);
  const double h = (b - a) / panels;
  R acc{};
  bool first = true;
  for (int p = 0; p < panels; ++p) {
    const double c = a + (p + 0.5) * h;
    for (int i = 0; i < q; ++i) {
      const double s = c + 0.5 * h * rule.x[static_cast<size_t>(i)];
      R v = f(s);
      v *= Cplx(0.5 * h * rule.w[static_cast<size_t>(i)], 0.0);
      if (first) {
        acc = std::move(v);
        first = false;
      } else {
        acc += v;
      }
    }
  }
  return acc;
}

// Scalar overload needs a real weight to keep `double` integrands working.
template <class F>
double integrate_gl_real(F&& f, double a, double b, int panels, int q = 8) {
  if (panels < 1) panels = 1;
  const GlRule& rule = gl_rule(q);
  const double h = (b - a) / panels;
  double acc = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double c = a + (p + 0.5) * h;
    for (int i = 0; i < q; ++i) {
      const double s = c + 0.5 * h * rule.x[static_cast<size_t>(i)];
      acc += 0.5 * h * rule.w[static_cast<size_t>(i)] * f(s);
    }
  }
  return acc;
}

// Panel count heuristic: resolve oscillation/growth scale `omega` over a
// span of length `len` with a q-point rule per panel.
inline int panels_for(double omega, double len, int q = 8, int base = 4) {
  const double scale = std::max(1.0, omega) * std::max(len, 0.0);
  return base + static_cast<int>(std::ceil(scale / std::max(1, q)));
}

// Richardson-checked integration: doubles the panel count and requires the
// two results to agree to `rtol` relative to matrix scale.
template <class F>
auto integrate_checked(F&& f, double a, double b, int panels, double rtol,
                       int q = 8) -> std::decay_t<decltype(f(a))> {
  auto coarse = integrate_gl(f, a, b, panels, q);
  auto fine = integrate_gl(f, a, b, 2 * panels, q);
  const double scale = std::max(opnorm(fine), 1e-300);
  if (opnorm(coarse - fine) > rtol * scale) {
    throw QuadratureUnresolved(
        "quadrature Richardson check failed: results at " +
        std::to_string(panels) + " and " + std::to_string(2 * panels) +
        " panels disagree");
  }
  return fine;
}

// ---------------------------------------------------------------------------
// Ordered complex Schur form.
// ---------------------------------------------------------------------------

// Swap the adjacent diagonal entries k, k+1 of the upper-triangular T with a
// Givens rotation, updating the accumulated unitary U.
inline void schur_swap(Mat& T, Mat& U, int k) {
  const int n = static_cast<int>(T.rows());
  const Cplx a = T(k, k), b = T(k + 1, k + 1), t = T(k, k + 1);
  const Cplx d = b - a;
  const double nv = std::sqrt(std::norm(t) + std::norm(d));
  if (nv < 1e-300) return;  // equal decoupled eigenvalues: nothing to do
  Mat G(2, 2);
  G << t / nv, -std::conj(d) / nv, d / nv, std::conj(t) / nv;
  T.middleRows(k, 2) = (G.adjoint() * T.middleRows(k, 2)).eval();
  T.middleCols(k, 2) = (T.middleCols(k, 2) * G).eval();
  U.middleCols(k, 2) = (U.middleCols(k, 2) * G).eval();
  T(k + 1, k) = Cplx(0, 0);
  (void)n;
}

// Reorder the Schur factorization A = U T U^H so that the eigenvalues with
// select[i] == true occupy the leading diagonal block.  `select` refers to
// the incoming diagonal order and is consumed.
inline void schur_reorder(Mat& T, Mat& U, std::vector<char>& select) {
  const int n = static_cast<int>(T.rows());
  int target = 0;
  for (int i = 0; i < n; ++i) {
    if (!select[static_cast<size_t>(i)]) continue;
    for (int j = i; j > target; --j) {
      schur_swap(T, U, j - 1);
      std::swap(select[static_cast<size_t>(j - 1)],
                select[static_cast<size_t>(j)]);
    }
    ++target;
  }
}

// ---------------------------------------------------------------------------
// Triangular Sylvester solve: T11 Y - Y T22 = C with both factors upper
// triangular (used for spectral projectors from an ordered Schur form).
// ---------------------------------------------------------------------------

inline Mat sylvester_tri(const Mat& T11, const Mat& T22, const Mat& C) {
  const int k = static_cast<int>(T11.rows());
  const int l = static_cast<int>(T22.rows());
  Mat Y(k, l);
  for (int j = 0; j < l; ++j) {
    Vec rhs = C.col(j);
    for (int i = 0; i < j; ++i) rhs += Y.col(i) * T22(i, j);
    Mat M = T11 - T22(j, j) * Mat::Identity(k, k);
    double dmin = 1e300;
    for (int i = 0; i < k; ++i) dmin = std::min(dmin, std::abs(M(i, i)));
    if (dmin < 1e-14 * (1.0 + opnorm(T11)))
      throw SplitDegenerate("sylvester_tri: spectra of the two blocks touch");
    Y.col(j) = M.triangularView<Eigen::Upper>().solve(rhs);
  }
  return Y;
}

// ---------------------------------------------------------------------------
// Deterministic random helpers (seeded probes, test generators).
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed = kDefaultSeed) : gen_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double normal() {  // explicit Box-Muller keeps the stream reproducible
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 1e-300) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  Cplx cnormal() { return Cplx(normal(), normal()); }

  Vec unit_vector(int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = cnormal();
    const double nv = v.norm();
    return nv > 0 ? Vec(v / nv) : Vec::Unit(n, 0);
  }

  // Real-entried complex matrix with iid uniform entries in [lo, hi].
  Mat real_uniform_matrix(int r, int c, double lo, double hi) {
    Mat M(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) M(i, j) = Cplx(uniform(lo, hi), 0.0);
    return M;
  }

  Mat complex_gaussian_matrix(int r, int c) {
    Mat M(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) M(i, j) = cnormal();
    return M;
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Least-squares line fit of log(values) against t: values ~ C * exp(slope*t).
// Returns {C, slope}.  Samples below `floor_val` are dropped to avoid log
// underflow noise.
// ---------------------------------------------------------------------------

struct LogFit {
  double C = 0.0;
  double slope = 0.0;
  int used = 0;
};

inline LogFit fit_log_decay(const std::vector<double>& t,
                            const std::vector<double>& v, size_t begin = 0,
                            double floor_val = 1e-280) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (size_t i = begin; i < t.size() && i < v.size(); ++i) {
    if (!(v[i] > floor_val) || !std::isfinite(v[i])) continue;
    const double x = t[i], y = std::log(v[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  LogFit out;
  out.used = n;
  if (n < 2) return out;
  const double det = n * sxx - sx * sx;
  if (std::abs(det) < 1e-300) return out;
  out.slope = (n * sxy - sx * sy) / det;
  out.C = std::exp((sy * sxx - sx * sxy) / det);
  return out;
}

inline std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out(static_cast<size_t>(std::max(n, 1)));
  if (n == 1) {
    out[0] = a;
    return out;
  }
  for (int i = 0; i < n; ++i)
    out[static_cast<size_t>(i)] = a + (b - a) * i / (n - 1);
  return out;
}

inline std::vector<double> logspace(double a, double b, int n) {
  std::vector<double> out = linspace(std::log(a), std::log(b), n);
  for (double& x : out) x = std::exp(x);
  return out;
}

}  // namespace stabkit
