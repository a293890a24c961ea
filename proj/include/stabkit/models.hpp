#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "errors.hpp"
#include "numeric.hpp"
#include "system.hpp"

namespace stabkit {

inline constexpr double kPi = std::numbers::pi_v<double>;

// ---------------------------------------------------------------------------
// 1-D heat equation on (0, pi) with Dirichlet boundary control at x = 0,
// truncated to the first N sine modes e_k(x) = sqrt(2/pi) sin(kx):
//   A = diag(-k^2),   <B u, e_k> = u * k * sqrt(2/pi).
// The control column comes from the harmonic lift phi(x) = u (1 - x/pi)
// pushed through -A, so b_k = k^2 * (k-th lift coefficient at u = 1).
// ---------------------------------------------------------------------------

struct HeatDirichletModel {
  int N = 0;               // number of sine modes kept
  ControlSystem sys;       // A = diag(-k^2), B = b, gauge rho0 = 0
  Vec b;                   // control column, b_k = k sqrt(2/pi)
  double gamma_declared = 0.0;  // 3/4 + eps_decl
};

// Sine coefficients of the harmonic lift phi(x) = u (1 - x/pi) on (0, pi):
// c_k = u sqrt(2/pi) / k.
inline Vec dirichlet_map_1d(Cplx u, int modes) {
  if (modes < 1) throw InvalidArgument("dirichlet_map_1d: modes >= 1 required");
  Vec c(modes);
  const double scale = std::sqrt(2.0 / kPi);
  for (int k = 1; k <= modes; ++k) c(k - 1) = u * scale / double(k);
  return c;
}

inline HeatDirichletModel build_heat_dirichlet(int N, double eps_decl = 0.01) {
  if (N < 1) throw InvalidArgument("build_heat_dirichlet: N >= 1 required");
  if (!(eps_decl > 0.0 && eps_decl < 0.25))
    throw InvalidArgument("build_heat_dirichlet: eps_decl must lie in (0, 1/4)");
  Mat A = Mat::Zero(N, N);
  Vec b(N);
  std::vector<double> labels(N);
  const double scale = std::sqrt(2.0 / kPi);
  for (int k = 1; k <= N; ++k) {
    A(k - 1, k - 1) = -double(k) * double(k);
    b(k - 1) = double(k) * scale;
    labels[k - 1] = double(k);
  }
  HeatDirichletModel model;
  model.N = N;
  model.gamma_declared = 0.75 + eps_decl;
  model.b = b;
  model.sys = make_system(A, b, model.gamma_declared, 0.0);
  model.sys.labels = std::move(labels);
  return model;
}

// ---------------------------------------------------------------------------
// Window thickness of a mask on the 2*pi torus: every window of length L
// (periodized, counted with wrapping multiplicity when L exceeds the torus)
// must carry at least epsilon * L of mask measure.
// ---------------------------------------------------------------------------

struct ThickSetSpec {
  double epsilon = 0.0;  // required mask fraction per window, in (0, 1]
  double L = 0.0;        // window length
};

inline bool thickness_check(const std::vector<bool>& mask,
                            const ThickSetSpec& spec) {
  const int n = static_cast<int>(mask.size());
  if (n < 1) throw InvalidArgument("thickness_check: empty grid");
  if (!(spec.epsilon > 0.0 && spec.epsilon <= 1.0))
    throw InvalidArgument("thickness_check: epsilon must lie in (0, 1]");
  if (!(spec.L > 0.0)) throw InvalidArgument("thickness_check: L must be positive");
  const double h = 2.0 * kPi / n;
  if (!(h <= spec.L / 8.0 * (1.0 + 1e-12)))
    throw InvalidArgument("thickness_check: grid spacing exceeds L/8");

  std::vector<int> prefix(n + 1, 0);
  for (int j = 0; j < n; ++j) prefix[j + 1] = prefix[j] + (mask[j] ? 1 : 0);
  const int total = prefix[n];
  const int w = std::max(1, static_cast<int>(std::lround(spec.L / h)));
  const int wraps = w / n;
  const int rem = w % n;
  const double need = spec.epsilon * spec.L - 1e-9 * std::max(1.0, spec.L);
  for (int j = 0; j < n; ++j) {
    int count = wraps * total;
    const int hi = j + rem;
    if (hi <= n) {
      count += prefix[hi] - prefix[j];
    } else {
      count += (total - prefix[j]) + prefix[hi - n];
    }
    if (count * h < need) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Fractional Laplacian on the n-point discrete torus [0, 2*pi) with masked
// multiplier control.  State coordinates are Fourier modes in FFT layout
// xi = 0, 1, ..., n/2, -n/2+1, ..., -1, so A = diag(-xi^2); the control is a
// physical-grid function u pushed through
//   B u = |xi|^{2s} .* DFT( a_omega .* u ),
// whose adjoint acts as B* phi = a_omega .* IDFT( |xi|^{2s} .* phi ).
// ---------------------------------------------------------------------------

struct FractionalThickModel {
  int n_grid = 0;
  double s = 0.0;
  std::vector<bool> omega_mask;  // physical-grid support of the multiplier
  double a_floor = 0.0;          // min of a over the mask (0 when empty)
  ControlSystem sys;             // Fourier coordinates, labels = frequencies
  Mat dft;                       // unitary physical -> Fourier map
  Vec multiplier;                // |xi|^{2s} per Fourier coordinate
  Vec a_masked;                  // a .* mask on the physical grid
};

// FFT frequency layout: xi_k = k for k <= n/2, else k - n.
inline std::vector<double> fourier_frequencies(int n) {
  std::vector<double> xi(n);
  for (int k = 0; k < n; ++k) xi[k] = (k <= n / 2) ? double(k) : double(k - n);
  return xi;
}

// U(k, j) = exp(-i xi_k x_j) / sqrt(n) with x_j = 2*pi*j/n; unitary.
inline Mat unitary_dft(int n) {
  const std::vector<double> xi = fourier_frequencies(n);
  Mat U(n, n);
  const double root = 1.0 / std::sqrt(double(n));
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      U(k, j) = std::polar(root, -xi[k] * (2.0 * kPi * j / n));
  return U;
}

inline FractionalThickModel build_fractional_model(int n_grid, double s,
                                                   const std::vector<bool>& mask,
                                                   const RealVec& a,
                                                   double floor = 1e-12) {
  if (n_grid < 4 || (n_grid & (n_grid - 1)) != 0)
    throw InvalidArgument(
        "build_fractional_model: n_grid must be a power of two >= 4");
  if (!(s >= 0.0 && s < 1.0))
    throw InvalidArgument("build_fractional_model: s must lie in [0, 1)");
  if (static_cast<int>(mask.size()) != n_grid || a.size() != n_grid)
    throw InvalidArgument("build_fractional_model: mask/amplitude size mismatch");
  if (!a.allFinite() || a.minCoeff() < 0.0)
    throw InvalidArgument("build_fractional_model: amplitudes must be finite and >= 0");

  FractionalThickModel model;
  model.n_grid = n_grid;
  model.s = s;
  model.omega_mask = mask;
  model.a_masked = Vec::Zero(n_grid);
  double lo = std::numeric_limits<double>::infinity();
  bool any = false;
  for (int j = 0; j < n_grid; ++j) {
    if (!mask[j]) continue;
    any = true;
    if (a(j) < floor)
      throw InvalidArgument(
          "build_fractional_model: amplitude below floor on the mask");
    lo = std::min(lo, a(j));
    model.a_masked(j) = a(j);
  }
  model.a_floor = any ? lo : 0.0;

  const std::vector<double> xi = fourier_frequencies(n_grid);
  model.dft = unitary_dft(n_grid);
  model.multiplier = Vec(n_grid);
  Mat A = Mat::Zero(n_grid, n_grid);
  for (int k = 0; k < n_grid; ++k) {
    A(k, k) = -xi[k] * xi[k];
    model.multiplier(k) = std::pow(xi[k] * xi[k], s);
  }
  Mat B = model.multiplier.asDiagonal() * model.dft *
          model.a_masked.asDiagonal();
  model.sys = make_system(std::move(A), std::move(B), s, 1.0);
  model.sys.labels = xi;

  // Audit the composite against the physical-space adjoint route.
  Rng rng(kDefaultSeed);
  for (int rep = 0; rep < 4; ++rep) {
    const Vec u = rng.unit_vector(n_grid);
    const Vec phi = rng.unit_vector(n_grid);
    const Cplx lhs = (phi.adjoint() * (model.sys.B * u))(0);
    const Vec bstar_phi = model.a_masked.asDiagonal() *
                          (model.dft.adjoint() *
                           Vec(model.multiplier.asDiagonal() * phi));
    const Cplx rhs = (bstar_phi.adjoint() * u)(0);
    if (std::abs(lhs - rhs) > 1e-10 * (1.0 + std::abs(lhs)))
      throw Error("build_fractional_model: adjoint identity failed");
  }
  return model;
}

// The constant Fourier mode is annihilated by |xi|^{2s} for s > 0, so it can
// never be reached through B; analyses of the controlled dynamics drop it.
inline ControlSystem deflate_zero_mode(const FractionalThickModel& model) {
  const int n = model.n_grid;
  Mat A = model.sys.A.bottomRightCorner(n - 1, n - 1);
  Mat B = model.sys.B.bottomRows(n - 1);
  ControlSystem out = make_system(std::move(A), std::move(B), model.s, 1.0);
  out.labels.assign(model.sys.labels.begin() + 1, model.sys.labels.end());
  return out;
}

// ---------------------------------------------------------------------------
// Analytic observability constant for the fractional model:
//   C(s, alpha) = ( inf_{r >= 2 alpha} (r - alpha) / (1 + r)^s )^2,  r = |xi|^2.
// The ratio is increasing in r for s < 1, so the infimum sits at r = 2 alpha;
// a grid scan cross-checks the closed form.
// ---------------------------------------------------------------------------

inline double fractional_hautus_bound(double s, double alpha) {
  if (!(s >= 0.0 && s < 1.0))
    throw InvalidArgument("fractional_hautus_bound: s must lie in [0, 1)");
  if (!(alpha > 0.0))
    throw InvalidArgument("fractional_hautus_bound: alpha must be positive");
  const auto ratio = [&](double r) { return (r - alpha) / std::pow(1.0 + r, s); };
  const double closed = ratio(2.0 * alpha);
  double scan = std::numeric_limits<double>::infinity();
  const double hi = 2.0 * alpha + std::max(50.0, 50.0 * alpha);
  for (double r : linspace(2.0 * alpha, hi, 4001)) scan = std::min(scan, ratio(r));
  if (std::abs(scan - closed) > 1e-10 * (1.0 + std::abs(closed)))
    throw Error("fractional_hautus_bound: grid scan disagrees with closed form");
  return closed * closed;
}

// ---------------------------------------------------------------------------
// Discrete band-limited restriction constant: the smallest ratio
// ||f restricted to the mask|| / ||f|| over nonzero f with Fourier support in
// [-R, R], i.e. the least singular value of the masked synthesis matrix.
// ---------------------------------------------------------------------------

inline double spectral_inequality_probe(const std::vector<bool>& mask,
                                        double R) {
  const int n = static_cast<int>(mask.size());
  if (n < 2) throw InvalidArgument("spectral_inequality_probe: empty grid");
  if (!(R >= 0.0 && R < n / 2.0))
    throw InvalidArgument("spectral_inequality_probe: need 0 <= R < n/2");
  const int r = static_cast<int>(std::floor(R + 1e-12));
  const int cols = 2 * r + 1;
  Mat synth = Mat::Zero(n, cols);
  const double root = 1.0 / std::sqrt(double(n));
  for (int j = 0; j < n; ++j) {
    if (!mask[j]) continue;
    const double x = 2.0 * kPi * j / n;
    for (int c = 0; c < cols; ++c)
      synth(j, c) = std::polar(root, double(c - r) * x);
  }
  return smallest_singular_value(synth);
}

}  // namespace stabkit
