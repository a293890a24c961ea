#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace stabkit {

// Base type for every failure raised by the library, so callers can catch
// one class and still dispatch on the concrete condition.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad dimensions, non-finite entries, parameters out of range.
struct InvalidArgument : Error {
  using Error::Error;
};

// The gauge operator rho0*I - A has an eigenvalue on the closed negative
// real axis, so fractional powers (principal branch) are undefined.
struct SingularGauge : Error {
  using Error::Error;
};

// An eigenvalue of A sits on the split line Re(lambda) = -alpha within
// tolerance; the spectral splitting would be ill-posed.
struct SplitDegenerate : Error {
  using Error::Error;
};

// An eigenvalue lies too close to (or on the wrong side of) the
// integration contour of the Riesz projection.
struct ContourTooClose : Error {
  using Error::Error;
};

// A quadrature failed its Richardson self-check.
struct QuadratureUnresolved : Error {
  using Error::Error;
};

// The observability constants failed a-posteriori verification.
struct ConstantsNotCertified : Error {
  using Error::Error;
};

// The projected pair fails the PBH test at the split level; carries the
// offending eigenvalue so callers can report a witness.
struct ProjectedPairUncontrollable : Error {
  ProjectedPairUncontrollable(const std::string& msg, std::complex<double> lam)
      : Error(msg), lambda(lam) {}
  std::complex<double> lambda;
};

// Malformed input file; line numbers are 1-based.
struct ParseError : Error {
  ParseError(const std::string& msg, int line_no) : Error(msg), line(line_no) {}
  int line = 0;
};

}  // namespace stabkit
