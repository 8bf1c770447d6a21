#pragma once

#include <cmath>
#include <string>

#include "fol/errors.hpp"

namespace fol {

/// Dimension and weight exponent. The problem lives in R^{n+1}, the weight is
/// |y|^a and the fractional order is s with a = 1 - 2s.
struct Params {
  int n = 1;
  double a = 0.0;
  double s = 0.5;

  static Params from_a(int n, double a) {
    Params p;
    p.n = n;
    p.a = a;
    p.s = (1.0 - a) / 2.0;
    p.validate();
    return p;
  }

  static Params from_s(int n, double s) {
    Params p;
    p.n = n;
    p.s = s;
    p.a = 1.0 - 2.0 * s;
    p.validate();
    return p;
  }

  void validate() const {
    if (!(a > -1.0 && a < 1.0) || !std::isfinite(a))
      throw ParameterError("weight exponent a must lie in (-1,1), got " + std::to_string(a));
    if (!(s > 0.0 && s < 1.0))
      throw ParameterError("fractional order s must lie in (0,1), got " + std::to_string(s));
    if (n < 1) throw ParameterError("dimension n must be >= 1");
  }

  /// Desk-scale builders (quadrature, solver) only accept n in {1,2}.
  void require_desk_scale() const {
    validate();
    if (n > 2) throw ParameterError("only n in {1,2} is supported here, got n=" + std::to_string(n));
  }

  /// lambda(alpha) = alpha (alpha + n + a - 1).
  double eigenvalue(double alpha) const { return alpha * (alpha + n + a - 1.0); }

  /// kappa_{alpha,mu} = (alpha - mu) / (alpha + mu + n + a - 1).
  double kappa(double alpha, double mu) const { return (alpha - mu) / (alpha + mu + n + a - 1.0); }

  /// Scaling exponent of the bulk term for a mu-homogeneous field: n + a + 2mu - 1.
  double energy_denominator(double mu) const { return n + a + 2.0 * mu - 1.0; }
};

inline double eigenvalue_of_degree(const Params& p, double alpha) {
  if (alpha < 0.0) throw ParameterError("degree must be nonnegative");
  return p.eigenvalue(alpha);
}

}  // namespace fol
