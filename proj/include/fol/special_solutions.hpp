#pragma once

/**
 * @file special_solutions.hpp
 * @brief Closed-form homogeneous solutions, profiles and the zero-obstacle reduction.
 */

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "fol/errors.hpp"
#include "fol/harmonic.hpp"
#include "fol/params.hpp"
#include "fol/polynomial.hpp"

namespace fol {

/// Direction e in R^n and order s of the regular (1+s)-homogeneous profile.
struct RegularProfile {
  std::vector<double> e;
  double s = 0.5;

  RegularProfile() = default;
  RegularProfile(std::vector<double> dir, double order) : e(std::move(dir)), s(order) {
    double nrm = 0.0;
    for (double v : e) nrm += v * v;
    nrm = std::sqrt(nrm);
    if (e.empty() || nrm == 0.0) throw ParameterError("profile direction must be nonzero");
    for (double& v : e) v /= nrm;
    if (!(s > 0.0 && s < 1.0)) throw ParameterError("profile order s must lie in (0,1)");
  }

  double dot(const double* x) const {
    double t = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) t += x[i] * e[i];
    return t;
  }
};

namespace detail {
/// (ρ + ξ) evaluated without cancellation when ξ < 0.
inline double rho_plus_xi(double xi, double y, double rho) {
  if (xi >= 0.0) return rho + xi;
  return y * y / (rho - xi);
}
}  // namespace detail

/// h(x,y) = (s^{-1} ξ - ρ)(ρ + ξ)^s with ξ = x·e, ρ = sqrt(ξ² + y²). Point = (x_1..x_n, y).
inline double eval_h_e_s(const RegularProfile& prof, const double* X) {
  const std::size_t n = prof.e.size();
  const double xi = prof.dot(X);
  const double y = X[n];
  const double rho = std::hypot(xi, y);
  if (rho == 0.0) return 0.0;
  const double rp = detail::rho_plus_xi(xi, y, rho);
  if (rp == 0.0) return 0.0;
  return (xi / prof.s - rho) * std::pow(rp, prof.s);
}

/**
 * Value and gradient. Closed forms: ∂_ξ h = (1/s - s)(ρ+ξ)^s and
 * ∂_y h = -(1+s) y (ρ+ξ)^{s-1}.
 */
inline double eval_h_e_s_grad(const RegularProfile& prof, const double* X, double* grad) {
  const std::size_t n = prof.e.size();
  const double s = prof.s;
  const double xi = prof.dot(X);
  const double y = X[n];
  const double rho = std::hypot(xi, y);
  for (std::size_t i = 0; i <= n; ++i) grad[i] = 0.0;
  if (rho == 0.0) return 0.0;
  const double rp = detail::rho_plus_xi(xi, y, rho);
  if (rp == 0.0) {
    // on the contact half-line the y-derivative is singular for a<0; report 0
    return 0.0;
  }
  const double rps = std::pow(rp, s);
  const double dxi = (1.0 / s - s) * rps;
  for (std::size_t i = 0; i < n; ++i) grad[i] = dxi * prof.e[i];
  grad[n] = -(1.0 + s) * y * rps / rp;
  return (xi / s - rho) * rps;
}

inline double neumann_constant(double s) { return std::pow(2.0, 1.0 - s) * (1.0 + s); }

/// lim_{y→0+} y^a ∂_y h at (x, 0): -c_s |x·e|^{1-s} on {x·e < 0}, else 0.
inline double neumann_trace_h_e_s(const RegularProfile& prof, const double* x) {
  const double xi = prof.dot(x);
  if (xi >= 0.0) return 0.0;
  return -neumann_constant(prof.s) * std::pow(-xi, 1.0 - prof.s);
}

/// The two y-profiles: |y|^{1+s} (regular competitor) and |y|^{2s} (negative energy).
enum class U0Kind { Plus, Flat };

inline double u0_exponent(U0Kind k, double s) { return k == U0Kind::Plus ? 1.0 + s : 2.0 * s; }

inline double eval_u0(U0Kind k, double s, double y) { return std::pow(std::fabs(y), u0_exponent(k, s)); }

/// L_a |y|^q = q(q - 1 + a) |y|^{q-2} (pointwise, y ≠ 0).
inline double La_of_power(double q, double a, double y) {
  return q * (q - 1.0 + a) * std::pow(std::fabs(y), q - 2.0);
}

/// Even L_a-harmonic polynomial in (x, y).
template <class T>
struct HarmonicPolynomial {
  Polynomial<T> poly;
  int degree = 0;
  bool even = true;
};

template <class T>
HarmonicPolynomial<T> make_h_2m(int n, const T& a, int m) {
  return {build_h_2m<T>(n, a, m), 2 * m, true};
}

// ---------------------------------------------------------------------------
// Reduction to zero obstacle

/// Obstacle on R^n with (optional) partial derivatives.
struct Obstacle {
  int n = 1;
  std::function<double(const double*)> value;
  /// ∂^β φ(x); may be empty when no derivative data is available.
  std::function<double(const Exponents&, const double*)> derivative;
  int max_derivative_order = 0;
};

/**
 * Pieces of u^{x0} = u - q̃_k(· - x0) - (φ - q_k(· - x0)). Polynomials are in the
 * shifted variable ξ = x - x0.
 */
struct ReducedProblem {
  Params params;
  std::vector<double> x0;
  int k = 2;
  double gamma = 1.0;
  Polynomial<double> taylor;     ///< q_k(ξ), n variables
  Polynomial<double> extension;  ///< q̃_k(ξ, y), n+1 variables
  Obstacle obstacle;
  double estimate_constant = 0.0;  ///< max |h| / |x - x0|^{k+γ-2} on samples

  std::vector<double> shifted(const double* x) const {
    std::vector<double> out(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) out[i] = x[i] - x0[i];
    return out;
  }

  /// h(x) = Δ_x(φ - q_k)(x).
  double h(const double* x) const {
    const int n = params.n;
    double lap = 0.0;
    for (int i = 0; i < n; ++i) {
      Exponents e(static_cast<std::size_t>(n), 0);
      e[static_cast<std::size_t>(i)] = 2;
      lap += obstacle.derivative(e, x);
    }
    auto xi = shifted(x);
    return lap - taylor.laplacian(n).evaluate(xi);
  }

  /// φ(x) - q_k(x - x0).
  double correction(const double* x) const {
    auto xi = shifted(x);
    return obstacle.value(x) - taylor.evaluate(xi);
  }

  /// Offset added to u to produce v; X = (x, y).
  double offset(const double* X) const {
    const int n = params.n;
    std::vector<double> xy(static_cast<std::size_t>(n + 1));
    for (int i = 0; i < n; ++i) xy[static_cast<std::size_t>(i)] = X[i] - x0[static_cast<std::size_t>(i)];
    xy[static_cast<std::size_t>(n)] = X[n];
    return extension.evaluate(xy) + correction(X);
  }

  double to_reduced(double u, const double* X) const { return u - offset(X); }
  double from_reduced(double v, const double* X) const { return v + offset(X); }
};

inline ReducedProblem reduce_obstacle(const Params& p, const Obstacle& phi, const std::vector<double>& x0, int k,
                                      double gamma = 1.0, int samples = 400) {
  p.validate();
  if (k < 2) throw ParameterError("reduction needs k >= 2");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ParameterError("gamma must lie in (0,1]");
  if (static_cast<int>(x0.size()) != p.n || phi.n != p.n) throw InvalidInput("base point dimension mismatch");
  if (!phi.value || !phi.derivative || phi.max_derivative_order < k)
    throw InvalidInput("obstacle needs derivatives up to order " + std::to_string(k));
  ReducedProblem rp;
  rp.params = p;
  rp.x0 = x0;
  rp.k = k;
  rp.gamma = gamma;
  rp.obstacle = phi;
  rp.taylor = Polynomial<double>(p.n);
  for (int d = 0; d <= k; ++d) {
    for (const auto& beta : monomials_of_degree(p.n, d)) {
      double fact = 1.0;
      for (int b : beta)
        for (int j = 2; j <= b; ++j) fact *= j;
      double c = phi.derivative(beta, x0.data()) / fact;
      if (c != 0.0) rp.taylor.add_term(beta, c);
    }
  }
  rp.extension = extend_La_harmonic(rp.taylor, p.a);
  // deterministic samples on rays through x0
  double cmax = 0.0;
  std::vector<double> x(static_cast<std::size_t>(p.n));
  for (int i = 1; i <= samples; ++i) {
    double r = std::pow(0.5, 12.0 * i / samples);
    double ang = 2.0 * std::numbers::pi * i * 0.6180339887498949;
    if (p.n == 1) {
      x[0] = x0[0] + (i % 2 == 0 ? r : -r);
    } else {
      x[0] = x0[0] + r * std::cos(ang);
      x[1] = x0[1] + r * std::sin(ang);
    }
    double hv = std::fabs(rp.h(x.data()));
    cmax = std::max(cmax, hv / std::pow(r, k + gamma - 2.0));
  }
  rp.estimate_constant = cmax;
  return rp;
}

/// Polynomial obstacle with exact derivatives.
inline Obstacle polynomial_obstacle(const Polynomial<double>& q) {
  Obstacle o;
  o.n = q.dim();
  o.value = [q](const double* x) { return q.evaluate(x); };
  o.derivative = [q](const Exponents& beta, const double* x) {
    Polynomial<double> d = q;
    for (std::size_t i = 0; i < beta.size(); ++i)
      for (int j = 0; j < beta[i]; ++j) d = d.derivative(static_cast<int>(i));
    return d.evaluate(x);
  };
  o.max_derivative_order = 1 << 20;
  return o;
}

/// |x|^pw (pw > 2) with exact derivatives up to order 2; the 2-jet at 0 vanishes.
inline Obstacle power_obstacle(int n, double pw) {
  Obstacle o;
  o.n = n;
  auto norm = [n](const double* x) {
    double r2 = 0.0;
    for (int i = 0; i < n; ++i) r2 += x[i] * x[i];
    return std::sqrt(r2);
  };
  o.value = [norm, pw](const double* x) { return std::pow(norm(x), pw); };
  o.derivative = [norm, n, pw](const Exponents& beta, const double* x) -> double {
    int order = 0;
    for (int b : beta) order += b;
    double r = norm(x);
    if (r == 0.0) return 0.0;
    if (order == 0) return std::pow(r, pw);
    if (order == 1) {
      for (int i = 0; i < n; ++i)
        if (beta[static_cast<std::size_t>(i)] == 1) return pw * std::pow(r, pw - 2.0) * x[i];
    }
    if (order == 2) {
      int i = -1, j = -1;
      for (int t = 0; t < n; ++t)
        for (int c = 0; c < beta[static_cast<std::size_t>(t)]; ++c) (i < 0 ? i : j) = t;
      double v = pw * (pw - 2.0) * std::pow(r, pw - 4.0) * x[i] * x[j];
      if (i == j) v += pw * std::pow(r, pw - 2.0);
      return v;
    }
    throw InvalidInput("power obstacle only provides derivatives up to order 2");
  };
  o.max_derivative_order = 2;
  return o;
}

}  // namespace fol
