#pragma once

/**
 * @file quadrature.hpp
 * @brief Exact weighted sphere moments and quadrature rules.
 *
 * The weighted measure is |θ_{n+1}|^a dH^n on the unit sphere of R^{n+1}.
 * Sphere rules use the height u = θ_{n+1} and t = u^2, where the measure
 * becomes t^{(a-1)/2} (1-t)^{(n-2)/2} dt times the equatorial sphere measure,
 * so Gauss–Jacobi nodes in t never touch the equator.
 */

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "fol/errors.hpp"
#include "fol/params.hpp"
#include "fol/polynomial.hpp"

namespace fol {

/// Gamma-product sphere integral of prod_i |θ_i|^{p_i} times |θ_{n+1}|^a.
/// Requires p_i > -1 and p_{n+1} + a > -1.
inline double sphere_abs_moment(const std::vector<double>& powers, double a) {
  const std::size_t d = powers.size();
  if (d < 2) throw ParameterError("sphere moment needs at least two coordinates");
  double log_num = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double p = powers[i] + (i + 1 == d ? a : 0.0);
    if (p <= -1.0) throw ParameterError("non-integrable sphere moment");
    log_num += std::lgamma((p + 1.0) / 2.0);
    total += p + 1.0;
  }
  return 2.0 * std::exp(log_num - std::lgamma(total / 2.0));
}

/// ∫_{∂B_1} θ^e |θ_{n+1}|^a dH^n; zero as soon as one exponent is odd.
inline double monomial_moment(const Exponents& e, double a) {
  if (!(a > -1.0 && a < 1.0)) throw ParameterError("weight exponent a must lie in (-1,1)");
  std::vector<double> p(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (e[i] < 0) throw ParameterError("negative exponent in monomial moment");
    if (e[i] % 2 != 0) return 0.0;
    p[i] = e[i];
  }
  return sphere_abs_moment(p, a);
}

/// Moment of θ^e |θ_{n+1}|^{a+extra}: used for profiles |y|^{extra}.
inline double monomial_moment_extra(const Exponents& e, double a, double extra) {
  std::vector<double> p(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (e[i] % 2 != 0) return 0.0;
    p[i] = e[i];
  }
  p.back() += extra;
  return sphere_abs_moment(p, a);
}

/// Exact weighted integral of a polynomial restricted to the sphere.
template <class T>
double sphere_integral(const Polynomial<T>& p, double a, double extra = 0.0) {
  double sum = 0.0;
  for (const auto& [e, c] : p.terms()) sum += to_double(c) * monomial_moment_extra(e, a, extra);
  return sum;
}

inline double total_mass(const Params& p) {
  return monomial_moment(Exponents(static_cast<std::size_t>(p.n + 1), 0), p.a);
}

/// One-dimensional rule on an interval.
struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/**
 * Golub–Welsch rule for ∫_{-1}^{1} f(x) (1-x)^alpha (1+x)^beta dx.
 */
inline Rule1D gauss_jacobi(int npts, double alpha, double beta) {
  if (npts < 1) throw ParameterError("Gauss-Jacobi needs at least one node");
  if (alpha <= -1.0 || beta <= -1.0) throw ParameterError("Jacobi exponents must exceed -1");
  const double ab = alpha + beta;
  Eigen::VectorXd diag(npts);
  Eigen::VectorXd sub(std::max(npts - 1, 1));
  diag(0) = (beta - alpha) / (ab + 2.0);
  for (int k = 1; k < npts; ++k) {
    double t = 2.0 * k + ab;
    diag(k) = (beta * beta - alpha * alpha) / (t * (t + 2.0));
  }
  for (int k = 1; k < npts; ++k) {
    double t = 2.0 * k + ab;
    double b2;
    if (k == 1) {
      b2 = 4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab) * (2.0 + ab) * (3.0 + ab));
    } else {
      b2 = 4.0 * k * (k + alpha) * (k + beta) * (k + ab) / (t * t * (t + 1.0) * (t - 1.0));
    }
    sub(k - 1) = std::sqrt(b2);
  }
  const double mu0 = std::exp((ab + 1.0) * std::log(2.0) + std::lgamma(alpha + 1.0) +
                              std::lgamma(beta + 1.0) - std::lgamma(ab + 2.0));
  Rule1D r;
  r.nodes.resize(static_cast<std::size_t>(npts));
  r.weights.resize(static_cast<std::size_t>(npts));
  if (npts == 1) {
    r.nodes[0] = diag(0);
    r.weights[0] = mu0;
    return r;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  Eigen::VectorXd subv = sub.head(npts - 1);
  es.computeFromTridiagonal(diag, subv, Eigen::ComputeEigenvectors);
  for (int i = 0; i < npts; ++i) {
    r.nodes[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    double v0 = es.eigenvectors()(0, i);
    r.weights[static_cast<std::size_t>(i)] = mu0 * v0 * v0;
  }
  return r;
}

/// Gauss–Legendre on [lo, hi].
inline Rule1D gauss_legendre(int npts, double lo, double hi) {
  Rule1D r = gauss_jacobi(npts, 0.0, 0.0);
  const double half = 0.5 * (hi - lo);
  for (std::size_t i = 0; i < r.nodes.size(); ++i) {
    r.nodes[i] = lo + half * (r.nodes[i] + 1.0);
    r.weights[i] *= half;
  }
  return r;
}

/// Rule for ∫_0^1 f(t) t^p (1-t)^q dt.
inline Rule1D gauss_jacobi_unit(int npts, double p, double q) {
  Rule1D r = gauss_jacobi(npts, q, p);
  const double scale = std::exp(-(p + q + 1.0) * std::log(2.0));
  for (std::size_t i = 0; i < r.nodes.size(); ++i) {
    r.nodes[i] = 0.5 * (r.nodes[i] + 1.0);
    r.weights[i] *= scale;
  }
  return r;
}

/**
 * Composite Gauss–Legendre on [0, r] with dyadic grading toward 0; resolves
 * integrands with power-type behaviour at the origin.
 */
inline Rule1D graded_radial_rule(double r, int levels = 30, int npts = 10) {
  Rule1D out;
  double hi = r;
  for (int j = 0; j <= levels; ++j) {
    double lo = (j == levels) ? 0.0 : 0.5 * hi;
    Rule1D g = gauss_legendre(npts, lo, hi);
    out.nodes.insert(out.nodes.end(), g.nodes.begin(), g.nodes.end());
    out.weights.insert(out.weights.end(), g.weights.begin(), g.weights.end());
    hi = lo;
  }
  return out;
}

/// Nodes on the unit sphere of R^{n+1} with weights for |θ_{n+1}|^a dH^n.
struct SphereQuadrature {
  Params params;
  int dim = 2;  ///< n + 1
  int exactness_degree = 0;
  std::vector<double> nodes;  ///< flattened, dim entries per node
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  const double* node(std::size_t i) const { return nodes.data() + i * static_cast<std::size_t>(dim); }

  template <class F>
  double integrate(F&& f) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < size(); ++i) sum += weights[i] * f(node(i));
    return sum;
  }
};

namespace detail {

/// Tensor a rule in t = θ_{n+1}^2 (weights already carrying the t-weight) with
/// the equatorial rule: the two points ±1 for n = 1, a uniform circle for n = 2.
inline SphereQuadrature tensor_sphere_rule(const Params& p, const Rule1D& tr, int circle_points, int exactness,
                                           const Rule1D* angles = nullptr) {
  SphereQuadrature q;
  q.params = p;
  q.dim = p.n + 1;
  q.exactness_degree = exactness;
  std::vector<std::vector<double>> eq;
  std::vector<double> eqw;
  if (p.n == 1) {
    eq = {{1.0}, {-1.0}};
    eqw = {1.0, 1.0};
  } else if (angles) {
    for (std::size_t k = 0; k < angles->nodes.size(); ++k) {
      eq.push_back({std::cos(angles->nodes[k]), std::sin(angles->nodes[k])});
      eqw.push_back(angles->weights[k]);
    }
  } else {
    for (int k = 0; k < circle_points; ++k) {
      double ang = 2.0 * std::numbers::pi * (k + 0.5) / circle_points;
      eq.push_back({std::cos(ang), std::sin(ang)});
      eqw.push_back(2.0 * std::numbers::pi / circle_points);
    }
  }
  for (std::size_t i = 0; i < tr.nodes.size(); ++i) {
    const double u = std::sqrt(tr.nodes[i]);
    const double rad = std::sqrt(std::max(0.0, 1.0 - tr.nodes[i]));
    for (int sgn : {1, -1}) {
      for (std::size_t j = 0; j < eq.size(); ++j) {
        for (double c : eq[j]) q.nodes.push_back(rad * c);
        q.nodes.push_back(sgn * u);
        q.weights.push_back(0.5 * tr.weights[i] * eqw[j]);
      }
    }
  }
  return q;
}

}  // namespace detail

/**
 * Gauss–Jacobi in t = θ_{n+1}^2 with weight t^{(a-1)/2}(1-t)^{(n-2)/2},
 * tensored with the equatorial rule. Exact on even polynomials of degree <= order.
 */
inline SphereQuadrature build_sphere_quadrature(const Params& p, int order) {
  p.require_desk_scale();
  if (order < 2) throw ParameterError("sphere quadrature order must be >= 2");
  const int nt = order / 2 + 2;
  Rule1D tr = gauss_jacobi_unit(nt, (p.a - 1.0) / 2.0, (p.n - 2) / 2.0);
  return detail::tensor_sphere_rule(p, tr, order + 2, order);
}

/**
 * Composite rule in t with dyadic panels toward the equator t = 0. Meant for
 * integrands with extra |y|-power singularities (|y|^{2s}-type behaviour of
 * solutions near the contact set). Panels: [1/2, 1] Gauss–Jacobi in (1-t),
 * [2^{-j-1}, 2^{-j}] Gauss–Legendre, innermost [0, 2^{-panels}] Gauss–Jacobi in t.
 * A |y|^{-a}-type term left on the innermost panel costs about 2^{-panels(1-|a|)/2}.
 */
inline SphereQuadrature build_graded_sphere_quadrature(const Params& p, int order, int panels = 80, int panel_points = 8,
                                                      const std::vector<double>& focus_azimuths = {}) {
  p.require_desk_scale();
  if (order < 2) throw ParameterError("sphere quadrature order must be >= 2");
  if (panels < 1) throw ParameterError("graded sphere rule needs at least one panel");
  const int nt = order / 2 + 2;
  const double pw = (p.a - 1.0) / 2.0;
  const double qw = (p.n - 2) / 2.0;
  Rule1D tr;
  auto push = [&](double t, double w) {
    tr.nodes.push_back(t);
    tr.weights.push_back(w);
  };
  {
    Rule1D g = gauss_jacobi_unit(nt, 0.0, qw);  // t = 1/2 + τ/2
    const double f = std::pow(0.5, qw + 1.0);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      const double t = 0.5 + 0.5 * g.nodes[i];
      push(t, g.weights[i] * f * std::pow(t, pw));
    }
  }
  double hi = 0.5;
  for (int j = 1; j < panels; ++j) {
    Rule1D g = gauss_legendre(panel_points, 0.5 * hi, hi);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      const double t = g.nodes[i];
      push(t, g.weights[i] * std::pow(t, pw) * std::pow(1.0 - t, qw));
    }
    hi *= 0.5;
  }
  {
    Rule1D g = gauss_jacobi_unit(panel_points, pw, 0.0);  // t = hi τ
    const double f = std::pow(hi, pw + 1.0);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      const double t = hi * g.nodes[i];
      push(t, g.weights[i] * f * std::pow(1.0 - t, qw));
    }
  }
  if (p.n == 2 && !focus_azimuths.empty()) {
    // each arc between consecutive foci is split at its midpoint and graded
    // dyadically toward both ends
    std::vector<double> f = focus_azimuths;
    for (double& w : f) w = w - 2.0 * std::numbers::pi * std::floor(w / (2.0 * std::numbers::pi));
    std::sort(f.begin(), f.end());
    f.erase(std::unique(f.begin(), f.end()), f.end());
    Rule1D ang;
    const int na = std::max(5, order / 4);
    constexpr int levels = 20;
    for (std::size_t k = 0; k < f.size(); ++k) {
      const double lo = f[k];
      const double hi = k + 1 < f.size() ? f[k + 1] : f[0] + 2.0 * std::numbers::pi;
      const double half = 0.5 * (hi - lo);
      double dhi = half;
      for (int j = 0; j <= levels; ++j) {
        const double dlo = j == levels ? 0.0 : 0.5 * dhi;
        Rule1D g = gauss_legendre(na, dlo, dhi);
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
          ang.nodes.push_back(lo + g.nodes[i]);
          ang.weights.push_back(g.weights[i]);
          ang.nodes.push_back(hi - g.nodes[i]);
          ang.weights.push_back(g.weights[i]);
        }
        dhi = dlo;
      }
    }
    return detail::tensor_sphere_rule(p, tr, order + 2, order, &ang);
  }
  return detail::tensor_sphere_rule(p, tr, order + 2, order);
}

/// Real-valued function on the sphere, optionally even in θ_{n+1}.
struct TraceFn {
  std::function<double(const double*)> eval;
  bool even = true;

  double operator()(const double* theta) const { return eval(theta); }
};

inline double inner_product(const TraceFn& f, const TraceFn& g, const SphereQuadrature& q) {
  return q.integrate([&](const double* th) { return f(th) * g(th); });
}

inline double norm_squared(const TraceFn& f, const SphereQuadrature& q) { return inner_product(f, f, q); }

/// Beta function via log-Gamma.
inline double beta_fn(double x, double y) {
  return std::exp(std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y));
}

}  // namespace fol
