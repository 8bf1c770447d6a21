#pragma once

/**
 * @file weiss.hpp
 * @brief Weiss energies, boundary quantities, frequencies and their monitors.
 *
 * Quadrature route: polar coordinates about a thin-space point x0, a dyadic
 * composite rule in the radius and a weighted sphere rule. Spectral route:
 * closed forms in the eigen-coefficients.
 */

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fol/energy.hpp"
#include "fol/errors.hpp"
#include "fol/parallel.hpp"
#include "fol/params.hpp"
#include "fol/quadrature.hpp"
#include "fol/special_solutions.hpp"
#include "fol/spectrum.hpp"

namespace fol {

// ---------------------------------------------------------------------------
// Fields

/// Scalar field on (a subset of) R^{n+1}, points X = (x_1..x_n, y).
struct Field {
  int n = 1;
  /// Value at X; also writes ∇v(X) when grad is non-null.
  std::function<double(const double*, double*)> eval;
  /// Distance from X to the edge of the domain of definition (empty: whole space).
  std::function<double(const double*)> boundary_distance;

  double operator()(const double* X) const { return eval(X, nullptr); }
  double value_grad(const double* X, double* grad) const { return eval(X, grad); }
  double distance_to_boundary(const double* X) const {
    return boundary_distance ? boundary_distance(X) : std::numeric_limits<double>::infinity();
  }
};

inline Field field_from_polynomial(const Polynomial<double>& P) {
  Field f;
  f.n = P.dim() - 1;
  f.eval = [P](const double* X, double* g) { return g ? P.evaluate_with_gradient(X, g) : P.evaluate(X); };
  return f;
}

/// scale · h_e^s.
inline Field field_from_profile(const RegularProfile& prof, double scale = 1.0) {
  Field f;
  f.n = static_cast<int>(prof.e.size());
  f.eval = [prof, scale, n = f.n](const double* X, double* g) {
    if (!g) return scale * eval_h_e_s(prof, X);
    double v = eval_h_e_s_grad(prof, X, g);
    for (int i = 0; i <= n; ++i) g[i] *= scale;
    return scale * v;
  };
  return f;
}

/// Central-difference gradient around a value-only callback.
inline Field field_with_fd_gradient(std::function<double(const double*)> v, int n, double step = 1e-6) {
  Field f;
  f.n = n;
  f.eval = [v, n, step](const double* X, double* g) {
    const double val = v(X);
    if (g) {
      std::vector<double> P(X, X + n + 1);
      for (int i = 0; i <= n; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        const double hstep = step * std::max(1.0, std::fabs(X[i]));
        P[iu] = X[i] + hstep;
        const double fp = v(P.data());
        P[iu] = X[i] - hstep;
        const double fm = v(P.data());
        P[iu] = X[i];
        g[i] = (fp - fm) / (2.0 * hstep);
      }
    }
    return val;
  };
  return f;
}

namespace detail {

/// Evaluates r^μ·T(X/r) for a TraceVec T, with gradient, using the natural
/// homogeneous extension of every atom.
class HomogeneousEvaluator {
 public:
  HomogeneousEvaluator(const EigenBasis& basis, const TraceVec& t, double mu, std::optional<RegularProfile> prof)
      : n_(basis.params.n), s_(basis.params.s), mu_(mu), h_(t.h), up_(t.u0_plus), uf_(t.u0_flat) {
    if (t.h != 0.0) {
      if (!prof) throw InvalidInput("trace uses the regular profile but no direction was given");
      prof_ = *prof;
    }
    for (int d = 0; d <= basis.max_degree; ++d) {
      Polynomial<double> q(n_ + 1);
      bool any = false;
      for (std::size_t k : basis.indices_of_degree(d)) {
        const double c = t.modes(static_cast<Eigen::Index>(k));
        if (c != 0.0) {
          q += basis.modes[k].poly * c;
          any = true;
        }
      }
      if (any) groups_.emplace_back(d, std::move(q));
    }
  }

  double operator()(const double* X, double* g) const {
    const int dim = n_ + 1;
    double r2 = 0.0;
    for (int i = 0; i < dim; ++i) r2 += X[i] * X[i];
    const double r = std::sqrt(r2);
    if (g)
      for (int i = 0; i < dim; ++i) g[i] = 0.0;
    if (r == 0.0) return 0.0;
    double val = 0.0;
    std::vector<double> ga(static_cast<std::size_t>(dim));
    // contribution of c·A with A homogeneous of degree d, value A, gradient ga
    auto add = [&](double c, double d, double A, const double* GA) {
      const double sc = std::pow(r, mu_ - d);
      val += c * sc * A;
      if (g) {
        const double rad = (mu_ - d) * sc / r2 * A;
        for (int i = 0; i < dim; ++i) g[i] += c * (rad * X[i] + sc * GA[i]);
      }
    };
    for (const auto& [d, q] : groups_) {
      const double A = g ? q.evaluate_with_gradient(X, ga.data()) : q.evaluate(X);
      add(1.0, d, A, ga.data());
    }
    if (h_ != 0.0) {
      const double A = g ? eval_h_e_s_grad(prof_, X, ga.data()) : eval_h_e_s(prof_, X);
      add(h_, 1.0 + s_, A, ga.data());
    }
    const double y = X[n_];
    for (auto [c, pw] : {std::pair{up_, 1.0 + s_}, std::pair{uf_, 2.0 * s_}}) {
      if (c == 0.0) continue;
      std::fill(ga.begin(), ga.end(), 0.0);
      const double ay = std::fabs(y);
      const double A = std::pow(ay, pw);
      if (ay > 0.0) ga[static_cast<std::size_t>(n_)] = pw * A / y;
      add(c, pw, A, ga.data());
    }
    return val;
  }

 private:
  int n_;
  double s_, mu_, h_, up_, uf_;
  RegularProfile prof_;
  std::vector<std::pair<int, Polynomial<double>>> groups_;
};

}  // namespace detail

/// Σ r^{μ_i} T_i as a field.
inline Field field_from_homogeneous(const ProfileAlgebra& alg, const HomField& terms) {
  std::vector<detail::HomogeneousEvaluator> evs;
  for (const auto& t : terms) evs.emplace_back(alg.basis(), t.trace, t.degree, alg.profile());
  Field f;
  f.n = alg.params().n;
  f.eval = [evs, dim = f.n + 1](const double* X, double* g) {
    double v = 0.0;
    std::vector<double> gt(static_cast<std::size_t>(dim));
    if (g)
      for (int i = 0; i < dim; ++i) g[i] = 0.0;
    for (const auto& ev : evs) {
      v += ev(X, g ? gt.data() : nullptr);
      if (g)
        for (int i = 0; i < dim; ++i) g[i] += gt[static_cast<std::size_t>(i)];
    }
    return v;
  };
  return f;
}

/// μ-homogeneous extension r^μ Σ c_k φ_k(θ).
inline Field field_from_spectral(const EigenBasis& basis, const Eigen::VectorXd& c, double mu) {
  detail::HomogeneousEvaluator ev(basis, TraceVec::from_modes(c), mu, std::nullopt);
  Field f;
  f.n = basis.params.n;
  f.eval = [ev](const double* X, double* g) { return ev(X, g); };
  return f;
}

/// μ-homogeneous extension of a sampled trace; gradient by central differences.
inline Field field_from_trace(const TraceFn& tr, double mu, int n) {
  auto value = [tr, mu, n](const double* X) {
    double r2 = 0.0;
    for (int i = 0; i <= n; ++i) r2 += X[i] * X[i];
    const double r = std::sqrt(r2);
    if (r == 0.0) return 0.0;
    std::vector<double> th(static_cast<std::size_t>(n + 1));
    for (int i = 0; i <= n; ++i) th[static_cast<std::size_t>(i)] = X[i] / r;
    return std::pow(r, mu) * tr(th.data());
  };
  return field_with_fd_gradient(value, n);
}

// ---------------------------------------------------------------------------
// Quadrature rules

struct WeissRules {
  SphereQuadrature sphere;
  Rule1D radial;   ///< dyadic composite on [0, 1]
  Rule1D annulus;  ///< Gauss–Legendre on [0, 1] for shells between radii
};

/**
 * Default rules. The graded sphere rule resolves the |y|^{2s}-type behaviour
 * of obstacle solutions near the contact set; the plain rule is exact on
 * polynomial fields. For n = 2, focus azimuths (free boundary directions on the
 * thin circle, e.g. the two zeros of x.e for h_e^s) cluster the circle nodes
 * where the field is singular.
 */
inline WeissRules make_weiss_rules(const Params& p, int order = 20, bool graded = true, int radial_levels = 30,
                                   int radial_points = 10, const std::vector<double>& focus_azimuths = {}) {
  WeissRules w;
  w.sphere = graded ? build_graded_sphere_quadrature(p, order, 80, 8, focus_azimuths) : build_sphere_quadrature(p, order);
  w.radial = graded_radial_rule(1.0, radial_levels, radial_points);
  w.annulus = gauss_legendre(radial_points, 0.0, 1.0);
  return w;
}

namespace detail {

inline std::vector<double> base_point(const std::vector<double>& x0, int n) {
  std::vector<double> X(static_cast<std::size_t>(n + 1), 0.0);
  if (x0.empty()) return X;  // origin
  if (static_cast<int>(x0.size()) == n) {
    std::copy(x0.begin(), x0.end(), X.begin());
  } else if (static_cast<int>(x0.size()) == n + 1) {
    if (x0.back() != 0.0) throw ParameterError("base point must lie on the thin space y = 0");
    std::copy(x0.begin(), x0.end(), X.begin());
  } else {
    throw InvalidInput("base point dimension mismatch");
  }
  return X;
}

inline void check_radius(const Field& v, const std::vector<double>& X0, double r) {
  if (!(r > 0.0) || !std::isfinite(r)) throw ParameterError("radius must be positive");
  const double dist = v.distance_to_boundary(X0.data());
  if (r > dist * (1.0 + 1e-12)) throw ParameterError("radius exceeds the distance to the domain boundary");
}

/// Σ_i w_i f(x0 + ρθ_i, θ_i) over the sphere rule.
template <class F>
double shell_sum(const SphereQuadrature& q, const std::vector<double>& X0, double rho, F&& f) {
  const int dim = q.dim;
  std::vector<double> X(static_cast<std::size_t>(dim));
  double sum = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double* th = q.node(i);
    for (int k = 0; k < dim; ++k) X[static_cast<std::size_t>(k)] = X0[static_cast<std::size_t>(k)] + rho * th[k];
    sum += q.weights[i] * f(X.data(), th);
  }
  return sum;
}

/// ∫_{B_hi \ B_lo} g |y|^a in polar form with the given unit rule on [0,1].
template <class G>
double shell_integral(const Field& v, const WeissRules& rules, const std::vector<double>& X0, double lo, double hi,
                      const Rule1D& unit, G&& g) {
  const Params& p = rules.sphere.params;
  const int dim = p.n + 1;
  std::vector<double> grad(static_cast<std::size_t>(dim));
  double total = 0.0;
  for (std::size_t j = 0; j < unit.nodes.size(); ++j) {
    const double rho = lo + (hi - lo) * unit.nodes[j];
    if (rho <= 0.0) continue;
    const double s = shell_sum(rules.sphere, X0, rho, [&](const double* X, const double*) {
      const double val = v.value_grad(X, grad.data());
      return g(X, val, grad.data());
    });
    total += (hi - lo) * unit.weights[j] * std::pow(rho, p.n + p.a) * s;
  }
  return total;
}

inline double grad_sq(const double* g, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += g[i] * g[i];
  return s;
}

}  // namespace detail

/// ∫_{B_r(x0)} |∇v|² |y|^a.
inline double bulk_dirichlet(const Field& v, const std::vector<double>& x0, double r, const WeissRules& rules) {
  auto X0 = detail::base_point(x0, v.n);
  detail::check_radius(v, X0, r);
  const int dim = v.n + 1;
  return detail::shell_integral(v, rules, X0, 0.0, r, rules.radial,
                                [dim](const double*, double, const double* g) { return detail::grad_sq(g, dim); });
}

/// H(r) = ∫_{∂B_r(x0)} v² |y|^a.
inline double boundary_H(const Field& v, const std::vector<double>& x0, double r, const WeissRules& rules) {
  auto X0 = detail::base_point(x0, v.n);
  detail::check_radius(v, X0, r);
  const Params& p = rules.sphere.params;
  return std::pow(r, p.n + p.a) * detail::shell_sum(rules.sphere, X0, r, [&](const double* X, const double*) {
           const double val = v(X);
           return val * val;
         });
}

struct BoundaryQuantities {
  double H = 0.0;  ///< ∫_{∂B_r} v² |y|^a
  double I = 0.0;  ///< ∫_{∂B_r} v ∂_ν v |y|^a, flux form
  double D = 0.0;  ///< ∫_{B_r} |∇v|² |y|^a, the bulk cross-check of I
};

/**
 * H and the flux form of I. ∂_ν v uses a fourth-order difference in r with
 * step 1% of r, shrunk near the domain edge; below 1e-6 r it switches to ∇v·θ.
 */
inline BoundaryQuantities boundary_quantities(const Field& v, const std::vector<double>& x0, double r,
                                              const WeissRules& rules) {
  auto X0 = detail::base_point(x0, v.n);
  detail::check_radius(v, X0, r);
  const Params& p = rules.sphere.params;
  const int dim = v.n + 1;
  const double dist = v.distance_to_boundary(X0.data());
  double delta = 0.01 * r;
  if (std::isfinite(dist)) delta = std::min(delta, (dist - r) / 2.0);
  const bool fd = delta > 1e-6 * r;
  std::vector<double> Y(static_cast<std::size_t>(dim)), grad(static_cast<std::size_t>(dim));
  double hsum = 0.0, isum = 0.0;
  for (std::size_t i = 0; i < rules.sphere.size(); ++i) {
    const double* th = rules.sphere.node(i);
    auto at = [&](double rho, double* g) {
      for (int k = 0; k < dim; ++k) Y[static_cast<std::size_t>(k)] = X0[static_cast<std::size_t>(k)] + rho * th[k];
      return v.value_grad(Y.data(), g);
    };
    double dr;
    const double val = at(r, fd ? nullptr : grad.data());
    if (fd) {
      dr = (-at(r + 2 * delta, nullptr) + 8 * at(r + delta, nullptr) - 8 * at(r - delta, nullptr) +
            at(r - 2 * delta, nullptr)) /
           (12.0 * delta);
    } else {
      dr = 0.0;
      for (int k = 0; k < dim; ++k) dr += grad[static_cast<std::size_t>(k)] * th[k];
    }
    hsum += rules.sphere.weights[i] * val * val;
    isum += rules.sphere.weights[i] * val * dr;
  }
  BoundaryQuantities b;
  const double scale = std::pow(r, p.n + p.a);
  b.H = scale * hsum;
  b.I = scale * isum;
  b.D = bulk_dirichlet(v, x0, r, rules);
  return b;
}

/// W_λ(r) = r^{-(n+a+2λ-1)} ∫_{B_r} |∇v|²|y|^a - λ r^{-(n+a+2λ)} ∫_{∂B_r} v²|y|^a.
inline double weiss_quadrature(const Field& v, double lambda, const std::vector<double>& x0, double r,
                               const WeissRules& rules) {
  const Params& p = rules.sphere.params;
  const double e = p.n + p.a + 2.0 * lambda;
  const double D = bulk_dirichlet(v, x0, r, rules);
  const double H = boundary_H(v, x0, r, rules);
  return D / std::pow(r, e - 1.0) - lambda * H / std::pow(r, e);
}

/// 𝒲_λ(r) = W_λ(r) + r^{-(n+a+2λ-1)} ∫_{B_r} v h |y|^a. An empty h gives W_λ.
inline double weiss_modified(const Field& v, const std::function<double(const double*)>& h,
                             const std::vector<double>& x0, double r, double lambda, const WeissRules& rules) {
  const double W = weiss_quadrature(v, lambda, x0, r, rules);
  if (!h) return W;
  const Params& p = rules.sphere.params;
  auto X0 = detail::base_point(x0, v.n);
  const double coupling = detail::shell_integral(v, rules, X0, 0.0, r, rules.radial,
                                                 [&h](const double* X, double val, const double*) { return val * h(X); });
  return W + coupling / std::pow(r, p.n + p.a + 2.0 * lambda - 1.0);
}

/// N(r) = r D(r) / H(r); empty when H(r) vanishes (degenerate point signal).
inline std::optional<double> almgren_N(const Field& v, const std::vector<double>& x0, double r,
                                       const WeissRules& rules) {
  const double H = boundary_H(v, x0, r, rules);
  if (!(H > 0.0)) return std::nullopt;
  return r * bulk_dirichlet(v, x0, r, rules) / H;
}

/// Parameters of the generalized frequency and of the modified-Weiss monitor.
struct FrequencyParams {
  double C = 0.0;       ///< coefficient of r^{1+p} in Φ
  double p = 0.5;       ///< p in (0, γ]
  int k = 2;            ///< obstacle regularity C^{k,γ}
  double gamma = 1.0;
  double lambda = 1.5;  ///< homogeneity used by W, 𝒲
  double Cw = 0.0;      ///< coefficient of r^{k+γ-λ} in the 𝒲 monitor

  double truncation_exponent(const Params& pr) const { return pr.n + pr.a + 2.0 * (k + gamma - p); }
};

/// Φ(r) = (r + C r^{1+p}) d/dr log max{H(r), r^{n+a+2(k+γ-p)}}, centered difference in log r.
inline double phi_frequency(const Field& v, const std::vector<double>& x0, double r, const FrequencyParams& fp,
                            const WeissRules& rules, double log_step = 0.05) {
  const Params& pr = rules.sphere.params;
  const double te = fp.truncation_exponent(pr);
  auto logM = [&](double rho) {
    const double H = boundary_H(v, x0, rho, rules);
    return std::max(H > 0.0 ? std::log(H) : -std::numeric_limits<double>::infinity(), te * std::log(rho));
  };
  const double up = r * std::exp(log_step), dn = r * std::exp(-log_step);
  const double L = (logM(up) - logM(dn)) / (2.0 * log_step);
  return (1.0 + fp.C * std::pow(r, fp.p)) * L;
}

// ---------------------------------------------------------------------------
// Spectral route

/// W_μ(r^α φ) = Σ c_k² ((λ_k + α²)/(n+a+2α-1) - μ), the general homogeneous form.
inline double weiss_homogeneous(const EigenBasis& basis, const Eigen::VectorXd& c, double alpha, double mu) {
  const Params& p = basis.params;
  const double D = p.energy_denominator(alpha);
  if (!(D > 0.0)) throw ParameterError("non-integrable homogeneity: n+a+2α-1 <= 0");
  double s = 0.0;
  for (std::size_t k = 0; k < basis.size(); ++k) {
    const double ck = c(static_cast<Eigen::Index>(k));
    s += ck * ck * ((basis.modes[k].eigenvalue + alpha * alpha) / D - mu);
  }
  return s;
}

/// W_μ(r^μ φ) = (n+a+2μ-1)^{-1} Σ (λ_k - λ(μ)) c_k².
inline double weiss_spectral(const EigenBasis& basis, const SpectralTrace& c, double mu) {
  const Params& p = basis.params;
  const double D = p.energy_denominator(mu);
  if (!(D > 0.0)) throw ParameterError("weiss_spectral needs n+a+2μ-1 > 0");
  const double lm = p.eigenvalue(mu);
  double s = 0.0;
  for (std::size_t k = 0; k < basis.size(); ++k) {
    const double ck = c.coefficients(static_cast<Eigen::Index>(k));
    s += (basis.modes[k].eigenvalue - lm) * ck * ck;
  }
  return s / D;
}

struct CrossIdentity {
  double lhs = 0.0;  ///< W_μ(r^α φ) - (1 - κ) W_μ(r^μ φ)
  double rhs = 0.0;  ///< κ/(n+a+2α-1) Σ (λ(α) - λ_k) c_k²
  double kappa = 0.0;
};

/// Both sides of the α-to-μ comparison identity with signed κ = κ_{α,μ}.
inline CrossIdentity weiss_cross(const EigenBasis& basis, const SpectralTrace& c, double alpha, double mu) {
  const Params& p = basis.params;
  if (alpha < 0.0 || mu < 0.0) throw ParameterError("homogeneities must be nonnegative");
  const double Da = p.energy_denominator(alpha);
  if (!(Da > 0.0) || !(alpha + mu + p.n + p.a - 1.0 > 0.0)) throw ParameterError("nonpositive denominator");
  CrossIdentity out;
  out.kappa = p.kappa(alpha, mu);
  out.lhs = weiss_homogeneous(basis, c.coefficients, alpha, mu) - (1.0 - out.kappa) * weiss_spectral(basis, c, mu);
  const double la = p.eigenvalue(alpha);
  double s = 0.0;
  for (std::size_t k = 0; k < basis.size(); ++k) {
    const double ck = c.coefficients(static_cast<Eigen::Index>(k));
    s += (la - basis.modes[k].eigenvalue) * ck * ck;
  }
  out.rhs = out.kappa / Da * s;
  return out;
}

struct ShiftIdentity {
  double at_shifted = 0.0;  ///< W_μ(r^{μ+t} c) = t ‖c‖²
  double at_mu = 0.0;       ///< W_μ(r^μ c) = (1 + t/(n+a+2μ-1)) W_μ(r^{μ+t} c)
};

/// Energies of a caller-asserted (μ+t)-homogeneous solution trace; ‖c‖² includes the residual.
inline ShiftIdentity weiss_shift(const Params& p, const SpectralTrace& c, double mu, double t) {
  const double norm2 = c.coefficients.squaredNorm() + c.residual_norm * c.residual_norm;
  const double D = p.energy_denominator(mu);
  if (!(D > 0.0)) throw ParameterError("weiss_shift needs n+a+2μ-1 > 0");
  ShiftIdentity s;
  s.at_shifted = t * norm2;
  s.at_mu = (1.0 + t / D) * s.at_shifted;
  return s;
}

// ---------------------------------------------------------------------------
// Frequency profiles and monitors

struct FrequencyProfile {
  Params params;
  FrequencyParams fp;
  std::vector<double> radii;  ///< strictly decreasing
  std::vector<double> H_values, I_values, D_values, N_values, Phi_values, W_values, Wmod_values;
  std::vector<double> logM_slope;  ///< d log max{H, r^{…}} / d log r
  std::vector<char> degenerate;    ///< H(r) = 0

  void validate() const {
    const std::size_t m = radii.size();
    for (const auto* v : {&H_values, &I_values, &N_values, &Phi_values, &W_values, &Wmod_values})
      if (v->size() != m) throw ConsistencyError("frequency profile columns have different lengths");
    for (std::size_t i = 1; i < m; ++i)
      if (!(radii[i] < radii[i - 1])) throw ConsistencyError("frequency profile radii must decrease strictly");
    for (double h : H_values)
      if (h < 0.0) throw ConsistencyError("negative H in frequency profile");
  }

  /// Φ recomputed from the stored slopes for the current C.
  void refresh_phi() {
    Phi_values.resize(radii.size());
    for (std::size_t i = 0; i < radii.size(); ++i)
      Phi_values[i] = (1.0 + fp.C * std::pow(radii[i], fp.p)) * logM_slope[i];
  }

  /// H(r)/r^{n+a+2λ}.
  std::vector<double> H_scaled() const {
    std::vector<double> out(radii.size());
    const double e = params.n + params.a + 2.0 * fp.lambda;
    for (std::size_t i = 0; i < radii.size(); ++i) out[i] = H_values[i] / std::pow(radii[i], e);
    return out;
  }

  /// 𝒲(r) + Cw r^{k+γ-λ}.
  std::vector<double> Wmod_monitor() const {
    std::vector<double> out(radii.size());
    const double e = fp.k + fp.gamma - fp.lambda;
    for (std::size_t i = 0; i < radii.size(); ++i) out[i] = Wmod_values[i] + fp.Cw * std::pow(radii[i], e);
    return out;
  }

  std::string to_csv() const {
    std::ostringstream os;
    os << "r,H,I,N,Phi,W,Wmod\n";
    char buf[512];
    for (std::size_t i = 0; i < radii.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", radii[i], H_values[i],
                    I_values[i], N_values[i], Phi_values[i], W_values[i], Wmod_values[i]);
      os << buf;
    }
    return os.str();
  }

  void write_csv(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path);
    f << to_csv();
    if (!f) throw IoError("write failed for " + path);
  }
};

/// Geometric radii r_max, ratio·r_max, … down to r_min (at most `count` values).
inline std::vector<double> geometric_radii(double r_max, double r_min, double ratio = 0.9, int count = 40) {
  if (!(r_max > 0.0) || !(r_min > 0.0) || r_min > r_max) throw ParameterError("invalid radii range");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ParameterError("radii ratio must lie in (0,1)");
  std::vector<double> out;
  for (double r = r_max; r >= r_min * (1.0 - 1e-12) && static_cast<int>(out.size()) < count; r *= ratio) out.push_back(r);
  return out;
}

/**
 * Profile over a radii grid. Bulk integrals are accumulated shell by shell, so
 * the cost is one graded inner ball plus one shell per radius.
 */
inline FrequencyProfile build_frequency_profile(const Field& v, const std::vector<double>& x0,
                                                std::vector<double> radii, const FrequencyParams& fp,
                                                const WeissRules& rules,
                                                const std::function<double(const double*)>& h = {}) {
  if (radii.size() < 3) throw ParameterError("frequency profile needs at least three radii");
  std::sort(radii.begin(), radii.end(), std::greater<>());
  for (std::size_t i = 1; i < radii.size(); ++i)
    if (!(radii[i] < radii[i - 1])) throw ParameterError("radii must be distinct");
  const Params& p = rules.sphere.params;
  auto X0 = detail::base_point(x0, v.n);
  detail::check_radius(v, X0, radii.front());
  const std::size_t m = radii.size();
  const int dim = v.n + 1;

  // shells: piece j covers (radii[j+1], radii[j]); the last piece is the ball B_{radii[m-1]}
  std::vector<double> dpiece(m), cpiece(m);
  std::vector<BoundaryQuantities> bq(m);
  parallel_for(2 * m, [&](std::size_t task) {
    if (task < m) {
      const std::size_t j = task;
      const bool ball = j + 1 == m;
      const double lo = ball ? 0.0 : radii[j + 1];
      const Rule1D& unit = ball ? rules.radial : rules.annulus;
      dpiece[j] = detail::shell_integral(v, rules, X0, lo, radii[j], unit,
                                         [dim](const double*, double, const double* g) { return detail::grad_sq(g, dim); });
      cpiece[j] = h ? detail::shell_integral(v, rules, X0, lo, radii[j], unit,
                                             [&h](const double* X, double val, const double*) { return val * h(X); })
                    : 0.0;
    } else {
      const std::size_t i = task - m;
      auto X = detail::base_point(x0, v.n);
      // H and I only; D comes from the accumulated shells
      const double dist = v.distance_to_boundary(X.data());
      double delta = 0.01 * radii[i];
      if (std::isfinite(dist)) delta = std::min(delta, (dist - radii[i]) / 2.0);
      const bool fd = delta > 1e-6 * radii[i];
      std::vector<double> Y(static_cast<std::size_t>(dim)), grad(static_cast<std::size_t>(dim));
      double hs = 0.0, is = 0.0;
      for (std::size_t q = 0; q < rules.sphere.size(); ++q) {
        const double* th = rules.sphere.node(q);
        auto at = [&](double rho, double* g) {
          for (int k = 0; k < dim; ++k) Y[static_cast<std::size_t>(k)] = X[static_cast<std::size_t>(k)] + rho * th[k];
          return v.value_grad(Y.data(), g);
        };
        const double r = radii[i];
        const double val = at(r, fd ? nullptr : grad.data());
        double dr = 0.0;
        if (fd) {
          dr = (-at(r + 2 * delta, nullptr) + 8 * at(r + delta, nullptr) - 8 * at(r - delta, nullptr) +
                at(r - 2 * delta, nullptr)) /
               (12.0 * delta);
        } else {
          for (int k = 0; k < dim; ++k) dr += grad[static_cast<std::size_t>(k)] * th[k];
        }
        hs += rules.sphere.weights[q] * val * val;
        is += rules.sphere.weights[q] * val * dr;
      }
      const double sc = std::pow(radii[i], p.n + p.a);
      bq[i].H = sc * hs;
      bq[i].I = sc * is;
    }
  });

  FrequencyProfile fpro;
  fpro.params = p;
  fpro.fp = fp;
  fpro.radii = radii;
  fpro.H_values.resize(m);
  fpro.I_values.resize(m);
  fpro.D_values.resize(m);
  fpro.N_values.resize(m);
  fpro.W_values.resize(m);
  fpro.Wmod_values.resize(m);
  fpro.degenerate.assign(m, 0);
  double Dacc = 0.0, Cacc = 0.0;
  for (std::size_t jj = m; jj-- > 0;) {
    Dacc += dpiece[jj];
    Cacc += cpiece[jj];
    const double r = radii[jj];
    const double e = p.n + p.a + 2.0 * fp.lambda;
    fpro.H_values[jj] = bq[jj].H;
    fpro.I_values[jj] = bq[jj].I;
    fpro.D_values[jj] = Dacc;
    if (bq[jj].H > 0.0) {
      fpro.N_values[jj] = r * Dacc / bq[jj].H;
    } else {
      fpro.N_values[jj] = std::numeric_limits<double>::quiet_NaN();
      fpro.degenerate[jj] = 1;
    }
    fpro.W_values[jj] = Dacc / std::pow(r, e - 1.0) - fp.lambda * bq[jj].H / std::pow(r, e);
    fpro.Wmod_values[jj] = fpro.W_values[jj] + Cacc / std::pow(r, e - 1.0);
  }
  // log-derivative of max{H, r^te} on the grid
  const double te = fp.truncation_exponent(p);
  std::vector<double> lm(m), lr(m);
  for (std::size_t i = 0; i < m; ++i) {
    lr[i] = std::log(radii[i]);
    lm[i] = std::max(fpro.H_values[i] > 0.0 ? std::log(fpro.H_values[i]) : -std::numeric_limits<double>::infinity(),
                     te * lr[i]);
  }
  fpro.logM_slope.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = i + 1 == m ? m - 1 : i + 1;
    fpro.logM_slope[i] = (lm[b] - lm[a]) / (lr[b] - lr[a]);
  }
  fpro.refresh_phi();
  fpro.validate();
  return fpro;
}

/// Linear-in-r extrapolation from the smallest radius r1 and the radius nearest 2 r1.
inline double extrapolate_to_zero(const std::vector<double>& radii, const std::vector<double>& values) {
  if (radii.size() != values.size() || radii.size() < 2) throw ParameterError("extrapolation needs two samples");
  std::size_t i1 = 0;
  for (std::size_t i = 0; i < radii.size(); ++i)
    if (radii[i] < radii[i1]) i1 = i;
  const double r1 = radii[i1];
  std::size_t i2 = i1 == 0 ? 1 : 0;
  for (std::size_t i = 0; i < radii.size(); ++i)
    if (i != i1 && std::fabs(radii[i] - 2.0 * r1) < std::fabs(radii[i2] - 2.0 * r1)) i2 = i;
  const double r2 = radii[i2];
  return (r2 * values[i1] - r1 * values[i2]) / (r2 - r1);
}

struct MonotonicityReport {
  bool ok = true;
  double worst_excess = 0.0;  ///< largest decrease beyond the allowance (<= 0 when ok)
  std::size_t worst_index = 0;
};

/**
 * Checks r ↦ values nondecreasing on decreasing radii: values[i] >= values[i+1]
 * up to factor·max(err[i], err[i+1]). Non-finite entries are skipped.
 */
inline MonotonicityReport check_nondecreasing(const std::vector<double>& radii, const std::vector<double>& values,
                                              const std::vector<double>& err, double factor = 10.0) {
  if (radii.size() != values.size() || err.size() != values.size()) throw ParameterError("monitor length mismatch");
  MonotonicityReport rep;
  rep.worst_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    if (!std::isfinite(values[i]) || !std::isfinite(values[i + 1])) continue;
    const double allowance = factor * std::max(err[i], err[i + 1]);
    const double excess = (values[i + 1] - values[i]) - allowance;
    if (excess > rep.worst_excess) {
      rep.worst_excess = excess;
      rep.worst_index = i;
    }
  }
  if (!std::isfinite(rep.worst_excess)) rep.worst_excess = 0.0;
  rep.ok = rep.worst_excess <= 0.0;
  return rep;
}

struct CalibratedConstant {
  double C = 0.0;
  bool feasible = true;
};

/// Smallest C >= 0 making Φ = (1 + C r^p) L nondecreasing up to the allowance.
inline CalibratedConstant calibrate_phi_constant(const FrequencyProfile& prof, const std::vector<double>& err,
                                                 double factor = 10.0) {
  CalibratedConstant out;
  double lo = 0.0, hi = std::numeric_limits<double>::infinity();
  const auto& L = prof.logM_slope;
  for (std::size_t i = 0; i + 1 < L.size(); ++i) {
    if (!std::isfinite(L[i]) || !std::isfinite(L[i + 1])) continue;
    const double tol = factor * std::max(err[i], err[i + 1]);
    const double A = std::pow(prof.radii[i], prof.fp.p) * L[i] - std::pow(prof.radii[i + 1], prof.fp.p) * L[i + 1];
    const double B = L[i + 1] - L[i] - tol;
    if (A > 0.0) {
      lo = std::max(lo, B / A);
    } else if (A < 0.0) {
      hi = std::min(hi, B / A);
    } else if (B > 0.0) {
      out.feasible = false;
    }
  }
  if (lo > hi) out.feasible = false;
  out.C = lo;
  return out;
}

/// Smallest Cw >= 0 making 𝒲 + Cw r^{k+γ-λ} nondecreasing up to the allowance.
inline CalibratedConstant calibrate_weiss_constant(const FrequencyProfile& prof, const std::vector<double>& err,
                                                   double factor = 10.0) {
  const double e = prof.fp.k + prof.fp.gamma - prof.fp.lambda;
  if (!(e > 0.0)) throw PreconditionError("the modified Weiss monitor needs λ < k + γ");
  CalibratedConstant out;
  for (std::size_t i = 0; i + 1 < prof.radii.size(); ++i) {
    const double tol = factor * std::max(err[i], err[i + 1]);
    const double d = std::pow(prof.radii[i], e) - std::pow(prof.radii[i + 1], e);
    const double need = (prof.Wmod_values[i + 1] - prof.Wmod_values[i] - tol) / d;
    out.C = std::max(out.C, need);
  }
  return out;
}

/// H'(r) - (n+a)/r H(r) - 2 I(r) on the grid, H' by centered differences.
inline std::vector<double> derivative_identity_residuals(const FrequencyProfile& prof) {
  const std::size_t m = prof.radii.size();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 1; i + 1 < m; ++i) {
    const double dH = (prof.H_values[i - 1] - prof.H_values[i + 1]) / (prof.radii[i - 1] - prof.radii[i + 1]);
    out[i] = dH - (prof.params.n + prof.params.a) / prof.radii[i] * prof.H_values[i] - 2.0 * prof.I_values[i];
  }
  return out;
}

}  // namespace fol
