#pragma once

/**
 * @file epiperimetric.hpp
 * @brief Competitors and inequality checks for the four epiperimetric inequalities.
 *
 * Two theorems live at homogeneity 1+s and compare against the regular profile
 * h_e^s. Their energies are computed exactly in the ProfileAlgebra. Two live at
 * homogeneity 2m and need only eigenmodes.
 *  - regular:           W(ζ) ≤ (1-κ) W(z), κ = (1+a)/(2n+a+5);
 *  - log:               W(ζ) ≤ W(z)(1 - εΘ^{-β}|W(z)|^β), β = (n-1)/(n+1);
 *  - negative_regular:  W(ζ) ≤ (1+ε) W(z), ε = (1+a)/(2n-a+3);
 *  - negative_2m:       W(ζ) ≤ (1+ε) W(z) for ε small.
 * For the 2m theorems the competitor is only built on the branch where the
 * inequality has content (W(z) > 0 for log, W(z) < 0 for negative_2m); on the
 * other branch ζ = z already satisfies the bound.
 */

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fol/corpus.hpp"
#include "fol/energy.hpp"
#include "fol/errors.hpp"
#include "fol/harmonic.hpp"
#include "fol/parallel.hpp"
#include "fol/params.hpp"
#include "fol/spectrum.hpp"

namespace fol {

enum class Theorem { Regular, Log, NegativeRegular, Negative2m };

inline const char* theorem_name(Theorem t) {
  switch (t) {
    case Theorem::Regular: return "regular";
    case Theorem::Log: return "log";
    case Theorem::NegativeRegular: return "negative_regular";
    case Theorem::Negative2m: return "negative_2m";
  }
  return "?";
}

inline Theorem theorem_from_name(const std::string& s) {
  for (Theorem t : {Theorem::Regular, Theorem::Log, Theorem::NegativeRegular, Theorem::Negative2m})
    if (s == theorem_name(t)) return t;
  throw ParameterError("unknown theorem '" + s + "' (expected regular, log, negative_regular or negative_2m)");
}

/// κ of the regular inequality.
inline double kappa_regular(const Params& p) { return (1.0 + p.a) / (2.0 * p.n + p.a + 5.0); }
/// ε of the negative-energy inequality at 1+s.
inline double epsilon_negative_regular(const Params& p) { return (1.0 + p.a) / (2.0 * p.n - p.a + 3.0); }
/// Exponent of the logarithmic inequality.
inline double log_beta(int n) { return (n - 1.0) / (n + 1.0); }

// ---------------------------------------------------------------------------
// reports

struct CompetitorReport {
  Theorem theorem = Theorem::Regular;
  Params params;
  int m = 0;
  double W_z = 0.0;
  double W_zeta = 0.0;
  double bound = 0.0;
  double margin = 0.0;  ///< bound - W_zeta
  bool pass = false;
  double truncation_budget = 0.0;
  /// κ for the regular and log theorems, ε for the negative ones.
  double constant = 0.0;
  double alpha = 0.0;  ///< homogeneity of the modified part
  double M = 0.0;      ///< lift constant of the 2m theorems
  bool clamped = false;
  bool trivial_branch = false;  ///< ζ = z because the energy has the harmless sign
  bool admissible = true;
  // log theorem extras
  double theta = 0.0;
  std::optional<double> strong_bound, strong_margin;
  std::optional<double> theta_min, theta_min_margin;

  void finalize() {
    margin = bound - W_zeta;
    pass = margin >= -truncation_budget;
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"theorem", theorem_name(theorem)},
                     {"n", params.n},
                     {"a", params.a},
                     {"m", m},
                     {"W_z", W_z},
                     {"W_zeta", W_zeta},
                     {"bound", bound},
                     {"margin", margin},
                     {"pass", pass},
                     {"truncation_budget", truncation_budget},
                     {"constant", constant},
                     {"alpha", alpha},
                     {"M", M},
                     {"clamped", clamped},
                     {"trivial_branch", trivial_branch},
                     {"admissible", admissible}};
    if (theorem == Theorem::Log) {
      j["theta"] = theta;
      if (strong_margin) j["strong_margin"] = *strong_margin;
      if (theta_min) j["theta_min"] = *theta_min;
      if (theta_min_margin) j["theta_min_margin"] = *theta_min_margin;
    }
    return j;
  }
};

namespace detail {

inline double energy_budget(double scale) { return 1e-10 * (1.0 + scale); }

inline double max_eigenvalue(const EigenBasis& b) {
  double l = 0.0;
  for (const auto& m : b.modes) l = std::max(l, m.eigenvalue);
  return l;
}

/// Weiss bilinear form for fields made of eigenmodes only (no algebra needed).
inline double modal_bilinear(const EigenBasis& b, const HomField& f, const HomField& g, double mu) {
  const Params& p = b.params;
  double sum = 0.0;
  for (const auto& tf : f)
    for (const auto& tg : g) {
      if (!tf.trace.is_polynomial() || !tg.trace.is_polynomial()) throw InvalidInput("modal energy needs mode-only traces");
      const double denom = tf.degree + tg.degree + p.n + p.a - 1.0;
      if (!(denom > 0.0)) throw ParameterError("non-integrable homogeneity in energy");
      for (std::size_t k = 0; k < b.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        const double fg = tf.trace.modes(i) * tg.trace.modes(i);
        if (fg != 0.0) sum += fg * ((tf.degree * tg.degree + b.modes[k].eigenvalue) / denom - mu);
      }
    }
  return sum;
}

inline double modal_energy(const EigenBasis& b, const HomField& f, double mu) { return modal_bilinear(b, f, f, mu); }

/// Gradient g_k of each linear mode φ_k(x) = g_k·x.
inline std::vector<std::pair<std::size_t, std::vector<double>>> linear_mode_gradients(const EigenBasis& b) {
  const int n = b.params.n;
  std::vector<std::pair<std::size_t, std::vector<double>>> out;
  for (std::size_t k : b.indices_of_degree(1)) {
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      std::vector<double> th(static_cast<std::size_t>(n + 1), 0.0);
      th[static_cast<std::size_t>(i)] = 1.0;
      g[static_cast<std::size_t>(i)] = b.modes[k](th.data());
    }
    out.emplace_back(k, g);
  }
  return out;
}

}  // namespace detail

/// Value of Σ r^{deg} F(θ) at X ∈ R^{n+1}.
inline double evaluate_field(const ProfileAlgebra& alg, const HomField& f, const double* X) {
  const int n = alg.params().n;
  double r2 = 0.0;
  for (int i = 0; i <= n; ++i) r2 += X[i] * X[i];
  const double r = std::sqrt(r2);
  if (r == 0.0) return 0.0;
  std::vector<double> th(static_cast<std::size_t>(n + 1));
  for (int i = 0; i <= n; ++i) th[static_cast<std::size_t>(i)] = X[i] / r;
  double v = 0.0;
  for (const auto& t : f) v += std::pow(r, t.degree) * alg.evaluate(t.trace, th.data());
  return v;
}

struct Admissibility {
  double min_thin = 0.0;           ///< min of ζ over sampled points of B'_1
  double boundary_mismatch = 0.0;  ///< max |ζ - c| over sampled points of ∂B_1
  bool ok = false;
};

/// Samples ζ ≥ 0 on B'_1 and ζ = c on ∂B_1.
inline Admissibility check_admissibility(const ProfileAlgebra& alg, const HomField& zeta, const TraceVec& c,
                                         double tol = 1e-10) {
  const int n = alg.params().n;
  Admissibility out;
  out.min_thin = std::numeric_limits<double>::infinity();
  const int nang = n == 1 ? 2 : 256;
  for (int j = 0; j < nang; ++j) {
    auto th = thin_sphere_point(n, n == 1 ? j : 2.0 * std::numbers::pi * (j + 0.5) / nang);
    for (int i = 0; i <= 24; ++i) {
      const double r = std::pow(0.75, i);
      std::vector<double> X(th);
      for (double& x : X) x *= r;
      const double v = evaluate_field(alg, zeta, X.data());
      // compare with the scale of the field at that radius
      double scale = 0.0;
      for (const auto& t : zeta) scale = std::max(scale, std::pow(r, t.degree));
      out.min_thin = std::min(out.min_thin, v / scale);
    }
  }
  // boundary: a few rings in the polar angle
  const int npol = 17;
  for (int i = 0; i < npol; ++i) {
    const double ph = std::numbers::pi * (i + 0.5) / npol - std::numbers::pi / 2;
    for (int j = 0; j < (n == 1 ? 2 : 24); ++j) {
      std::vector<double> X(static_cast<std::size_t>(n + 1), 0.0);
      if (n == 1) {
        X[0] = (j == 0 ? 1.0 : -1.0) * std::cos(ph);
      } else {
        const double w = 2.0 * std::numbers::pi * j / 24;
        X[0] = std::cos(ph) * std::cos(w);
        X[1] = std::cos(ph) * std::sin(w);
      }
      X[static_cast<std::size_t>(n)] = std::sin(ph);
      const double d = evaluate_field(alg, zeta, X.data()) - alg.evaluate(c, X.data());
      out.boundary_mismatch = std::max(out.boundary_mismatch, std::fabs(d));
    }
  }
  out.ok = out.min_thin >= -tol && out.boundary_mismatch <= tol * 100.0;
  return out;
}

// ---------------------------------------------------------------------------
// theorems at homogeneity 1 + s

struct DecompositionRegular {
  std::shared_ptr<const ProfileAlgebra> algebra;  ///< carries the direction e
  double C = 0.0;
  std::vector<double> e;
  double c0 = 0.0;
  U0Kind u0_kind = U0Kind::Plus;
  TraceVec trace;  ///< c in algebra coordinates
  TraceVec phi;    ///< c - C h - c0 u0
  double truncation = 0.0;  ///< projection residual of the input, if any
};

/**
 * Splits c = C h_e^s + c0 u0 + φ where φ has no constant or linear content.
 * The trace may contain a multiple of h along e_in; its linear part must then
 * point along e_in. An empty e_in means the trace has no profile part. A
 * multiple of the selected u0 profile is allowed in the input.
 */
inline DecompositionRegular decompose_regular(const EigenBasis& basis, const TraceVec& c, U0Kind kind,
                                              std::vector<double> e_in = {}, double tol = 1e-10) {
  const Params& p = basis.params;
  const int n = p.n;
  if (c.modes.size() != static_cast<Eigen::Index>(basis.size())) throw InvalidInput("trace size does not match basis");
  if (c.u0(kind == U0Kind::Plus ? U0Kind::Flat : U0Kind::Plus) != 0.0)
    throw InvalidInput("decomposition input contains the other u0 profile");
  if (basis.max_degree < 2) throw ParameterError("decomposition needs basis degree >= 2");
  if (e_in.empty()) {
    if (c.h != 0.0) throw InvalidInput("profile part given without its direction");
    e_in.assign(static_cast<std::size_t>(n), 0.0);
    e_in[0] = 1.0;
  }
  auto alg_in = std::make_shared<const ProfileAlgebra>(basis, e_in);
  // admissibility on the thin sphere
  const double scale = std::sqrt(std::max(alg_in->mass(c, c), 1e-300));
  const double mn = thin_sphere_min([&](const double* th) { return alg_in->evaluate(c, th); }, n).value;
  if (mn < -tol * std::max(1.0, scale)) throw InadmissibleTrace("trace is negative on the thin sphere (min " + std::to_string(mn) + ")");

  SpectralTrace st = alg_in->spectral(c);
  const auto grads = detail::linear_mode_gradients(basis);
  std::vector<double> L(static_cast<std::size_t>(n), 0.0);
  for (const auto& [k, g] : grads)
    for (int i = 0; i < n; ++i) L[static_cast<std::size_t>(i)] += st.coefficients(static_cast<Eigen::Index>(k)) * g[static_cast<std::size_t>(i)];
  double Ln = 0.0;
  for (double v : L) Ln += v * v;
  Ln = std::sqrt(Ln);

  DecompositionRegular d;
  d.u0_kind = kind;
  const bool has_linear = Ln > tol * std::max(1.0, scale);
  if (has_linear) {
    d.e = L;
    for (double& v : d.e) v /= Ln;
  } else {
    d.e = alg_in->profile().e;
  }
  if (c.h != 0.0) {
    double dot = 0.0;
    for (int i = 0; i < n; ++i) dot += d.e[static_cast<std::size_t>(i)] * alg_in->profile().e[static_cast<std::size_t>(i)];
    if (has_linear && std::fabs(dot - 1.0) > 1e-9)
      throw InvalidInput("linear part of the trace is not aligned with its profile direction");
    d.algebra = alg_in;
    d.e = alg_in->profile().e;
  } else {
    d.algebra = std::make_shared<const ProfileAlgebra>(basis, d.e);
  }
  const ProfileAlgebra& alg = *d.algebra;
  d.trace = c;

  // projection of h on the linear modes is C_h (x·e)
  std::vector<double> Lh(static_cast<std::size_t>(n), 0.0);
  for (const auto& [k, g] : grads)
    for (int i = 0; i < n; ++i) Lh[static_cast<std::size_t>(i)] += alg.h_inner_mode(k) * g[static_cast<std::size_t>(i)];
  double Ch = 0.0;
  for (int i = 0; i < n; ++i) Ch += Lh[static_cast<std::size_t>(i)] * d.e[static_cast<std::size_t>(i)];
  if (!(Ch > 0.0)) throw ConsistencyError("profile has nonpositive linear projection");
  d.C = has_linear ? Ln / Ch : 0.0;

  const std::size_t k0 = constant_mode_index(basis);
  TraceVec rest = c;
  rest.h -= d.C;
  const double rest0 = alg.spectral(rest).coefficients(static_cast<Eigen::Index>(k0));
  d.c0 = rest0 / alg.u0_inner_mode(kind, k0);
  d.phi = rest;
  d.phi.u0(kind) -= d.c0;
  return d;
}

/// Competitor of the regular inequality: C r^{1+s} h + c0 r^{1+s} u0 + r² φ.
inline HomField competitor_regular(const DecompositionRegular& d) {
  if (d.u0_kind != U0Kind::Plus) throw InvalidInput("the regular competitor uses the |y|^{1+s} profile");
  const double s = d.algebra->params().s;
  TraceVec lead = TraceVec::zeros(d.algebra->basis().size());
  lead.h = d.C;
  lead.u0_plus = d.c0;
  return {{1.0 + s, lead}, {2.0, d.phi}};
}

/// Competitor of the negative inequality at 1+s: C r^{1+s} h + c0 r^{2s} u0 + r^{1+s} φ.
inline HomField competitor_negative_regular(const DecompositionRegular& d) {
  if (d.u0_kind != U0Kind::Flat) throw InvalidInput("the negative competitor uses the |y|^{2s} profile");
  const double s = d.algebra->params().s;
  TraceVec lead = d.phi;
  lead.h += d.C;
  TraceVec flat = TraceVec::zeros(d.algebra->basis().size());
  flat.u0_flat = d.c0;
  return {{1.0 + s, lead}, {2.0 * s, flat}};
}

namespace detail {

inline CompetitorReport regular_report(Theorem th, const DecompositionRegular& d, const HomField& zeta) {
  const ProfileAlgebra& alg = *d.algebra;
  const Params& p = alg.params();
  const double mu = 1.0 + p.s;
  CompetitorReport r;
  r.theorem = th;
  r.params = p;
  r.W_z = weiss_energy(alg, {{mu, d.trace}}, mu);
  r.W_zeta = weiss_energy(alg, zeta, mu);
  if (th == Theorem::Regular) {
    r.constant = kappa_regular(p);
    r.bound = (1.0 - r.constant) * r.W_z;
    r.alpha = 2.0;
  } else {
    r.constant = epsilon_negative_regular(p);
    r.bound = (1.0 + r.constant) * r.W_z;
    r.alpha = 2.0 * p.s;
  }
  const double norm2 = alg.mass(d.trace, d.trace);
  r.truncation_budget = energy_budget(norm2 * (1.0 + max_eigenvalue(alg.basis())) + std::fabs(r.W_z)) + d.truncation;
  r.admissible = check_admissibility(alg, zeta, d.trace).ok;
  r.finalize();
  return r;
}

}  // namespace detail

inline CompetitorReport check_epi_regular(const EigenBasis& basis, const TraceVec& c, const std::vector<double>& e_in = {}) {
  DecompositionRegular d = decompose_regular(basis, c, U0Kind::Plus, e_in);
  return detail::regular_report(Theorem::Regular, d, competitor_regular(d));
}

inline CompetitorReport check_epi_negative_regular(const EigenBasis& basis, const TraceVec& c,
                                                   const std::vector<double>& e_in = {}) {
  DecompositionRegular d = decompose_regular(basis, c, U0Kind::Flat, e_in);
  return detail::regular_report(Theorem::NegativeRegular, d, competitor_negative_regular(d));
}

/// Projects a trace function and decomposes it; the projection residual enters the budget.
inline DecompositionRegular decompose_regular(const EigenBasis& basis, const TraceFn& f, const SphereQuadrature& q,
                                              U0Kind kind) {
  SpectralTrace st = project(f, basis, q);
  DecompositionRegular d = decompose_regular(basis, TraceVec::from_modes(st.coefficients), kind);
  const double lmax = detail::max_eigenvalue(basis);
  const double cn = st.coefficients.norm();
  // the unrepresented part changes each energy by at most (λ_max + μ²)(2‖c‖ρ + ρ²)
  const double mu = 1.0 + basis.params.s;
  d.truncation = 2.0 * (lmax + mu * mu + 2.0) * (2.0 * cn * st.residual_norm + st.residual_norm * st.residual_norm);
  return d;
}

/// Both sides of the energy expansion W_{1+s}(C h + c0 u0 + r^α φ) for mode-only φ.
struct BetaLemma {
  double lhs = 0.0;
  double rhs = 0.0;
};

inline BetaLemma beta_lemma(const ProfileAlgebra& alg, double C, double c0, const Eigen::VectorXd& phi, double alpha) {
  const Params& p = alg.params();
  const double s = p.s, mu = 1.0 + s;
  const int n = p.n;
  TraceVec lead = TraceVec::zeros(alg.basis().size());
  lead.h = C;
  lead.u0_plus = c0;
  TraceVec ph = TraceVec::from_modes(phi);
  BetaLemma out;
  out.lhs = weiss_energy(alg, {{mu, lead}, {alpha, ph}}, mu);
  // ∫_{B_1} |y| dX = ∫_{S^n} |θ_{n+1}| / (n + 2)
  std::vector<double> pw(static_cast<std::size_t>(n + 1), 0.0);
  pw.back() = 1.0;
  const double ybulk = sphere_abs_moment(pw, 0.0) / (n + 2.0);
  // β(φ): unweighted ∫_{∂B_1} φ |θ_{n+1}|^{-s} and the thin flux against (θ'·e)_-^{1-s}
  const auto& b = alg.basis();
  double uint = 0.0, flux = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) {
    const double ck = phi(static_cast<Eigen::Index>(k));
    if (ck == 0.0) continue;
    uint += ck * sphere_integral(b.modes[k].poly, p.a, -s - p.a);
    flux += ck * alg.thin_flux()(static_cast<Eigen::Index>(k));
  }
  const double beta = -2.0 * c0 * (1.0 + s) * (1.0 - s) * uint + 4.0 * neumann_constant(s) * C * flux;
  out.rhs = -c0 * c0 * (1.0 + s) * (1.0 - s) * ybulk + weiss_energy(alg, {{alpha, ph}}, mu) + beta / (n + alpha + 1.0 - s);
  return out;
}

/// The four pieces of W(ζ) - (1+ε) W(z) for the negative inequality at 1+s.
struct NegativeTerms {
  double I = 0.0, J = 0.0, K = 0.0, L = 0.0;
  double difference = 0.0;  ///< W(ζ) - (1+ε) W(z) computed directly
};

inline NegativeTerms negative_regular_terms(const DecompositionRegular& d) {
  const ProfileAlgebra& alg = *d.algebra;
  const Params& p = alg.params();
  const double s = p.s, mu = 1.0 + s, eps = epsilon_negative_regular(p);
  const std::size_t K = alg.basis().size();
  TraceVec u0 = TraceVec::zeros(K), h = TraceVec::zeros(K);
  u0.u0_flat = 1.0;
  h.h = 1.0;
  NegativeTerms t;
  t.I = d.c0 * d.c0 * (weiss_energy(alg, {{2.0 * s, u0}}, mu) - (1.0 + eps) * weiss_energy(alg, {{mu, u0}}, mu));
  t.J = -eps * weiss_energy(alg, {{mu, d.phi}}, mu);
  t.K = 2.0 * d.c0 *
        (weiss_bilinear(alg, {{2.0 * s, u0}}, {{mu, d.phi}}, mu) - (1.0 + eps) * weiss_bilinear(alg, {{mu, u0}}, {{mu, d.phi}}, mu));
  t.L = -2.0 * d.C * eps * weiss_bilinear(alg, {{mu, h}}, {{mu, d.phi}}, mu);
  const HomField zeta = competitor_negative_regular(d);
  t.difference = weiss_energy(alg, zeta, mu) - (1.0 + eps) * weiss_energy(alg, {{mu, d.trace}}, mu);
  return t;
}

// ---------------------------------------------------------------------------
// theorems at homogeneity 2m

/// Trace coefficients of h_{2m} in the basis (it is a degree-2m mode combination).
inline Eigen::VectorXd h2m_coefficients(const EigenBasis& b, int m) {
  if (m < 1) throw ParameterError("m must be >= 1");
  if (b.max_degree < 2 * m + 1) throw ParameterError("basis degree must be at least 2m+1");
  return project_polynomial(build_h_2m<double>(b.params.n, b.params.a, m), b);
}

/// Explicit constants of the log inequality.
struct LogConstants {
  double h2m_norm2 = 0.0;
  double C1 = 0.0;     ///< ‖h_{2m}‖² max_α (α+2m+n+a-1)²/(n+a+2α-1), α ≤ 2m+1/2
  double Cbar = 0.0;   ///< min_α 1/(n+a+2α-1)
  double Cbar2 = 0.0;  ///< (λ(2m+1) - λ(2m+1/2)) / λ(2m+1)
  double C2 = 0.0;     ///< Cbar·Cbar2
};

inline LogConstants log_constants(const EigenBasis& b, int m) {
  const Params& p = b.params;
  LogConstants c;
  c.h2m_norm2 = h2m_coefficients(b, m).squaredNorm();
  const double am = 2.0 * m + 0.5;
  const double num = am + 2.0 * m + p.n + p.a - 1.0;
  // (α+2m+n+a-1)²/(n+a+2α-1) increases in α for α > 2m
  c.C1 = c.h2m_norm2 * num * num / p.energy_denominator(am);
  c.Cbar = 1.0 / p.energy_denominator(am);
  c.Cbar2 = (p.eigenvalue(2.0 * m + 1.0) - p.eigenvalue(am)) / p.eigenvalue(2.0 * m + 1.0);
  c.C2 = c.Cbar * c.Cbar2;
  return c;
}

/// Explicit constants of the negative inequality at 2m.
struct Negative2mConstants {
  double h2m_norm2 = 0.0;
  double C1 = 0.0;  ///< λ(2m-1/2) - λ(2m-1)
  double C0 = 0.0;  ///< sup of M²/‖P̄‖² = max over ∂B'_1 of Σ_{α_k<2m} φ_k²
  double eps_max = 0.0;        ///< κ_{2m,2m-1/2}: largest ε with α in (2m-1/2, 2m)
  double eps_candidate = 0.0;  ///< C1 / (C0 ‖h_{2m}‖² (4m+n)²)
};

inline Negative2mConstants negative_2m_constants(const EigenBasis& b, int m) {
  const Params& p = b.params;
  Negative2mConstants c;
  c.h2m_norm2 = h2m_coefficients(b, m).squaredNorm();
  c.C1 = p.eigenvalue(2.0 * m - 0.5) - p.eigenvalue(2.0 * m - 1.0);
  std::vector<std::size_t> low;
  for (std::size_t k = 0; k < b.size(); ++k)
    if (b.modes[k].degree < 2 * m) low.push_back(k);
  auto neg_sum = [&](const double* th) {
    double acc = 0.0;
    for (std::size_t k : low) {
      const double v = b.modes[k](th);
      acc += v * v;
    }
    return -acc;
  };
  c.C0 = -thin_sphere_min(neg_sum, p.n).value;
  c.eps_max = p.kappa(2.0 * m, 2.0 * m - 0.5);
  const double q = 4.0 * m + p.n;
  c.eps_candidate = c.C1 / (c.C0 * c.h2m_norm2 * q * q);
  return c;
}

struct Decomposition2m {
  int m = 1;
  Eigen::VectorXd P;    ///< low part (degree ≤ 2m for log, < 2m for negative_2m)
  Eigen::VectorXd phi;  ///< high part
  Eigen::VectorXd h2m;  ///< trace coefficients of h_{2m}
  double M = 0.0;       ///< max of P_- on ∂B'_1
  double theta = 0.0;
  double alpha = 0.0;
  double kappa = 0.0;  ///< κ_{α,2m} (log) or ε = κ_{2m,α} (negative_2m)
  double grad_phi2 = 0.0;  ///< ‖∇_θ φ‖²
  bool clamped = false;
};

namespace detail {

inline void split_at_degree(const EigenBasis& b, const Eigen::VectorXd& c, int cut, bool inclusive, Eigen::VectorXd& low,
                            Eigen::VectorXd& high) {
  low = Eigen::VectorXd::Zero(c.size());
  high = Eigen::VectorXd::Zero(c.size());
  for (std::size_t k = 0; k < b.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const int d = b.modes[k].degree;
    if (d < cut || (inclusive && d == cut))
      low(i) = c(i);
    else
      high(i) = c(i);
  }
}

inline double thin_negative_max(const EigenBasis& b, const Eigen::VectorXd& P) {
  const double mn = thin_sphere_min([&](const double* th) { return evaluate_trace(b, P, th); }, b.params.n).value;
  return std::max(0.0, -mn);
}

inline void check_thin_admissible(const EigenBasis& b, const Eigen::VectorXd& c) {
  const double mn = thin_sphere_min([&](const double* th) { return evaluate_trace(b, c, th); }, b.params.n).value;
  if (mn < -1e-10 * std::max(1.0, c.norm()))
    throw InadmissibleTrace("trace is negative on the thin sphere (min " + std::to_string(mn) + ")");
}

}  // namespace detail

struct Competitor2m {
  HomField zeta;
  Decomposition2m decomposition;
  CompetitorReport report;
};

/**
 * Logarithmic competitor r^{2m}P + M r^{2m} h_{2m} - M r^α h_{2m} + r^α φ with
 * κ_{α,2m} = εΘ^{-β}‖∇_θφ‖^{2β}, α clamped to (2m, 2m+1/2].
 */
inline Competitor2m competitor_log(const EigenBasis& b, const Eigen::VectorXd& c, int m, double Theta, double eps,
                                   bool with_theta_min = true) {
  const Params& p = b.params;
  if (!(eps > 0.0)) throw ParameterError("ε must be positive");
  if (!(Theta > 0.0)) throw ParameterError("Θ must be positive");
  if (c.size() != static_cast<Eigen::Index>(b.size())) throw InvalidInput("trace size does not match basis");
  detail::check_thin_admissible(b, c);
  const double mu = 2.0 * m;
  const double beta = log_beta(p.n);
  Competitor2m out;
  Decomposition2m& d = out.decomposition;
  d.m = m;
  d.theta = Theta;
  d.h2m = h2m_coefficients(b, m);
  detail::split_at_degree(b, c, 2 * m, true, d.P, d.phi);
  d.M = detail::thin_negative_max(b, d.P);
  d.grad_phi2 = tangential_energy(b, d.phi);
  const HomField z{{mu, TraceVec::from_modes(c)}};
  CompetitorReport& r = out.report;
  r.theorem = Theorem::Log;
  r.params = p;
  r.m = m;
  r.theta = Theta;
  r.M = d.M;
  r.W_z = detail::modal_energy(b, z, mu);
  const double norm2 = c.squaredNorm();
  if (norm2 > Theta * (1.0 + 1e-12) || std::fabs(r.W_z) > Theta * (1.0 + 1e-12))
    throw PreconditionError("log inequality needs ‖c‖² ≤ Θ and |W(z)| ≤ Θ");
  r.constant = eps;
  r.bound = r.W_z * (1.0 - eps * std::pow(Theta, -beta) * std::pow(std::fabs(r.W_z), beta));
  r.truncation_budget = detail::energy_budget(norm2 * (1.0 + detail::max_eigenvalue(b)));
  if (r.W_z <= 0.0) {
    // nothing to prove: ζ = z
    r.trivial_branch = true;
    d.alpha = mu;
    out.zeta = z;
    r.alpha = mu;
    r.W_zeta = r.W_z;
  } else {
    d.kappa = eps * std::pow(Theta, -beta) * std::pow(d.grad_phi2, beta);
    const double amax = mu + 0.5;
    double alpha = d.kappa < 1.0 ? (mu + d.kappa * (mu + p.n + p.a - 1.0)) / (1.0 - d.kappa) : amax;
    if (alpha > amax) {
      alpha = amax;
      d.clamped = true;
      d.kappa = p.kappa(alpha, mu);
    }
    d.alpha = alpha;
    TraceVec low = TraceVec::from_modes(d.P + d.M * d.h2m);
    TraceVec high = TraceVec::from_modes(d.phi - d.M * d.h2m);
    out.zeta = {{mu, low}, {alpha, high}};
    r.alpha = alpha;
    r.clamped = d.clamped;
    r.W_zeta = detail::modal_energy(b, out.zeta, mu);
    const LogConstants lc = log_constants(b, m);
    const double extra = lc.C2 * eps / 2.0 * std::pow(Theta, -beta) * std::pow(d.grad_phi2, 1.0 + beta);
    r.strong_bound = r.bound - extra;
    r.strong_margin = *r.strong_bound - r.W_zeta;
  }
  r.finalize();
  if (with_theta_min) {
    const double tmin = std::max(norm2, std::fabs(r.W_z));
    if (tmin > 0.0) {
      r.theta_min = tmin;
      r.theta_min_margin = competitor_log(b, c, m, tmin, eps, false).report.margin;
    }
  }
  return out;
}

/// Both sides of W(ζ) - (1-κ)W(z) ≤ C1 M² κ² - C2 κ ‖∇_θφ‖² on the nontrivial branch.
struct Log1Check {
  double lhs = 0.0;
  double rhs = 0.0;
  bool applicable = false;
};

inline Log1Check log1_check(const EigenBasis& b, const Competitor2m& comp) {
  Log1Check out;
  if (comp.report.trivial_branch) return out;
  const auto& d = comp.decomposition;
  const LogConstants lc = log_constants(b, d.m);
  out.applicable = true;
  out.lhs = comp.report.W_zeta - (1.0 - d.kappa) * comp.report.W_z;
  out.rhs = lc.C1 * d.M * d.M * d.kappa * d.kappa - lc.C2 * d.kappa * d.grad_phi2;
  return out;
}

/**
 * Negative competitor at 2m: r^α P̄ + M r^α h_{2m} - M r^{2m} h_{2m} + r^{2m} φ̄
 * with κ_{2m,α} = ε, α ∈ (2m-1/2, 2m).
 */
inline Competitor2m competitor_negative_2m(const EigenBasis& b, const Eigen::VectorXd& c, int m, double eps) {
  const Params& p = b.params;
  if (!(eps > 0.0)) throw ParameterError("ε must be positive");
  if (c.size() != static_cast<Eigen::Index>(b.size())) throw InvalidInput("trace size does not match basis");
  const double norm2 = c.squaredNorm();
  if (norm2 > 1.0 + 1e-12) throw PreconditionError("negative inequality at 2m needs ‖c‖² ≤ 1");
  detail::check_thin_admissible(b, c);
  const double mu = 2.0 * m;
  const double alpha = (mu - eps * (mu + p.n + p.a - 1.0)) / (1.0 + eps);
  if (!(alpha > mu - 0.5)) throw ParameterError("ε too large: the competitor homogeneity leaves (2m-1/2, 2m)");
  Competitor2m out;
  Decomposition2m& d = out.decomposition;
  d.m = m;
  d.h2m = h2m_coefficients(b, m);
  detail::split_at_degree(b, c, 2 * m, false, d.P, d.phi);
  d.M = detail::thin_negative_max(b, d.P);
  d.alpha = alpha;
  d.kappa = eps;
  const HomField z{{mu, TraceVec::from_modes(c)}};
  CompetitorReport& r = out.report;
  r.theorem = Theorem::Negative2m;
  r.params = p;
  r.m = m;
  r.M = d.M;
  r.constant = eps;
  r.W_z = detail::modal_energy(b, z, mu);
  r.bound = (1.0 + eps) * r.W_z;
  r.truncation_budget = detail::energy_budget(norm2 * (1.0 + detail::max_eigenvalue(b)));
  if (r.W_z >= 0.0) {
    r.trivial_branch = true;
    out.zeta = z;
    r.alpha = mu;
    r.W_zeta = r.W_z;
  } else {
    TraceVec low = TraceVec::from_modes(d.P + d.M * d.h2m);
    TraceVec high = TraceVec::from_modes(d.phi - d.M * d.h2m);
    out.zeta = {{alpha, low}, {mu, high}};
    r.alpha = alpha;
    r.W_zeta = detail::modal_energy(b, out.zeta, mu);
  }
  r.finalize();
  return out;
}

inline CompetitorReport check_epi_negative_2m(const EigenBasis& b, const Eigen::VectorXd& c, int m, double eps) {
  return competitor_negative_2m(b, c, m, eps).report;
}

/// Sampled admissibility of a mode-only competitor against its trace.
inline Admissibility check_admissibility_modal(const EigenBasis& b, const HomField& zeta, const Eigen::VectorXd& c) {
  ProfileAlgebra alg(b, [&] {
    std::vector<double> e(static_cast<std::size_t>(b.params.n), 0.0);
    e[0] = 1.0;
    return e;
  }());
  return check_admissibility(alg, zeta, TraceVec::from_modes(c));
}

// ---------------------------------------------------------------------------
// calibration

struct EpsilonCalibration {
  Params params;
  int m = 1;
  std::size_t corpus_size = 0;
  std::size_t stress_size = 0;  ///< deterministic high-mode traces added to the random corpus
  std::uint64_t seed = 0;
  double eps_log = 0.0;
  double eps_neg2m = 0.0;
  LogConstants log;
  Negative2mConstants neg;
  double C3 = 0.0;  ///< fitted: max M² / (Θ^β ‖∇_θφ‖^{2(1-β)}) with minimal Θ
  double eps_log_candidate = 0.0;  ///< C2 / (C1 C3)
  std::size_t log_nontrivial = 0;  ///< corpus traces with W(z) > 0
  std::size_t neg_nontrivial = 0;  ///< corpus traces with W(z) < 0

  nlohmann::json to_json() const {
    return {{"n", params.n},
            {"a", params.a},
            {"m", m},
            {"corpus_size", corpus_size},
            {"stress_size", stress_size},
            {"seed", seed},
            {"eps_log", eps_log},
            {"eps_neg2m", eps_neg2m},
            {"C1", log.C1},
            {"Cbar", log.Cbar},
            {"Cbar2", log.Cbar2},
            {"C2", log.C2},
            {"C3", C3},
            {"eps_log_candidate", eps_log_candidate},
            {"neg_C0", neg.C0},
            {"neg_C1", neg.C1},
            {"eps_neg2m_candidate", neg.eps_candidate},
            {"log_nontrivial", log_nontrivial},
            {"neg_nontrivial", neg_nontrivial}};
  }
};

/// Minimal valid Θ for the log inequality.
inline double minimal_theta(const EigenBasis& b, const Eigen::VectorXd& c, int m) {
  const double mu = 2.0 * m;
  const double W = detail::modal_energy(b, {{mu, TraceVec::from_modes(c)}}, mu);
  return std::max(c.squaredNorm(), std::fabs(W));
}

/// True when every corpus trace passes at ε; for log both the headline and the strong form must pass.
inline bool corpus_passes(const EigenBasis& b, const std::vector<Eigen::VectorXd>& corpus, int m, double eps, Theorem th) {
  std::vector<char> ok(corpus.size(), 0);
  parallel_for(corpus.size(), [&](std::size_t i) {
    const auto& c = corpus[i];
    if (th == Theorem::Log) {
      const auto r = competitor_log(b, c, m, minimal_theta(b, c, m), eps, false).report;
      ok[i] = r.pass && (!r.strong_margin || *r.strong_margin >= -r.truncation_budget);
    } else
      ok[i] = competitor_negative_2m(b, c, m, eps).report.pass;
  });
  return std::all_of(ok.begin(), ok.end(), [](char v) { return v != 0; });
}

/**
 * Largest ε = 2^{-j} (j = 1..40) for which every corpus trace passes, for the
 * log and the negative 2m inequalities. The corpus is the random one plus the
 * high-mode stress traces. The log check uses the minimal valid Θ and requires
 * the strong form as well.
 */
inline EpsilonCalibration calibrate_epsilons(const Params& p, int m, std::size_t corpus_size, std::uint64_t seed,
                                             int basis_degree = 0) {
  p.require_desk_scale();
  if (corpus_size < 100) throw ParameterError("calibration corpus must have at least 100 traces");
  if (m < 1) throw ParameterError("m must be >= 1");
  const int K = std::max(basis_degree > 0 ? basis_degree : default_max_degree(p.n), 2 * m + 2);
  const EigenBasis b = build_basis(p, K);
  auto corpus = random_admissible_corpus(b, corpus_size, seed);
  const auto stress = mode_stress_corpus(b, 2 * m);
  corpus.insert(corpus.end(), stress.begin(), stress.end());
  EpsilonCalibration cal;
  cal.params = p;
  cal.m = m;
  cal.corpus_size = corpus_size;
  cal.stress_size = stress.size();
  cal.seed = seed;
  cal.log = log_constants(b, m);
  cal.neg = negative_2m_constants(b, m);
  const double beta = log_beta(p.n);
  const double mu = 2.0 * m;
  for (const auto& c : corpus) {
    const double W = detail::modal_energy(b, {{mu, TraceVec::from_modes(c)}}, mu);
    if (W > 0.0) ++cal.log_nontrivial;
    if (W < 0.0) ++cal.neg_nontrivial;
    Eigen::VectorXd P, phi;
    detail::split_at_degree(b, c, 2 * m, true, P, phi);
    const double M = detail::thin_negative_max(b, P);
    const double g2 = tangential_energy(b, phi);
    if (M > 0.0 && g2 > 0.0) {
      const double theta = minimal_theta(b, c, m);
      cal.C3 = std::max(cal.C3, M * M / (std::pow(theta, beta) * std::pow(g2, 1.0 - beta)));
    }
  }
  cal.eps_log_candidate = cal.C3 > 0.0 ? cal.log.C2 / (cal.log.C1 * cal.C3) : std::numeric_limits<double>::infinity();
  for (int j = 1; j <= 40 && cal.eps_log == 0.0; ++j)
    if (corpus_passes(b, corpus, m, std::ldexp(1.0, -j), Theorem::Log)) cal.eps_log = std::ldexp(1.0, -j);
  for (int j = 1; j <= 40 && cal.eps_neg2m == 0.0; ++j) {
    const double e = std::ldexp(1.0, -j);
    if (!(e < cal.neg.eps_max)) continue;
    if (corpus_passes(b, corpus, m, e, Theorem::Negative2m)) cal.eps_neg2m = e;
  }
  if (cal.eps_log == 0.0 || cal.eps_neg2m == 0.0) throw CalibrationError("no dyadic ε down to 2^-40 passes the corpus");
  return cal;
}

}  // namespace fol
