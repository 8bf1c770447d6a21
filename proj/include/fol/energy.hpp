#pragma once

/**
 * @file energy.hpp
 * @brief Exact Weiss energies of sums of homogeneous pieces.
 *
 * A trace is a combination of eigenmodes, the regular profile h (fixed
 * direction e) and the two profiles |y|^{1+s}, |y|^{2s}. All pairwise sphere
 * integrals are available in closed form:
 *  - modes against |y|^p: Gamma moments;
 *  - modes against h: flux identity (λ_k - λ(1+s))⟨h, φ_k⟩ = 2 c_s J(φ_k),
 *    J(φ) = ∫_{∂B'_1} φ (θ'·e)_-^{1-s};
 *  - h against h and |y|^p: Beta sums after the half-angle substitution in
 *    the (x·e, y) plane.
 * Tangential stiffness follows from integration by parts on the sphere.
 *
 * For f = r^α F, g = r^β G the bulk term is
 *   ∫_{B_1} ∇f·∇g |y|^a = (αβ⟨F,G⟩ + ⟨∇_θF, ∇_θG⟩) / (α + β + n + a - 1).
 */

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "fol/errors.hpp"
#include "fol/params.hpp"
#include "fol/polynomial.hpp"
#include "fol/quadrature.hpp"
#include "fol/special_solutions.hpp"
#include "fol/spectrum.hpp"

namespace fol {

/// Trace = Σ c_k φ_k + h·h_e^s + u0_plus·|y|^{1+s} + u0_flat·|y|^{2s}.
struct TraceVec {
  Eigen::VectorXd modes;
  double h = 0.0;
  double u0_plus = 0.0;
  double u0_flat = 0.0;

  static TraceVec zeros(std::size_t k) {
    TraceVec t;
    t.modes = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
    return t;
  }
  static TraceVec from_modes(const Eigen::VectorXd& c) {
    TraceVec t;
    t.modes = c;
    return t;
  }

  double& u0(U0Kind k) { return k == U0Kind::Plus ? u0_plus : u0_flat; }
  double u0(U0Kind k) const { return k == U0Kind::Plus ? u0_plus : u0_flat; }

  bool is_polynomial() const { return h == 0.0 && u0_plus == 0.0 && u0_flat == 0.0; }

  TraceVec& operator+=(const TraceVec& o) {
    modes += o.modes;
    h += o.h;
    u0_plus += o.u0_plus;
    u0_flat += o.u0_flat;
    return *this;
  }
  TraceVec& operator*=(double k) {
    modes *= k;
    h *= k;
    u0_plus *= k;
    u0_flat *= k;
    return *this;
  }
  friend TraceVec operator+(TraceVec l, const TraceVec& r) { return l += r; }
  friend TraceVec operator-(TraceVec l, const TraceVec& r) { return l += (-1.0) * r; }
  friend TraceVec operator*(double k, TraceVec t) { return t *= k; }
};

namespace detail {

/// ∫_{-π}^{π} g(ψ)^k |sin ψ|^q dψ with g(ψ) = 2^s cos^{2s}(ψ/2)(cos ψ / s - 1).
inline double angular_profile_integral(double s, int k, double q) {
  const double A1 = 2.0 / s;
  const double A0 = -(1.0 + s) / s;
  double sum = 0.0;
  double binom = 1.0;
  for (int j = 0; j <= k; ++j) {
    if (j > 0) binom = binom * (k - j + 1) / j;
    const double bj = binom * std::pow(A1, j) * std::pow(A0, k - j);
    sum += bj * beta_fn((2.0 * k * s + q + 2.0 * j + 1.0) / 2.0, (q + 1.0) / 2.0);
  }
  return 2.0 * std::pow(2.0, k * s + q) * sum;
}

/// ∫_{S^n} ρ^γ G(ψ) for n in {1,2}, where (ρ,ψ) are polar in the (x·e, y) plane
/// and the angular integral is supplied.
inline double planar_sphere_integral(int n, double gamma, double angular) {
  if (n == 1) return angular;
  if (n == 2) return beta_fn((gamma + 2.0) / 2.0, 0.5) * angular;
  throw ParameterError("planar sphere integral only for n <= 2");
}

}  // namespace detail

/// J(φ) = ∫_{∂B'_1} φ(θ', 0) (θ'·e)_-^{1-s} dH^{n-1} for a polynomial φ in (x, y).
inline double thin_sphere_flux_integral(const Polynomial<double>& phi, const std::vector<double>& e, double s) {
  const int n = phi.dim() - 1;
  if (n == 1) {
    double pt[2] = {-e[0], 0.0};
    return phi.evaluate(pt);
  }
  if (n != 2) throw ParameterError("thin sphere integral only for n <= 2");
  // θ' = -cos τ e + sin τ e⊥, τ ∈ (-π/2, π/2); variables (c, σ)
  Polynomial<double> c = Polynomial<double>::variable(2, 0);
  Polynomial<double> sg = Polynomial<double>::variable(2, 1);
  std::vector<Polynomial<double>> subs = {c * (-e[0]) + sg * (-e[1]), c * (-e[1]) + sg * e[0], Polynomial<double>(2)};
  Polynomial<double> comp = phi.compose(subs);
  double sum = 0.0;
  for (const auto& [ex, coef] : comp.terms()) {
    if (ex[1] % 2 != 0) continue;
    sum += coef * beta_fn((ex[0] + 2.0 - s) / 2.0, (ex[1] + 1.0) / 2.0);
  }
  return sum;
}

/**
 * Exact mass/stiffness Gram data on the extended coordinates
 * [modes..., h, u0_plus, u0_flat].
 */
class ProfileAlgebra {
 public:
  ProfileAlgebra(const EigenBasis& basis, std::vector<double> e) : basis_(&basis), profile_(std::move(e), basis.params.s) {
    const Params& p = basis.params;
    if (static_cast<int>(profile_.e.size()) != p.n) throw InvalidInput("profile direction dimension mismatch");
    const double s = p.s, a = p.a;
    const double pp = 1.0 + s, pf = 2.0 * s;
    const double lam_h = p.eigenvalue(1.0 + s);
    const double cs = neumann_constant(s);
    const auto K = static_cast<Eigen::Index>(basis.size());
    const Eigen::Index N = K + 3;
    ih_ = K;
    iup_ = K + 1;
    iuf_ = K + 2;
    M_ = Eigen::MatrixXd::Zero(N, N);
    S_ = Eigen::MatrixXd::Zero(N, N);
    flux_ = Eigen::VectorXd::Zero(K);
    for (Eigen::Index k = 0; k < K; ++k) {
      const EigenMode& m = basis.modes[static_cast<std::size_t>(k)];
      M_(k, k) = 1.0;
      S_(k, k) = m.eigenvalue;
      flux_(k) = thin_sphere_flux_integral(m.poly, profile_.e, s);
      const double hk = 2.0 * cs * flux_(k) / (m.eigenvalue - lam_h);
      const double upk = sphere_integral(m.poly, a, pp);
      const double ufk = sphere_integral(m.poly, a, pf);
      set_pair(k, ih_, hk, m.eigenvalue * hk);
      set_pair(k, iup_, upk, m.eigenvalue * upk);
      set_pair(k, iuf_, ufk, m.eigenvalue * ufk);
    }
    const double hh = detail::planar_sphere_integral(p.n, 2.0 * (1.0 + s) + a, detail::angular_profile_integral(s, 2, a));
    set_pair(ih_, ih_, hh, lam_h * hh);
    for (auto [idx, pw] : {std::pair{iup_, pp}, std::pair{iuf_, pf}}) {
      const double m = detail::planar_sphere_integral(p.n, 1.0 + s + pw + a, detail::angular_profile_integral(s, 1, pw + a));
      set_pair(ih_, idx, m, lam_h * m);
    }
    const std::pair<Eigen::Index, double> us[2] = {{iup_, pp}, {iuf_, pf}};
    for (const auto& [i, p1] : us)
      for (const auto& [j, p2] : us) {
        M_(i, j) = power_moment(p1 + p2);
        S_(i, j) = p1 * p2 * (power_moment(p1 + p2 - 2.0) - power_moment(p1 + p2));
      }
  }

  const EigenBasis& basis() const { return *basis_; }
  const Params& params() const { return basis_->params; }
  const RegularProfile& profile() const { return profile_; }
  const Eigen::MatrixXd& mass_matrix() const { return M_; }
  const Eigen::MatrixXd& stiffness_matrix() const { return S_; }
  /// J(φ_k) per mode.
  const Eigen::VectorXd& thin_flux() const { return flux_; }

  Eigen::VectorXd extended(const TraceVec& t) const {
    Eigen::VectorXd v(M_.rows());
    v.head(t.modes.size()) = t.modes;
    v(ih_) = t.h;
    v(iup_) = t.u0_plus;
    v(iuf_) = t.u0_flat;
    return v;
  }

  double mass(const TraceVec& f, const TraceVec& g) const { return extended(f).dot(M_ * extended(g)); }
  double stiffness(const TraceVec& f, const TraceVec& g) const { return extended(f).dot(S_ * extended(g)); }

  /// Coefficients of the trace against the basis (the truncated spectral view).
  SpectralTrace spectral(const TraceVec& t) const {
    SpectralTrace st;
    const auto K = t.modes.size();
    st.coefficients = t.modes + t.h * M_.col(ih_).head(K) + t.u0_plus * M_.col(iup_).head(K) +
                      t.u0_flat * M_.col(iuf_).head(K);
    const double full = mass(t, t);
    st.residual_norm = std::sqrt(std::max(0.0, full - st.coefficients.squaredNorm()));
    return st;
  }

  double evaluate(const TraceVec& t, const double* theta) const {
    const Params& p = params();
    double v = evaluate_trace(*basis_, t.modes, theta);
    if (t.h != 0.0) v += t.h * eval_h_e_s(profile_, theta);
    const double y = theta[p.n];
    if (t.u0_plus != 0.0) v += t.u0_plus * eval_u0(U0Kind::Plus, p.s, y);
    if (t.u0_flat != 0.0) v += t.u0_flat * eval_u0(U0Kind::Flat, p.s, y);
    return v;
  }

  /// Profile coefficient of h on the linear modes: ⟨h, φ_k⟩ for degree-1 modes.
  double h_inner_mode(std::size_t k) const { return M_(static_cast<Eigen::Index>(k), ih_); }
  double u0_inner_mode(U0Kind kind, std::size_t k) const {
    return M_(static_cast<Eigen::Index>(k), kind == U0Kind::Plus ? iup_ : iuf_);
  }
  double h_norm2() const { return M_(ih_, ih_); }
  double u0_norm2(U0Kind kind) const {
    auto i = kind == U0Kind::Plus ? iup_ : iuf_;
    return M_(i, i);
  }

 private:
  const EigenBasis* basis_;
  RegularProfile profile_;
  Eigen::MatrixXd M_, S_;
  Eigen::VectorXd flux_;
  Eigen::Index ih_ = 0, iup_ = 0, iuf_ = 0;

  void set_pair(Eigen::Index i, Eigen::Index j, double m, double st) {
    M_(i, j) = M_(j, i) = m;
    S_(i, j) = S_(j, i) = st;
  }

  /// ∫_{S^n} |θ_{n+1}|^{g + a}.
  double power_moment(double g) const {
    std::vector<double> pw(static_cast<std::size_t>(params().n + 1), 0.0);
    pw.back() = g;
    return sphere_abs_moment(pw, params().a);
  }
};

/// r^degree · trace.
struct HomTerm {
  double degree = 0.0;
  TraceVec trace;
};

using HomField = std::vector<HomTerm>;

/// Weiss bilinear form B_μ(f, g) = ∫_{B_1} ∇f·∇g |y|^a - μ ∫_{∂B_1} f g |y|^a.
inline double weiss_bilinear(const ProfileAlgebra& alg, const HomField& f, const HomField& g, double mu) {
  const Params& p = alg.params();
  double sum = 0.0;
  for (const auto& tf : f)
    for (const auto& tg : g) {
      const double m = alg.mass(tf.trace, tg.trace);
      const double st = alg.stiffness(tf.trace, tg.trace);
      const double denom = tf.degree + tg.degree + p.n + p.a - 1.0;
      if (denom <= 0.0) throw ParameterError("non-integrable homogeneity in energy");
      sum += (tf.degree * tg.degree * m + st) / denom - mu * m;
    }
  return sum;
}

inline double weiss_energy(const ProfileAlgebra& alg, const HomField& f, double mu) {
  return weiss_bilinear(alg, f, f, mu);
}

/// Bulk Dirichlet energy over B_1.
inline double dirichlet_energy(const ProfileAlgebra& alg, const HomField& f) {
  return weiss_bilinear(alg, f, f, 0.0);
}

/// Boundary mass ∫_{∂B_1} f² |y|^a.
inline double boundary_mass(const ProfileAlgebra& alg, const HomField& f) {
  TraceVec t = TraceVec::zeros(alg.basis().size());
  for (const auto& term : f) t += term.trace;
  return alg.mass(t, t);
}

}  // namespace fol
