#pragma once

/**
 * @file spectrum.hpp
 * @brief Orthonormal eigenbasis of the weighted spherical operator.
 *
 * Modes are traces of even L_a-harmonic homogeneous polynomials. For each
 * degree d the kernel of L_a is spanned by the lifts of the monomials x^α,
 * |α| = d, taken in decreasing lexicographic order and orthonormalized with
 * exact moments (Cholesky of the Gram matrix, i.e. ordered Gram–Schmidt).
 */

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fol/errors.hpp"
#include "fol/harmonic.hpp"
#include "fol/params.hpp"
#include "fol/polynomial.hpp"
#include "fol/quadrature.hpp"

namespace fol {

struct EigenMode {
  int degree = 0;
  double eigenvalue = 0.0;
  Polynomial<double> poly;

  double operator()(const double* theta) const { return poly.evaluate(theta); }
};

struct EigenBasis {
  Params params;
  int max_degree = 0;
  std::vector<EigenMode> modes;

  std::size_t size() const { return modes.size(); }

  /// Indices of modes with the given degree.
  std::vector<std::size_t> indices_of_degree(int d) const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < modes.size(); ++k)
      if (modes[k].degree == d) out.push_back(k);
    return out;
  }
};

/// Coefficients against an EigenBasis plus the norm of what is not represented.
struct SpectralTrace {
  Eigen::VectorXd coefficients;
  double residual_norm = 0.0;
};

inline int default_max_degree(int n) { return n == 1 ? 12 : 8; }

/// Nullity of L_a from even homogeneous degree-d polynomials to degree d-2.
inline int La_kernel_dimension(const Params& p, int d) {
  const int dim = p.n + 1;
  std::vector<Exponents> cols;
  for (const auto& e : monomials_of_degree(dim, d))
    if (e.back() % 2 == 0) cols.push_back(e);
  if (d < 2) return static_cast<int>(cols.size());
  std::vector<Exponents> rows;
  for (const auto& e : monomials_of_degree(dim, d - 2))
    if (e.back() % 2 == 0) rows.push_back(e);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                            static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    Polynomial<double> img = Polynomial<double>::monomial(cols[j]).apply_La(p.a);
    for (std::size_t i = 0; i < rows.size(); ++i)
      A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = img.coefficient(rows[i]);
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  lu.setThreshold(1e-12);
  return static_cast<int>(cols.size()) - static_cast<int>(lu.rank());
}

inline double exact_inner(const Polynomial<double>& f, const Polynomial<double>& g, double a) {
  return sphere_integral(f * g, a);
}

inline EigenBasis build_basis(const Params& p, int K) {
  p.validate();
  if (K < 0) throw ParameterError("basis degree must be nonnegative");
  EigenBasis basis;
  basis.params = p;
  basis.max_degree = K;
  for (int d = 0; d <= K; ++d) {
    std::vector<Polynomial<double>> cand;
    for (const auto& ex : monomials_of_degree(p.n, d))
      cand.push_back(extend_La_harmonic(Polynomial<double>::monomial(ex), p.a));
    const int nullity = La_kernel_dimension(p, d);
    if (nullity == 0 || nullity != static_cast<int>(cand.size()))
      throw ConsistencyError("kernel of L_a at degree " + std::to_string(d) + " has dimension " +
                             std::to_string(nullity) + ", expected " + std::to_string(cand.size()));
    const auto m = static_cast<Eigen::Index>(cand.size());
    Eigen::MatrixXd G(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j <= i; ++j)
        G(i, j) = G(j, i) = exact_inner(cand[static_cast<std::size_t>(i)], cand[static_cast<std::size_t>(j)], p.a);
    Eigen::LLT<Eigen::MatrixXd> llt(G);
    if (llt.info() != Eigen::Success) throw ConsistencyError("Gram matrix not positive definite");
    Eigen::MatrixXd Linv = Eigen::MatrixXd(llt.matrixL()).inverse();
    for (Eigen::Index i = 0; i < m; ++i) {
      Polynomial<double> q(p.n + 1);
      for (Eigen::Index j = 0; j <= i; ++j) q += cand[static_cast<std::size_t>(j)] * Linv(i, j);
      EigenMode mode;
      mode.degree = d;
      mode.eigenvalue = p.eigenvalue(d);
      mode.poly = q.chop(1e-300);
      basis.modes.push_back(std::move(mode));
    }
  }
  return basis;
}

/// Mode values at quadrature nodes, for repeated projections.
struct SampledBasis {
  const EigenBasis* basis = nullptr;
  const SphereQuadrature* rule = nullptr;
  Eigen::MatrixXd values;  ///< nodes x modes

  SampledBasis(const EigenBasis& b, const SphereQuadrature& q) : basis(&b), rule(&q) {
    values.resize(static_cast<Eigen::Index>(q.size()), static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < q.size(); ++i)
      for (std::size_t k = 0; k < b.size(); ++k)
        values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = b.modes[k](q.node(i));
  }
};

inline SpectralTrace project(const TraceFn& f, const SampledBasis& sb) {
  if (!f.even) throw InvalidInput("projection needs a trace even in the last coordinate");
  const SphereQuadrature& q = *sb.rule;
  Eigen::VectorXd fw(static_cast<Eigen::Index>(q.size()));
  double norm2 = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    double v = f(q.node(i));
    fw(static_cast<Eigen::Index>(i)) = v * q.weights[i];
    norm2 += v * v * q.weights[i];
  }
  SpectralTrace t;
  t.coefficients = sb.values.transpose() * fw;
  double res2 = norm2 - t.coefficients.squaredNorm();
  if (res2 < -1e-10 * std::max(1.0, norm2))
    throw QuadratureOrderError("negative projection residual " + std::to_string(res2) + "; raise the quadrature order");
  t.residual_norm = std::sqrt(std::max(0.0, res2));
  return t;
}

inline SpectralTrace project(const TraceFn& f, const EigenBasis& basis, const SphereQuadrature& q) {
  return project(f, SampledBasis(basis, q));
}

/// Exact coefficients of a polynomial trace (any degree <= K).
inline Eigen::VectorXd project_polynomial(const Polynomial<double>& f, const EigenBasis& basis) {
  Eigen::VectorXd c(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t k = 0; k < basis.size(); ++k)
    c(static_cast<Eigen::Index>(k)) = exact_inner(f, basis.modes[k].poly, basis.params.a);
  return c;
}

inline double evaluate_trace(const EigenBasis& basis, const Eigen::VectorXd& c, const double* theta) {
  double v = 0.0;
  for (std::size_t k = 0; k < basis.size(); ++k) {
    double ck = c(static_cast<Eigen::Index>(k));
    if (ck != 0.0) v += ck * basis.modes[k](theta);
  }
  return v;
}

/// Σ c_k P_k; its restriction to the sphere is the trace with coefficients c.
inline Polynomial<double> trace_polynomial(const EigenBasis& basis, const Eigen::VectorXd& c) {
  Polynomial<double> out(basis.params.n + 1);
  for (std::size_t k = 0; k < basis.size(); ++k)
    if (c(static_cast<Eigen::Index>(k)) != 0.0) out += basis.modes[k].poly * c(static_cast<Eigen::Index>(k));
  return out;
}

/// ‖∇_θ φ‖² = Σ λ_k c_k².
inline double tangential_energy(const EigenBasis& basis, const Eigen::VectorXd& c) {
  double s = 0.0;
  for (std::size_t k = 0; k < basis.size(); ++k) s += basis.modes[k].eigenvalue * c(static_cast<Eigen::Index>(k)) * c(static_cast<Eigen::Index>(k));
  return s;
}

// ---------------------------------------------------------------------------
// JSON round trip

inline nlohmann::json polynomial_to_json(const Polynomial<double>& p) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [e, c] : p.terms()) terms.push_back({{"exponents", e}, {"coef", c}});
  return terms;
}

inline Polynomial<double> polynomial_from_json(const nlohmann::json& j, int dim) {
  Polynomial<double> p(dim);
  for (const auto& t : j) p.add_term(t.at("exponents").get<Exponents>(), t.at("coef").get<double>());
  return p;
}

inline nlohmann::json basis_to_json(const EigenBasis& b) {
  nlohmann::json j;
  j["n"] = b.params.n;
  j["a"] = b.params.a;
  j["s"] = b.params.s;
  j["K"] = b.max_degree;
  nlohmann::json modes = nlohmann::json::array();
  for (const auto& m : b.modes)
    modes.push_back({{"degree", m.degree}, {"eigenvalue", m.eigenvalue}, {"terms", polynomial_to_json(m.poly)}});
  j["modes"] = modes;
  return j;
}

inline EigenBasis basis_from_json(const nlohmann::json& j) {
  try {
    EigenBasis b;
    b.params = Params::from_a(j.at("n").get<int>(), j.at("a").get<double>());
    b.max_degree = j.at("K").get<int>();
    for (const auto& m : j.at("modes")) {
      EigenMode mode;
      mode.degree = m.at("degree").get<int>();
      mode.eigenvalue = m.at("eigenvalue").get<double>();
      mode.poly = polynomial_from_json(m.at("terms"), b.params.n + 1);
      b.modes.push_back(std::move(mode));
    }
    return b;
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidInput(std::string("malformed basis document: ") + ex.what());
  }
}

}  // namespace fol
