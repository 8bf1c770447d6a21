#pragma once

/**
 * @file polynomial.hpp
 * @brief Sparse multivariate polynomials over double or Rational.
 *
 * Variables are ordered (x_1, ..., x_n, y); the last variable is the one
 * carrying the weight |y|^a in the extension operator.
 */

#include <cmath>
#include <cstddef>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fol/errors.hpp"
#include "fol/rational.hpp"

namespace fol {

using Exponents = std::vector<int>;

template <class T>
class Polynomial {
 public:
  using Terms = std::map<Exponents, T>;

  Polynomial() = default;
  explicit Polynomial(int dim) : dim_(dim) {}

  static Polynomial constant(int dim, T c) {
    Polynomial p(dim);
    p.add_term(Exponents(static_cast<std::size_t>(dim), 0), c);
    return p;
  }

  static Polynomial monomial(const Exponents& e, T c = T(1)) {
    Polynomial p(static_cast<int>(e.size()));
    p.add_term(e, c);
    return p;
  }

  /// The coordinate function x_i.
  static Polynomial variable(int dim, int i) {
    Exponents e(static_cast<std::size_t>(dim), 0);
    e[static_cast<std::size_t>(i)] = 1;
    return monomial(e);
  }

  int dim() const { return dim_; }
  const Terms& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  void add_term(const Exponents& e, const T& c) {
    if (static_cast<int>(e.size()) != dim_) throw InvalidInput("monomial dimension mismatch");
    auto it = terms_.find(e);
    if (it == terms_.end()) {
      if (!is_exact_zero(c)) terms_.emplace(e, c);
      return;
    }
    it->second += c;
    if (is_exact_zero(it->second)) terms_.erase(it);
  }

  T coefficient(const Exponents& e) const {
    auto it = terms_.find(e);
    return it == terms_.end() ? T(0) : it->second;
  }

  int degree() const {
    int d = -1;
    for (const auto& [e, c] : terms_) d = std::max(d, total(e));
    return d;
  }

  bool is_homogeneous() const {
    int d = -1;
    for (const auto& [e, c] : terms_) {
      if (d < 0) d = total(e);
      else if (total(e) != d) return false;
    }
    return true;
  }

  /// True when every exponent of the last variable is even.
  bool is_even_in_last() const {
    for (const auto& [e, c] : terms_)
      if (e.back() % 2 != 0) return false;
    return true;
  }

  bool is_zero(double tol = 0.0) const {
    for (const auto& [e, c] : terms_)
      if (!is_zero_coef(c, tol)) return false;
    return true;
  }

  double max_abs_coefficient() const {
    double m = 0.0;
    for (const auto& [e, c] : terms_) m = std::max(m, std::fabs(to_double(c)));
    return m;
  }

  Polynomial& operator+=(const Polynomial& o) {
    check_dim(o);
    for (const auto& [e, c] : o.terms_) add_term(e, c);
    return *this;
  }
  Polynomial& operator-=(const Polynomial& o) {
    check_dim(o);
    for (const auto& [e, c] : o.terms_) add_term(e, -c);
    return *this;
  }
  Polynomial& operator*=(const T& k) {
    if (is_exact_zero(k)) {
      terms_.clear();
      return *this;
    }
    for (auto& [e, c] : terms_) c *= k;
    return *this;
  }

  friend Polynomial operator+(Polynomial l, const Polynomial& r) { return l += r; }
  friend Polynomial operator-(Polynomial l, const Polynomial& r) { return l -= r; }
  friend Polynomial operator*(Polynomial l, const T& k) { return l *= k; }
  friend Polynomial operator*(const T& k, Polynomial l) { return l *= k; }

  friend Polynomial operator*(const Polynomial& l, const Polynomial& r) {
    l.check_dim(r);
    Polynomial out(l.dim_);
    Exponents e(static_cast<std::size_t>(l.dim_));
    for (const auto& [el, cl] : l.terms_)
      for (const auto& [er, cr] : r.terms_) {
        for (std::size_t i = 0; i < e.size(); ++i) e[i] = el[i] + er[i];
        out.add_term(e, cl * cr);
      }
    return out;
  }

  Polynomial pow(int k) const {
    Polynomial out = constant(dim_, T(1));
    for (int i = 0; i < k; ++i) out = out * (*this);
    return out;
  }

  Polynomial derivative(int var) const {
    Polynomial out(dim_);
    for (const auto& [e, c] : terms_) {
      int k = e[static_cast<std::size_t>(var)];
      if (k == 0) continue;
      Exponents f = e;
      f[static_cast<std::size_t>(var)] = k - 1;
      out.add_term(f, c * T(k));
    }
    return out;
  }

  /// Sum of second derivatives in the first `nvars` variables.
  Polynomial laplacian(int nvars) const {
    Polynomial out(dim_);
    for (int i = 0; i < nvars; ++i) out += derivative(i).derivative(i);
    return out;
  }

  /**
   * Extension operator Δ_x p + ∂_yy p + (a/y) ∂_y p, with y the last variable.
   * On y^j the y-part acts as j(j-1+a) y^{j-2}; odd powers of y are rejected
   * because (a/y)∂_y would leave the polynomial ring.
   */
  Polynomial apply_La(const T& a) const {
    if (!is_even_in_last()) throw InvalidInput("extension operator needs a polynomial even in y");
    const int n = dim_ - 1;
    Polynomial out = laplacian(n);
    for (const auto& [e, c] : terms_) {
      int j = e.back();
      if (j < 2) continue;
      Exponents f = e;
      f.back() = j - 2;
      out.add_term(f, c * T(j) * (T(j - 1) + a));
    }
    return out;
  }

  double evaluate(const double* x) const {
    double sum = 0.0;
    for (const auto& [e, c] : terms_) {
      double m = to_double(c);
      for (int i = 0; i < dim_; ++i) m *= ipow(x[i], e[static_cast<std::size_t>(i)]);
      sum += m;
    }
    return sum;
  }
  double evaluate(const std::vector<double>& x) const { return evaluate(x.data()); }

  /// Value and gradient at x; grad must hold dim() entries.
  double evaluate_with_gradient(const double* x, double* grad) const {
    double sum = 0.0;
    for (int i = 0; i < dim_; ++i) grad[i] = 0.0;
    for (const auto& [e, c] : terms_) {
      const double cc = to_double(c);
      double full = cc;
      for (int i = 0; i < dim_; ++i) full *= ipow(x[i], e[static_cast<std::size_t>(i)]);
      sum += full;
      for (int i = 0; i < dim_; ++i) {
        int k = e[static_cast<std::size_t>(i)];
        if (k == 0) continue;
        double g = cc * k;
        for (int j = 0; j < dim_; ++j) g *= ipow(x[j], j == i ? k - 1 : e[static_cast<std::size_t>(j)]);
        grad[i] += g;
      }
    }
    return sum;
  }

  /// Restriction to {last variable = 0}, as a polynomial in dim()-1 variables.
  Polynomial restrict_last_zero() const {
    Polynomial out(dim_ - 1);
    for (const auto& [e, c] : terms_) {
      if (e.back() != 0) continue;
      out.add_term(Exponents(e.begin(), e.end() - 1), c);
    }
    return out;
  }

  /// Same polynomial viewed in dim()+1 variables (new last variable absent).
  Polynomial append_variable() const {
    Polynomial out(dim_ + 1);
    for (const auto& [e, c] : terms_) {
      Exponents f = e;
      f.push_back(0);
      out.add_term(f, c);
    }
    return out;
  }

  /// Multiply by x_var^k.
  Polynomial times_monomial(int var, int k) const {
    Polynomial out(dim_);
    for (const auto& [e, c] : terms_) {
      Exponents f = e;
      f[static_cast<std::size_t>(var)] += k;
      out.add_term(f, c);
    }
    return out;
  }

  /// Substitute x_i -> subs[i] (all of equal dimension).
  Polynomial<T> compose(const std::vector<Polynomial<T>>& subs) const {
    if (static_cast<int>(subs.size()) != dim_) throw InvalidInput("substitution arity mismatch");
    int out_dim = subs.empty() ? 0 : subs.front().dim();
    Polynomial<T> out(out_dim);
    for (const auto& [e, c] : terms_) {
      Polynomial<T> term = Polynomial<T>::constant(out_dim, c);
      for (int i = 0; i < dim_; ++i)
        if (e[static_cast<std::size_t>(i)] > 0) term = term * subs[static_cast<std::size_t>(i)].pow(e[static_cast<std::size_t>(i)]);
      out += term;
    }
    return out;
  }

  Polynomial<double> to_double_poly() const {
    Polynomial<double> out(dim_);
    for (const auto& [e, c] : terms_) out.add_term(e, to_double(c));
    return out;
  }

  /// Drop coefficients below tol (floating-point cleanup).
  Polynomial chop(double tol) const {
    Polynomial out(dim_);
    for (const auto& [e, c] : terms_)
      if (!is_zero_coef(c, tol)) out.add_term(e, c);
    return out;
  }

  std::string to_string() const {
    std::ostringstream os;
    os.precision(17);
    bool first = true;
    for (const auto& [e, c] : terms_) {
      if (!first) os << " + ";
      first = false;
      os << c;
      for (int i = 0; i < dim_; ++i) {
        int k = e[static_cast<std::size_t>(i)];
        if (k == 0) continue;
        os << '*' << (i == dim_ - 1 ? std::string("y") : "x" + std::to_string(i + 1));
        if (k > 1) os << '^' << k;
      }
    }
    if (first) os << '0';
    return os.str();
  }

  static int total(const Exponents& e) {
    int t = 0;
    for (int k : e) t += k;
    return t;
  }

 private:
  int dim_ = 0;
  Terms terms_;

  static bool is_exact_zero(const double& c) { return c == 0.0; }
  static bool is_exact_zero(const Rational& c) { return c.num() == 0; }

  static double ipow(double x, int k) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= x;
    return r;
  }

  void check_dim(const Polynomial& o) const {
    if (o.dim_ != dim_) throw InvalidInput("polynomial dimension mismatch");
  }
};

/// All exponent vectors of `dim` entries summing to `degree`, in decreasing
/// lexicographic order (x_1^degree first).
inline std::vector<Exponents> monomials_of_degree(int dim, int degree) {
  std::vector<Exponents> out;
  Exponents cur(static_cast<std::size_t>(dim), 0);
  auto rec = [&](auto&& self, int pos, int left) -> void {
    if (pos == dim - 1) {
      cur[static_cast<std::size_t>(pos)] = left;
      out.push_back(cur);
      return;
    }
    for (int k = left; k >= 0; --k) {
      cur[static_cast<std::size_t>(pos)] = k;
      self(self, pos + 1, left - k);
    }
  };
  if (dim == 0) {
    if (degree == 0) out.push_back({});
    return out;
  }
  rec(rec, 0, degree);
  return out;
}

}  // namespace fol
