#pragma once

/**
 * @file harmonic.hpp
 * @brief Polynomial solutions of the extension operator L_a.
 *
 * extend_La_harmonic lifts a polynomial q(x) to the unique even-in-y L_a-harmonic
 * polynomial with trace q on {y = 0}, writing the lift as Σ_j y^{2j} p_j(x) with
 * p_0 = q and p_{j+1} = -Δ_x p_j / ((2j+2)(2j+1+a)).
 */

#include <vector>

#include "fol/errors.hpp"
#include "fol/polynomial.hpp"

namespace fol {

template <class T>
Polynomial<T> extend_La_harmonic(const Polynomial<T>& q, const T& a) {
  const int n = q.dim();
  Polynomial<T> out(n + 1);
  Polynomial<T> pj = q;
  for (int j = 0; !pj.empty(); ++j) {
    out += pj.append_variable().times_monomial(n, 2 * j);
    T denom = T(2 * j + 2) * (T(2 * j + 1) + a);
    if (to_double(denom) == 0.0) throw ParameterError("degenerate extension recurrence");
    Polynomial<T> next = pj.laplacian(n);
    next *= (T(-1) / denom);
    pj = next;
  }
  return out;
}

/// |x|^2 in n variables (as a polynomial in x only).
template <class T>
Polynomial<T> squared_norm_x(int n) {
  Polynomial<T> r(n);
  for (int i = 0; i < n; ++i) {
    Exponents e(static_cast<std::size_t>(n), 0);
    e[static_cast<std::size_t>(i)] = 2;
    r.add_term(e, T(1));
  }
  return r;
}

/**
 * h_{2m} = Σ_k C_k y^{2k} |x|^{2(m-k)} with C_0 = 1 and
 * C_k = -2(m-k+1)(2(m-k)+n) / (2k(2k-1+a)) C_{k-1}.
 */
template <class T>
Polynomial<T> build_h_2m(int n, const T& a, int m) {
  if (m < 1) throw ParameterError("h_2m needs m >= 1");
  Polynomial<T> out(n + 1);
  T ck = T(1);
  for (int k = 0; k <= m; ++k) {
    if (k > 0) {
      T denom = T(2 * k) * (T(2 * k - 1) + a);
      if (to_double(denom) == 0.0) throw ParameterError("zero denominator in h_2m recurrence");
      ck = ck * T(-2 * (m - k + 1) * (2 * (m - k) + n)) / denom;
    }
    Polynomial<T> xs = squared_norm_x<T>(n).pow(m - k).append_variable().times_monomial(n, 2 * k);
    xs *= ck;
    out += xs;
  }
  return out;
}

}  // namespace fol
