#pragma once

/**
 * @file frequency_gap.hpp
 * @brief Forbidden homogeneity intervals around 1+s and 2m from the epiperimetric constants.
 *
 * A λ-homogeneous solution with λ = center + t satisfies a scalar inequality in t
 * obtained by feeding r^λ c into an epiperimetric inequality and rescaling the
 * energy with W_μ(r^μ c) = (1 + t/(n+a+2μ-1)) W_μ(r^{μ+t} c). The widths below
 * are the smallest |t| allowed by those inequalities, found by bisection.
 */

#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fol/epiperimetric.hpp"
#include "fol/errors.hpp"
#include "fol/params.hpp"

namespace fol {

struct GapSide {
  double width = 0.0;
  std::string inequality;  ///< the scalar inequality solved, in t > 0
  double root = 0.0;       ///< root returned by the solver (equals width unless capped)
  bool capped = false;     ///< no root in the search bracket; width is a lower bound
};

struct GapResult {
  Params params;
  double center = 0.0;
  int m = 0;  ///< 0 for the gap around 1+s
  GapSide left, right;
  /// Left width implied by the final line of the written derivation around 1+s, which reads -(1+s).
  std::optional<double> left_width_as_written;

  double left_width() const { return left.width; }
  double right_width() const { return right.width; }

  nlohmann::json to_json() const {
    auto side = [](const GapSide& g) {
      return nlohmann::json{{"width", g.width}, {"inequality", g.inequality}, {"root", g.root}, {"capped", g.capped}};
    };
    nlohmann::json j{{"n", params.n},
                     {"a", params.a},
                     {"s", params.s},
                     {"center", center},
                     {"m", m},
                     {"left_width", left.width},
                     {"right_width", right.width},
                     {"excluded", {{center - left.width, center}, {center, center + right.width}}},
                     {"left", side(left)},
                     {"right", side(right)}};
    if (left_width_as_written) j["left_width_as_written"] = *left_width_as_written;
    return j;
  }
};

namespace detail {

/// Smallest t in (lo, hi] with g(t) ≥ 0 given g(lo) < 0 ≤ g(hi), to within tol.
inline double bisect_first_nonnegative(const std::function<double(double)>& g, double lo, double hi, double tol = 1e-15) {
  for (int it = 0; it < 200 && hi - lo > tol * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (g(mid) >= 0.0)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

/**
 * Gap around 1+s. Right: (1-κ)(1+t/(n+2)) ≥ 1 with κ of the regular inequality.
 * Left: (1+ε)(1-t/(n+2)) ≤ 1 with ε of the negative inequality. Both give 1-s.
 */
inline GapResult gap_regular(const Params& p) {
  p.validate();
  const double D = p.energy_denominator(1.0 + p.s);  // equals n + 2
  const double kappa = kappa_regular(p), eps = epsilon_negative_regular(p);
  GapResult g;
  g.params = p;
  g.center = 1.0 + p.s;
  auto right = [&](double t) { return (1.0 - kappa) * (1.0 + t / D) - 1.0; };
  auto left = [&](double t) { return 1.0 - (1.0 + eps) * (1.0 - t / D); };
  // at t = D both are positive because κ < 1/2
  g.right.root = detail::bisect_first_nonnegative(right, 0.0, D);
  g.right.width = g.right.root;
  g.right.inequality = "(1-" + detail::fmt(kappa) + ")(1+t/" + detail::fmt(D) + ") >= 1";
  g.left.root = detail::bisect_first_nonnegative(left, 0.0, D);
  g.left.width = g.left.root;
  g.left.inequality = "(1+" + detail::fmt(eps) + ")(1-t/" + detail::fmt(D) + ") <= 1";
  g.left_width_as_written = 1.0 + p.s;
  return g;
}

/**
 * Gap around 2m. Right: smallest t in (0,1] with (1-ε₊t^β)(1+t/D) ≥ 1, D = n+a+4m-1;
 * when there is none the width is reported as 1 and flagged. Left: closed form
 * D ε₋/(1+ε₋) from (1+ε₋)(1-t/D) ≤ 1.
 */
inline GapResult gap_2m(const Params& p, int m, double eps_pos, double eps_neg, double beta) {
  p.validate();
  if (m < 1) throw ParameterError("m must be >= 1");
  if (!(eps_pos > 0.0 && eps_pos < 1.0)) throw ParameterError("ε for the log inequality must lie in (0,1)");
  if (!(eps_neg > 0.0)) throw ParameterError("ε for the negative inequality must be positive");
  if (!(beta >= 0.0 && beta < 1.0)) throw ParameterError("β must lie in [0,1)");
  const double D = p.energy_denominator(2.0 * m);
  GapResult g;
  g.params = p;
  g.m = m;
  g.center = 2.0 * m;
  auto right = [&](double t) { return (1.0 - eps_pos * std::pow(t, beta)) * (1.0 + t / D) - 1.0; };
  g.right.inequality =
      "(1-" + detail::fmt(eps_pos) + " t^" + detail::fmt(beta) + ")(1+t/" + detail::fmt(D) + ") >= 1";
  if (right(1.0) < 0.0) {
    g.right.capped = true;
    g.right.root = 1.0;
    g.right.width = 1.0;
  } else {
    g.right.root = detail::bisect_first_nonnegative(right, 0.0, 1.0);
    g.right.width = g.right.root;
  }
  g.left.width = D * eps_neg / (1.0 + eps_neg);
  g.left.root = g.left.width;
  g.left.inequality = "(1+" + detail::fmt(eps_neg) + ")(1-t/" + detail::fmt(D) + ") <= 1";
  return g;
}

}  // namespace fol
