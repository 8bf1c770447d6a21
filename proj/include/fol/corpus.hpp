#pragma once

/**
 * @file corpus.hpp
 * @brief Reproducible random admissible traces and thin-sphere extrema.
 *
 * Random numbers come from std::mt19937_64 mapped to doubles by bit slicing,
 * and normals come from Box-Muller, so a seed yields the same corpus with
 * every standard library.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fol/errors.hpp"
#include "fol/spectrum.hpp"

namespace fol {

/// Portable uniform/normal source on top of mt19937_64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    spare_ = rad * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return rad * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Point θ' on the thin sphere ∂B'_1 ⊂ R^{n+1} (last coordinate zero).
inline std::vector<double> thin_sphere_point(int n, double t) {
  std::vector<double> th(static_cast<std::size_t>(n + 1), 0.0);
  if (n == 1) {
    th[0] = t < 0.5 ? 1.0 : -1.0;
  } else {
    th[0] = std::cos(t);
    th[1] = std::sin(t);
  }
  return th;
}

struct ThinExtremum {
  double value = 0.0;
  std::vector<double> point;
};

/**
 * Minimum of f over ∂B'_1. For n = 1 the thin sphere is {±1}; for n = 2 the
 * circle is sampled densely and the best sample is refined by Newton steps on
 * the angle with central differences.
 */
inline ThinExtremum thin_sphere_min(const std::function<double(const double*)>& f, int n, int samples = 2048) {
  if (n == 1) {
    ThinExtremum out;
    out.value = std::numeric_limits<double>::infinity();
    for (double t : {0.0, 1.0}) {
      auto th = thin_sphere_point(1, t);
      const double v = f(th.data());
      if (v < out.value) out = {v, th};
    }
    return out;
  }
  if (n != 2) throw ParameterError("thin sphere extrema implemented for n <= 2");
  auto at = [&](double t) {
    auto th = thin_sphere_point(2, t);
    return f(th.data());
  };
  double best_t = 0.0, best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    const double t = 2.0 * std::numbers::pi * i / samples;
    const double v = at(t);
    if (v < best) best = v, best_t = t;
  }
  const double h = 1e-4;
  for (int it = 0; it < 8; ++it) {
    const double fp = at(best_t + h), fm = at(best_t - h), f0 = at(best_t);
    const double d1 = (fp - fm) / (2.0 * h), d2 = (fp - 2.0 * f0 + fm) / (h * h);
    if (!(d2 > 0.0)) break;
    const double step = std::clamp(-d1 / d2, -std::numbers::pi / samples, std::numbers::pi / samples);
    const double v = at(best_t + step);
    if (!(v < best)) break;
    best = v;
    best_t += step;
    if (std::fabs(step) < 1e-13) break;
  }
  return {best, thin_sphere_point(2, best_t)};
}

/// Index of the constant mode of a basis.
inline std::size_t constant_mode_index(const EigenBasis& b) {
  for (std::size_t k = 0; k < b.size(); ++k)
    if (b.modes[k].degree == 0) return k;
  throw ConsistencyError("basis has no constant mode");
}

/// Adds the minimal constant making the trace nonnegative on ∂B'_1, then scales to unit norm.
inline Eigen::VectorXd make_admissible(const EigenBasis& b, Eigen::VectorXd c) {
  const int n = b.params.n;
  const auto k0 = static_cast<Eigen::Index>(constant_mode_index(b));
  std::vector<double> origin_dir(static_cast<std::size_t>(n + 1), 0.0);
  origin_dir[0] = 1.0;
  const double phi0 = b.modes[static_cast<std::size_t>(k0)](origin_dir.data());
  auto tr = [&](const double* th) { return evaluate_trace(b, c, th); };
  const double mn = thin_sphere_min(tr, n).value;
  if (mn < 0.0) c(k0) += -mn / phi0 * (1.0 + 1e-9) + 1e-12;
  const double nrm = c.norm();
  if (nrm > 0.0) c /= nrm;
  return c;
}

/**
 * Random admissible trace: coefficients N(0,1)/(1+degree)^2, then the minimal
 * constant making the trace nonnegative on ∂B'_1 is added, then the trace is
 * scaled to unit weighted L² norm.
 */
inline Eigen::VectorXd random_admissible_trace(const EigenBasis& b, Rng& rng) {
  const auto K = static_cast<Eigen::Index>(b.size());
  Eigen::VectorXd c(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const double d = 1.0 + b.modes[static_cast<std::size_t>(k)].degree;
    c(k) = rng.normal() / (d * d);
  }
  return make_admissible(b, std::move(c));
}

inline std::vector<Eigen::VectorXd> random_admissible_corpus(const EigenBasis& b, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(random_admissible_trace(b, rng));
  return out;
}

/**
 * Deterministic traces ±φ_k for every mode of degree above min_degree, made
 * admissible. Random corpora rarely put most of the mass on high modes; these
 * traces do, which is where the inequalities at 2m are tightest.
 */
inline std::vector<Eigen::VectorXd> mode_stress_corpus(const EigenBasis& b, int min_degree) {
  std::vector<Eigen::VectorXd> out;
  for (std::size_t k = 0; k < b.size(); ++k) {
    if (b.modes[k].degree <= min_degree) continue;
    for (double sign : {1.0, -1.0}) {
      Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.size()));
      c(static_cast<Eigen::Index>(k)) = sign;
      out.push_back(make_admissible(b, std::move(c)));
    }
  }
  return out;
}

}  // namespace fol
