#pragma once

/**
 * @file rational.hpp
 * @brief Small exact rational type for symbolic residual checks.
 *
 * 64-bit numerator/denominator with 128-bit intermediates; overflow raises.
 */

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>

#include "fol/errors.hpp"

namespace fol {

class Rational {
 public:
  Rational() = default;
  Rational(long long v) : num_(v), den_(1) {}  // NOLINT: implicit by design
  Rational(long long num, long long den) { assign(num, den); }

  long long num() const { return num_; }
  long long den() const { return den_; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  explicit operator double() const { return to_double(); }

  /// Exact rational equal to x when x has a continued fraction with
  /// denominator <= max_den that reproduces x bit-for-bit.
  static std::optional<Rational> from_double(double x, long long max_den = 1000000) {
    if (!std::isfinite(x)) return std::nullopt;
    long long h0 = 0, h1 = 1, k0 = 1, k1 = 0;
    double r = x;
    for (int it = 0; it < 64; ++it) {
      double fl = std::floor(r);
      if (std::fabs(fl) > 9e15) break;
      auto q = static_cast<long long>(fl);
      long long h2 = q * h1 + h0;
      long long k2 = q * k1 + k0;
      if (k2 > max_den) break;
      h0 = h1; h1 = h2; k0 = k1; k1 = k2;
      if (static_cast<double>(h1) / static_cast<double>(k1) == x) return Rational(h1, k1);
      double frac = r - fl;
      if (frac == 0.0) break;
      r = 1.0 / frac;
    }
    return std::nullopt;
  }

  friend Rational operator+(const Rational& l, const Rational& r) {
    return make(static_cast<__int128>(l.num_) * r.den_ + static_cast<__int128>(r.num_) * l.den_,
                static_cast<__int128>(l.den_) * r.den_);
  }
  friend Rational operator-(const Rational& l, const Rational& r) {
    return make(static_cast<__int128>(l.num_) * r.den_ - static_cast<__int128>(r.num_) * l.den_,
                static_cast<__int128>(l.den_) * r.den_);
  }
  friend Rational operator*(const Rational& l, const Rational& r) {
    return make(static_cast<__int128>(l.num_) * r.num_, static_cast<__int128>(l.den_) * r.den_);
  }
  friend Rational operator/(const Rational& l, const Rational& r) {
    if (r.num_ == 0) throw ParameterError("rational division by zero");
    return make(static_cast<__int128>(l.num_) * r.den_, static_cast<__int128>(l.den_) * r.num_);
  }
  Rational operator-() const { return Rational(-num_, den_); }
  Rational& operator+=(const Rational& o) { return *this = *this + o; }
  Rational& operator-=(const Rational& o) { return *this = *this - o; }
  Rational& operator*=(const Rational& o) { return *this = *this * o; }
  Rational& operator/=(const Rational& o) { return *this = *this / o; }
  friend bool operator==(const Rational& l, const Rational& r) { return l.num_ == r.num_ && l.den_ == r.den_; }
  friend bool operator!=(const Rational& l, const Rational& r) { return !(l == r); }

  friend std::ostream& operator<<(std::ostream& os, const Rational& r) {
    os << r.num_;
    if (r.den_ != 1) os << '/' << r.den_;
    return os;
  }

 private:
  long long num_ = 0;
  long long den_ = 1;

  static __int128 gcd128(__int128 a, __int128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
      __int128 t = a % b;
      a = b;
      b = t;
    }
    return a;
  }

  static Rational make(__int128 num, __int128 den) {
    if (den == 0) throw ParameterError("rational with zero denominator");
    if (den < 0) { num = -num; den = -den; }
    __int128 g = gcd128(num, den);
    if (g > 1) { num /= g; den /= g; }
    constexpr __int128 lim = static_cast<__int128>(INT64_MAX);
    if (num > lim || num < -lim || den > lim) throw Error("rational overflow");
    Rational out;
    out.num_ = static_cast<long long>(num);
    out.den_ = static_cast<long long>(den);
    return out;
  }

  void assign(long long num, long long den) { *this = make(num, den); }
};

inline double to_double(double x) { return x; }
inline double to_double(const Rational& x) { return x.to_double(); }

inline bool is_zero_coef(double x, double tol) { return std::fabs(x) <= tol; }
inline bool is_zero_coef(const Rational& x, double) { return x.num() == 0; }

}  // namespace fol
