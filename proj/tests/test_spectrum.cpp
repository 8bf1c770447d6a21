#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "fol/spectrum.hpp"
#include "oracles.hpp"

using namespace fol;

namespace {

struct Case {
  int n;
  double a;
};

const Case kCases[] = {{1, -0.5}, {1, 0.0}, {1, 0.6}, {2, -0.4}, {2, 0.0}, {2, 0.5}};

}  // namespace

TEST(Spectrum, KernelDimensionMatchesMonomialCount) {
  for (auto c : kCases) {
    Params p = Params::from_a(c.n, c.a);
    for (int d = 0; d <= 6; ++d) EXPECT_EQ(La_kernel_dimension(p, d), c.n == 1 ? 1 : d + 1) << c.n << ' ' << c.a << ' ' << d;
  }
}

TEST(Spectrum, ModesAreHarmonicHomogeneousAndEven) {
  for (auto c : kCases) {
    Params p = Params::from_a(c.n, c.a);
    EigenBasis b = build_basis(p, 6);
    for (const auto& m : b.modes) {
      EXPECT_TRUE(m.poly.is_homogeneous());
      EXPECT_TRUE(m.poly.is_even_in_last());
      EXPECT_EQ(m.poly.degree(), m.degree);
      EXPECT_TRUE(m.poly.apply_La(c.a).is_zero(1e-9));
      EXPECT_DOUBLE_EQ(m.eigenvalue, m.degree * (m.degree + c.n + c.a - 1.0));
    }
  }
}

TEST(Spectrum, OrthonormalUnderIndependentQuadrature) {
  for (auto c : kCases) {
    Params p = Params::from_a(c.n, c.a);
    EigenBasis b = build_basis(p, 5);
    for (std::size_t i = 0; i < b.size(); ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        double g = oracle::sphere_integral(c.n, c.a, [&](const double* th) { return b.modes[i](th) * b.modes[j](th); });
        EXPECT_NEAR(g, i == j ? 1.0 : 0.0, 1e-9) << c.n << ' ' << c.a << ' ' << i << ' ' << j;
      }
  }
}

TEST(Spectrum, TangentialEnergyEqualsEigenvalue) {
  for (auto c : kCases) {
    Params p = Params::from_a(c.n, c.a);
    EigenBasis b = build_basis(p, 4);
    for (const auto& m : b.modes) {
      double e = oracle::sphere_integral(c.n, c.a, [&](const double* th) {
        std::vector<double> g(static_cast<std::size_t>(c.n + 1));
        m.poly.evaluate_with_gradient(th, g.data());
        auto t = oracle::tangential(g, th);
        return oracle::dot(t, t);
      });
      EXPECT_NEAR(e, m.eigenvalue, 1e-8 * std::max(1.0, m.eigenvalue));
    }
  }
}

TEST(Spectrum, UnweightedCircleModesAreFourierModes) {
  EigenBasis b = build_basis(Params::from_a(1, 0.0), 4);
  const double inv = 1.0 / std::sqrt(std::numbers::pi);
  for (int d = 1; d <= 4; ++d) {
    const auto& m = b.modes[static_cast<std::size_t>(d)];
    for (double t : {0.0, 0.3, 1.1, 2.9}) {
      double th[2] = {std::cos(t), std::sin(t)};
      EXPECT_NEAR(m(th), inv * std::cos(d * t), 1e-13);
    }
  }
  double th0[2] = {0.2, 0.9};
  EXPECT_NEAR(b.modes[0](th0), 1.0 / std::sqrt(2 * std::numbers::pi), 1e-14);
}

TEST(Spectrum, ModeCountsPerDegree) {
  EigenBasis b = build_basis(Params::from_a(2, 0.2), 5);
  EXPECT_EQ(b.size(), 21u);
  EXPECT_EQ(b.indices_of_degree(3).size(), 4u);
  EXPECT_EQ(default_max_degree(1), 12);
  EXPECT_EQ(default_max_degree(2), 8);
}

TEST(Spectrum, QuadratureProjectionMatchesExactProjection) {
  for (auto c : kCases) {
    Params p = Params::from_a(c.n, c.a);
    EigenBasis b = build_basis(p, 6);
    auto q = build_sphere_quadrature(p, 16);
    Polynomial<double> f(c.n + 1);
    f.add_term(Exponents(static_cast<std::size_t>(c.n + 1), 0), 0.7);
    Exponents e2(static_cast<std::size_t>(c.n + 1), 0);
    e2[0] = 2;
    f.add_term(e2, -1.3);
    Exponents e3(static_cast<std::size_t>(c.n + 1), 0);
    e3[0] = 1;
    e3.back() = 2;
    f.add_term(e3, 0.4);
    TraceFn tf{[&](const double* th) { return f.evaluate(th); }, true};
    SpectralTrace st = project(tf, b, q);
    Eigen::VectorXd exact = project_polynomial(f, b);
    EXPECT_LT((st.coefficients - exact).norm(), 1e-12);
    EXPECT_LT(st.residual_norm, 1e-6);
    // the trace is reproduced pointwise
    double th[3] = {0.6, 0.0, 0.8};
    if (c.n == 1) {
      th[1] = 0.8;
    }
    EXPECT_NEAR(evaluate_trace(b, exact, th), f.evaluate(th), 1e-12);
    EXPECT_NEAR(trace_polynomial(b, exact).evaluate(th), f.evaluate(th), 1e-12);
  }
}

TEST(Spectrum, ResidualCapturesUnrepresentedDegrees) {
  Params p = Params::from_a(1, 0.0);
  EigenBasis b = build_basis(p, 4);
  auto q = build_sphere_quadrature(p, 20);
  // cos(6t) is orthogonal to all retained modes and has squared norm π
  TraceFn f{[](const double* th) { return std::cos(6.0 * std::atan2(th[1], th[0])); }, true};
  SpectralTrace st = project(f, b, q);
  EXPECT_LT(st.coefficients.norm(), 1e-12);
  EXPECT_NEAR(st.residual_norm, std::sqrt(std::numbers::pi), 1e-10);
}

TEST(Spectrum, RejectsOddTrace) {
  Params p = Params::from_a(1, 0.0);
  EigenBasis b = build_basis(p, 2);
  auto q = build_sphere_quadrature(p, 8);
  TraceFn f{[](const double* th) { return th[1]; }, false};
  EXPECT_THROW(project(f, b, q), InvalidInput);
}

TEST(Spectrum, TangentialEnergyOfCoefficients) {
  EigenBasis b = build_basis(Params::from_a(1, 0.0), 3);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(4);
  c(2) = 2.0;
  c(3) = 1.0;
  EXPECT_DOUBLE_EQ(tangential_energy(b, c), 4.0 * 4.0 + 9.0);
}

TEST(Spectrum, JsonRoundTrip) {
  EigenBasis b = build_basis(Params::from_a(2, -0.3), 4);
  EigenBasis r = basis_from_json(nlohmann::json::parse(basis_to_json(b).dump()));
  ASSERT_EQ(r.size(), b.size());
  double th[3] = {0.48, 0.6, 0.64};
  for (std::size_t k = 0; k < b.size(); ++k) {
    EXPECT_EQ(r.modes[k].degree, b.modes[k].degree);
    EXPECT_DOUBLE_EQ(r.modes[k](th), b.modes[k](th));
  }
  EXPECT_THROW(basis_from_json(nlohmann::json::parse(R"({"n":1})")), InvalidInput);
}

TEST(Spectrum, RejectsBadDegree) { EXPECT_THROW(build_basis(Params::from_a(1, 0.0), -1), ParameterError); }
