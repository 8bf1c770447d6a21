#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fol/weiss.hpp"

using namespace fol;

namespace {

Eigen::VectorXd random_coefficients(const EigenBasis& b, std::mt19937_64& rng, int active) {
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.size()));
  std::uniform_int_distribution<std::size_t> pick(0, b.size() - 1);
  for (int i = 0; i < active; ++i) c(static_cast<Eigen::Index>(pick(rng))) = N(rng);
  return c;
}

SpectralTrace st_of(const Eigen::VectorXd& c) {
  SpectralTrace s;
  s.coefficients = c;
  return s;
}

}  // namespace

TEST(GradedSphereRule, IntegratesProfileEnergiesAccurately) {
  for (double s : {0.25, 0.5, 0.75}) {
    for (int n : {1, 2}) {
      Params p = Params::from_s(n, s);
      EigenBasis b = build_basis(p, 2);
      std::vector<double> e(static_cast<std::size_t>(n), 0.0);
      e[0] = 1.0;
      ProfileAlgebra alg(b, e);
      auto q = build_graded_sphere_quadrature(p, n == 1 ? 20 : 60);
      RegularProfile prof(e, s);
      double mass = q.integrate([&](const double* th) {
        double v = eval_h_e_s(prof, th);
        return v * v;
      });
      EXPECT_NEAR(mass, alg.h_norm2(), 1e-7 * alg.h_norm2()) << n << ' ' << s;
    }
  }
}

TEST(GradedSphereRule, ExactEnoughOnPolynomials) {
  for (double a : {-0.5, 0.5}) {
    Params p = Params::from_a(2, a);
    auto q = build_graded_sphere_quadrature(p, 12);
    EXPECT_NEAR(q.integrate([](const double* t) { return t[0] * t[0] * t[2] * t[2]; }), monomial_moment({2, 0, 2}, a),
                1e-12);
  }
}

TEST(WeissSpectral, ConstantModeFrozenValue) {
  EigenBasis b = build_basis(Params::from_a(1, 0.0), 4);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(5);
  c(0) = 2.0;
  EXPECT_NEAR(weiss_spectral(b, st_of(c), 1.5), -0.75 * 4.0, 1e-14);
}

TEST(WeissSpectral, VanishesOnMatchingEigenvalue) {
  EigenBasis b = build_basis(Params::from_a(2, 0.3), 4);
  for (std::size_t k : b.indices_of_degree(3)) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.size()));
    c(static_cast<Eigen::Index>(k)) = 1.7;
    EXPECT_NEAR(weiss_spectral(b, st_of(c), 3.0), 0.0, 1e-13);
  }
  Eigen::VectorXd c = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(b.size()));
  EXPECT_THROW(weiss_spectral(b, st_of(c), -1.0), ParameterError);
}

TEST(WeissSpectral, FlatProfileShiftEnergy) {
  for (double s : {0.3, 0.5, 0.8}) {
    Params p = Params::from_s(1, s);
    EigenBasis b = build_basis(p, 12);
    ProfileAlgebra alg(b, {1.0});
    TraceVec u = TraceVec::zeros(b.size());
    u.u0_flat = 1.0;
    const double norm2 = alg.u0_norm2(U0Kind::Flat);
    // W_{1+s}(r^{2s} u0) = -(1-s) ‖u0‖²
    EXPECT_NEAR(weiss_energy(alg, {{2 * s, u}}, 1 + s), -(1 - s) * norm2, 1e-12 * norm2);
    auto sh = weiss_shift(p, alg.spectral(u), 1 + s, -(1 - s));
    EXPECT_NEAR(sh.at_shifted, -(1 - s) * norm2, 1e-10 * norm2);
    // second value: W_{1+s}(r^{1+s} u0), checked against the exact energy
    EXPECT_NEAR(sh.at_mu, weiss_energy(alg, {{1 + s, u}}, 1 + s), 1e-10 * norm2);
  }
}

TEST(WeissShift, FrozenSecondDegreeValues) {
  Params p = Params::from_a(1, 0.0);
  EigenBasis b = build_basis(p, 4);
  auto h2 = build_h_2m<double>(1, 0.0, 1);
  SpectralTrace c = st_of(project_polynomial(h2, b));
  const double n2 = c.coefficients.squaredNorm();
  auto sh = weiss_shift(p, c, 1.5, 0.5);
  EXPECT_NEAR(sh.at_shifted, 0.5 * n2, 1e-14);
  EXPECT_NEAR(sh.at_mu, (1.0 + 0.5 / 3.0) * 0.5 * n2, 1e-14);
  EXPECT_NEAR(sh.at_mu, weiss_spectral(b, c, 1.5), 1e-12);
  auto zero = weiss_shift(p, c, 1.5, 0.0);
  EXPECT_EQ(zero.at_shifted, 0.0);
  EXPECT_EQ(zero.at_mu, 0.0);
}

TEST(WeissCross, KappaMatchesRegularFormula) {
  Params p = Params::from_a(1, 0.0);
  EXPECT_NEAR(p.kappa(2.0, 1.5), 1.0 / 7.0, 1e-15);
  for (int n : {1, 2, 3})
    for (double a : {-0.5, 0.0, 0.4}) {
      Params q = Params::from_a(n, a);
      EXPECT_NEAR(q.kappa(2.0, 1.0 + q.s), (1.0 + a) / (2.0 * n + a + 5.0), 1e-15);
    }
}

TEST(WeissCross, IdentityHoldsOnRandomTraces) {
  std::mt19937_64 rng(2024);
  for (int n : {1, 2})
    for (double a : {-0.5, 0.0, 0.5}) {
      EigenBasis b = build_basis(Params::from_a(n, a), 6);
      for (int trial = 0; trial < 20; ++trial) {
        auto c = random_coefficients(b, rng, 6);
        auto id = weiss_cross(b, st_of(c), 2.3, 1.2);
        EXPECT_NEAR(id.lhs, id.rhs, 1e-12 * std::max(1.0, std::fabs(id.lhs)));
        auto same = weiss_cross(b, st_of(c), 1.2, 1.2);
        EXPECT_EQ(same.kappa, 0.0);
        EXPECT_NEAR(same.lhs, 0.0, 1e-12 * c.squaredNorm());
        EXPECT_NEAR(same.rhs, 0.0, 1e-14);
      }
    }
}

TEST(WeissQuadrature, MatchesSpectralOnRandomTraces) {
  std::mt19937_64 rng(99);
  for (int n : {1, 2})
    for (double a : {-0.5, 0.0, 0.5}) {
      Params p = Params::from_a(n, a);
      EigenBasis b = build_basis(p, n == 1 ? 8 : 5);
      WeissRules rules = make_weiss_rules(p, 2 * b.max_degree + 4, false);
      for (int trial = 0; trial < 4; ++trial) {
        auto c = random_coefficients(b, rng, 5);
        for (double mu : {1.0 + p.s, 2.0}) {
          Field f = field_from_spectral(b, c, mu);
          const double wq = weiss_quadrature(f, mu, {}, 1.0, rules);
          const double ws = weiss_spectral(b, st_of(c), mu);
          EXPECT_NEAR(wq, ws, 1e-8 * std::max(1.0, std::fabs(ws))) << n << ' ' << a << ' ' << mu;
        }
        // non-matching homogeneity against the general form
        Field g = field_from_spectral(b, c, 2.4);
        EXPECT_NEAR(weiss_quadrature(g, 1.3, {}, 1.0, rules), weiss_homogeneous(b, c, 2.4, 1.3), 1e-8 * c.squaredNorm());
      }
    }
}

TEST(WeissQuadrature, SingleDegreeTwoModeFrozenRatio) {
  // n=1, a=0: W_{3/2}(r^{3/2} φ_2) = (4 - 9/4)/3 for a unit mode
  Params p = Params::from_a(1, 0.0);
  EigenBasis b = build_basis(p, 4);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(5);
  c(2) = 1.0;
  WeissRules rules = make_weiss_rules(p);
  EXPECT_NEAR(weiss_quadrature(field_from_spectral(b, c, 1.5), 1.5, {}, 1.0, rules), 7.0 / 12.0, 1e-8);
  EXPECT_NEAR(weiss_quadrature(field_from_spectral(b, c, 2.0), 2.0, {}, 0.7, rules), 0.0, 1e-10);
}

TEST(WeissQuadrature, RegularProfileHasZeroEnergyAtAnyRadius) {
  for (double s : {0.25, 0.5, 0.75}) {
    for (int n : {1, 2}) {
      Params p = Params::from_s(n, s);
      std::vector<double> e(static_cast<std::size_t>(n), 0.0);
      e[0] = 1.0;
      // the free boundary of h_e^s on the thin circle sits at ±π/2 from e; the
      // radial integrand is a pure power so a light radial rule suffices
      WeissRules rules = make_weiss_rules(p, 20, true, 12, 6, {std::numbers::pi / 2, -std::numbers::pi / 2});
      Field h = field_from_profile(RegularProfile(e, s));
      for (double r : (n == 1 ? std::vector<double>{0.3, 1.0, 2.5} : std::vector<double>{0.3, 2.5})) EXPECT_NEAR(weiss_quadrature(h, 1 + s, {}, r, rules), 0.0, 2e-6) << n << ' ' << s << ' ' << r;
    }
  }
}

TEST(WeissQuadrature, AgreesWithExactProfileAlgebra) {
  for (double s : {0.3, 0.6}) {
    Params p = Params::from_s(1, s);
    EigenBasis b = build_basis(p, 4);
    ProfileAlgebra alg(b, {1.0});
    TraceVec t = TraceVec::zeros(b.size());
    t.h = 0.7;
    t.u0_plus = -0.2;
    t.modes(2) = 0.3;
    TraceVec u = TraceVec::zeros(b.size());
    u.u0_flat = 0.5;
    u.modes(1) = -0.4;
    HomField F{{1 + s, t}, {2 * s, u}, {2.0, t}};
    Field f = field_from_homogeneous(alg, F);
    WeissRules rules = make_weiss_rules(p, 24);
    const double exact = weiss_energy(alg, F, 1 + s);
    EXPECT_NEAR(weiss_quadrature(f, 1 + s, {}, 1.0, rules), exact, 1e-6 * std::max(1.0, std::fabs(exact)));
  }
}

TEST(WeissQuadrature, ScalingInvarianceAndTranslation) {
  Params p = Params::from_a(2, 0.2);
  EigenBasis b = build_basis(p, 4);
  std::mt19937_64 rng(5);
  auto c = random_coefficients(b, rng, 4);
  Field f = field_from_spectral(b, c, 1.7);
  WeissRules rules = make_weiss_rules(p, 14, false);
  const double w1 = weiss_quadrature(f, 1.7, {}, 1.0, rules);
  EXPECT_NEAR(weiss_quadrature(f, 1.7, {}, 0.25, rules), w1, 1e-9 * std::max(1.0, std::fabs(w1)));
  // translated copy evaluated about the shifted base point
  Field g;
  g.n = 2;
  g.eval = [f](const double* X, double* gr) {
    double Y[3] = {X[0] - 0.3, X[1] + 0.1, X[2]};
    return f.value_grad(Y, gr);
  };
  EXPECT_NEAR(weiss_quadrature(g, 1.7, {0.3, -0.1}, 1.0, rules), w1, 1e-9 * std::max(1.0, std::fabs(w1)));
  EXPECT_THROW(weiss_quadrature(g, 1.7, {0.3, -0.1, 0.2}, 1.0, rules), ParameterError);
  EXPECT_THROW(weiss_quadrature(g, 1.7, {0.3}, 1.0, rules), InvalidInput);
}

TEST(WeissQuadrature, RejectsRadiusOutsideDomain) {
  Params p = Params::from_a(1, 0.0);
  Field f = field_from_polynomial(build_h_2m<double>(1, 0.0, 1));
  f.boundary_distance = [](const double* X) { return 1.0 - std::hypot(X[0], X[1]); };
  WeissRules rules = make_weiss_rules(p, 8, false);
  EXPECT_NO_THROW(weiss_quadrature(f, 2.0, {0.2}, 0.8, rules));
  EXPECT_THROW(weiss_quadrature(f, 2.0, {0.2}, 0.9, rules), ParameterError);
  EXPECT_THROW(weiss_quadrature(f, 2.0, {0.0}, 0.0, rules), ParameterError);
}

TEST(BoundaryQuantities, HomogeneousUnitTraceScaling) {
  for (int n : {1, 2}) {
    Params p = Params::from_a(n, -0.3);
    EigenBasis b = build_basis(p, 3);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.size()));
    c(1) = 0.6;
    c(static_cast<Eigen::Index>(b.size() - 1)) = 0.8;  // unit norm
    WeissRules rules = make_weiss_rules(p, 12, false);
    const double lam = 2.2;
    Field f = field_from_spectral(b, c, lam);
    for (double r : {0.2, 0.9}) {
      auto bq = boundary_quantities(f, {}, r, rules);
      const double expected = std::pow(r, n + p.a + 2 * lam);
      EXPECT_NEAR(bq.H, expected, 1e-12 * expected);
      // r I / H = λ for homogeneous fields
      EXPECT_NEAR(r * bq.I / bq.H, lam, 1e-7);
    }
  }
}

TEST(BoundaryQuantities, ZeroFieldAndDegenerateSignal) {
  Params p = Params::from_a(1, 0.0);
  Field z;
  z.n = 1;
  z.eval = [](const double*, double* g) {
    if (g) g[0] = g[1] = 0.0;
    return 0.0;
  };
  WeissRules rules = make_weiss_rules(p, 8, false);
  auto bq = boundary_quantities(z, {0.0}, 0.5, rules);
  EXPECT_EQ(bq.H, 0.0);
  EXPECT_EQ(bq.I, 0.0);
  EXPECT_FALSE(almgren_N(z, {0.0}, 0.5, rules).has_value());
}

TEST(Frequencies, RegularProfileFrequencies) {
  for (double s : {0.3, 0.5, 0.7}) {
    Params p = Params::from_s(1, s);
    WeissRules rules = make_weiss_rules(p, 20);
    Field h = field_from_profile(RegularProfile({1.0}, s));
    auto N = almgren_N(h, {0.0}, 0.4, rules);
    ASSERT_TRUE(N.has_value());
    EXPECT_NEAR(*N, 1 + s, 1e-6);
    auto bq = boundary_quantities(h, {0.0}, 0.4, rules);
    EXPECT_NEAR(0.4 * bq.I / bq.H, 1 + s, 1e-6);
    FrequencyParams fp;
    fp.lambda = 1 + s;
    EXPECT_NEAR(phi_frequency(h, {0.0}, 0.1, fp, rules), 1 + p.a + 2 * (1 + s), 1e-6);
  }
}

TEST(Frequencies, ProfileOverRadiiGrid) {
  Params p = Params::from_s(1, 0.5);
  WeissRules rules = make_weiss_rules(p, 20);
  Field h = field_from_profile(RegularProfile({1.0}, 0.5), 2.0);
  FrequencyParams fp;
  fp.lambda = 1.5;
  auto radii = geometric_radii(0.5, 0.05);
  auto prof = build_frequency_profile(h, {0.0}, radii, fp, rules);
  ASSERT_EQ(prof.radii.size(), radii.size());
  for (std::size_t i = 0; i < prof.radii.size(); ++i) {
    EXPECT_NEAR(prof.N_values[i], 1.5, 1e-6);
    EXPECT_NEAR(prof.Phi_values[i], 4.0, 1e-6);
    EXPECT_NEAR(prof.W_values[i], 0.0, 1e-5);
    EXPECT_EQ(prof.W_values[i], prof.Wmod_values[i]);
    // bulk cross-check of the flux form
    EXPECT_NEAR(prof.I_values[i], prof.D_values[i], 1e-6 * prof.D_values[i]);
  }
  auto res = derivative_identity_residuals(prof);
  // centered differences on the ratio-0.9 grid carry an O(η²) error of about 3% of H'
  for (std::size_t i = 1; i + 1 < res.size(); ++i) EXPECT_NEAR(res[i] / (prof.H_values[i] / prof.radii[i]), 0.0, 0.15);
  EXPECT_NEAR(extrapolate_to_zero(prof.radii, prof.N_values), 1.5, 1e-6);
  std::vector<double> err(prof.radii.size(), 1e-9);
  EXPECT_TRUE(check_nondecreasing(prof.radii, prof.Phi_values, err).ok);
  EXPECT_TRUE(check_nondecreasing(prof.radii, prof.H_scaled(), err).ok);
  auto csv = prof.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "r,H,I,N,Phi,W,Wmod");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), radii.size() + 1);
}

TEST(Frequencies, ModifiedWeissAddsCoupling) {
  Params p = Params::from_a(1, 0.0);
  EigenBasis b = build_basis(p, 4);
  Field f = field_from_polynomial(build_h_2m<double>(1, 0.0, 1));
  WeissRules rules = make_weiss_rules(p, 12, false);
  EXPECT_EQ(weiss_modified(f, {}, {0.0}, 0.5, 2.0, rules), weiss_quadrature(f, 2.0, {0.0}, 0.5, rules));
  // h ≡ 1: coupling = ∫_{B_r} (x² - y²) = 0 by symmetry, so 𝒲 = W
  auto one = [](const double*) { return 1.0; };
  EXPECT_NEAR(weiss_modified(f, one, {0.0}, 0.5, 2.0, rules), weiss_quadrature(f, 2.0, {0.0}, 0.5, rules), 1e-13);
  // h = x²: coupling = ∫_{B_r} x²(x² - y²) = π r^6 / 12
  auto xx = [](const double* X) { return X[0] * X[0]; };
  const double r = 0.5;
  const double expected = weiss_quadrature(f, 2.0, {0.0}, r, rules) + std::numbers::pi * std::pow(r, 6) / 12.0 / std::pow(r, 4);
  EXPECT_NEAR(weiss_modified(f, xx, {0.0}, r, 2.0, rules), expected, 1e-12);
}

TEST(Monitors, MonotonicityCheckAndCalibration) {
  std::vector<double> radii{0.5, 0.4, 0.3, 0.2};
  std::vector<double> inc{4.0, 3.0, 2.0, 1.0};
  std::vector<double> err(4, 0.0);
  EXPECT_TRUE(check_nondecreasing(radii, inc, err).ok);
  std::vector<double> bump{4.0, 3.0, 3.05, 1.0};
  auto rep = check_nondecreasing(radii, bump, err);
  EXPECT_FALSE(rep.ok);
  EXPECT_EQ(rep.worst_index, 1u);
  EXPECT_NEAR(rep.worst_excess, 0.05, 1e-14);
  std::vector<double> tol(4, 0.006);
  EXPECT_TRUE(check_nondecreasing(radii, bump, tol).ok);

  FrequencyProfile prof;
  prof.params = Params::from_a(1, 0.0);
  prof.fp.k = 2;
  prof.fp.gamma = 1.0;
  prof.fp.lambda = 2.0;
  prof.radii = radii;
  // decreasing in r: needs a positive constant
  prof.Wmod_values = {-0.2, -0.1, -0.05, 0.0};
  auto cal = calibrate_weiss_constant(prof, err);
  EXPECT_NEAR(cal.C, 0.1 / 0.1, 1e-12);
  prof.fp.Cw = cal.C;
  EXPECT_TRUE(check_nondecreasing(radii, prof.Wmod_monitor(), std::vector<double>(4, 1e-15)).ok);
  prof.fp.lambda = 3.5;
  EXPECT_THROW(calibrate_weiss_constant(prof, err), PreconditionError);

  prof.fp.p = 0.5;
  prof.logM_slope = {4.0, 4.05, 4.02, 4.1};
  auto cp = calibrate_phi_constant(prof, err);
  ASSERT_TRUE(cp.feasible);
  prof.fp.C = cp.C;
  prof.refresh_phi();
  EXPECT_TRUE(check_nondecreasing(radii, prof.Phi_values, std::vector<double>(4, 1e-15)).ok);
}

TEST(Monitors, ExtrapolationIsExactForLinearData) {
  std::vector<double> r{0.4, 0.2, 0.1, 0.05};
  std::vector<double> v;
  for (double x : r) v.push_back(1.25 + 3.0 * x);
  EXPECT_NEAR(extrapolate_to_zero(r, v), 1.25, 1e-14);
  EXPECT_THROW(geometric_radii(0.1, 0.5), ParameterError);
  auto g = geometric_radii(0.5, 0.01);
  EXPECT_EQ(g.size(), 38u);
  EXPECT_NEAR(g[1], 0.45, 1e-15);
}
