#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "fol/obstacle_solver.hpp"
#include "oracles.hpp"

using namespace fol;

namespace {

MeshSpec grid(int n, int N) {
  MeshSpec m;
  m.n = n;
  m.nx = N;
  m.ny = N;
  return m;
}

bool energy_nonincreasing(const std::vector<double>& h) {
  for (std::size_t i = 1; i < h.size(); ++i)
    if (h[i] > h[i - 1] + 1e-12 * std::fabs(h[i - 1])) return false;
  return true;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("fol_test_" + name)).string();
}

}  // namespace

// ---------------------------------------------------------------------------
// mesh and operator

TEST(Mesh, GradedTowardThinSpace) {
  for (double a : {-0.6, 0.0, 0.7}) {
    auto m = build_mesh(Params::from_a(1, a), grid(1, 64));
    EXPECT_EQ(m->y.front(), 0.0);
    EXPECT_EQ(m->y.back(), 1.0);
    for (std::size_t j = 1; j < m->y.size(); ++j) EXPECT_GT(m->y[j], m->y[j - 1]);
    EXPECT_LT(m->min_spacing(), 0.1 * (m->y.back() - m->y[m->y.size() - 2]));
    EXPECT_GE(m->cells_below_sqrt_hmin(), 6);
    double mass = 0.0;
    for (double w : m->row_mass) mass += w;
    EXPECT_NEAR(mass, 1.0 / (1.0 + a), 1e-13);
    // vertical conductance is 1/∫ y^{-a}
    EXPECT_NEAR(m->vert_cond[0], (1.0 - a) / std::pow(m->y[1], 1.0 - a), 1e-9 * m->vert_cond[0]);
  }
}

TEST(Mesh, RejectsBadSpecs) {
  const Params p = Params::from_a(1, 0.0);
  MeshSpec m = grid(1, 64);
  m.nx = 63;
  EXPECT_THROW(build_mesh(p, m), ParameterError);
  m = grid(1, 64);
  m.grading = 1.0;
  EXPECT_THROW(build_mesh(p, m), ParameterError);
  EXPECT_THROW(build_mesh(p, grid(2, 16)), ParameterError);
  EXPECT_THROW(build_mesh(Params::from_a(2, 0.0), grid(1, 16)), ParameterError);
}

TEST(DiscreteOperatorTest, SymmetricPositiveSemidefiniteWithConstantKernel) {
  for (int n : {1, 2}) {
    auto m = build_mesh(Params::from_a(n, 0.3), grid(n, n == 1 ? 16 : 8));
    auto op = assemble(m);
    std::mt19937_64 gen(7);
    std::normal_distribution<double> nd;
    std::vector<double> u(m->size()), w(m->size()), Au, Aw;
    for (auto& x : u) x = nd(gen);
    for (auto& x : w) x = nd(gen);
    op->apply(u, Au);
    op->apply(w, Aw);
    double uAw = 0.0, wAu = 0.0, uAu = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) uAw += u[i] * Aw[i], wAu += w[i] * Au[i], uAu += u[i] * Au[i];
    EXPECT_NEAR(uAw, wAu, 1e-10 * std::fabs(uAw));
    EXPECT_GT(uAu, 0.0);
    EXPECT_NEAR(op->energy(u), uAu, 1e-10 * uAu);
    std::vector<double> c(m->size(), 3.7), Ac;
    op->apply(c, Ac);
    EXPECT_EQ(op->energy(c), 0.0);
    for (double r : Ac) EXPECT_NEAR(r, 0.0, 1e-10);
  }
}

TEST(DiscreteOperatorTest, EnergyConvergesToWeightedDirichletIntegral) {
  // ∫_{[-1,1]x[0,1]} |∇(x + y²)|² y^a = 2/(1+a) + 8/(3+a)
  for (double a : {-0.5, 0.0, 0.5}) {
    const double exact = 2.0 / (1.0 + a) + 8.0 / (3.0 + a);
    std::vector<double> errs;
    for (int N : {16, 32, 64}) {
      auto m = build_mesh(Params::from_a(1, a), grid(1, N));
      auto op = assemble(m);
      std::vector<double> v(m->size());
      for (std::size_t col = 0; col < m->ncols; ++col)
        for (std::size_t j = 0; j < m->nrows; ++j) v[m->node(col, j)] = m->column_x(col)[0] + m->y[j] * m->y[j];
      errs.push_back(std::fabs(op->energy(v) - exact));
    }
    EXPECT_LT(errs.back(), 2e-3 * exact) << "a=" << a;
    EXPECT_LT(errs[2], 0.5 * errs[0]) << "a=" << a;
  }
}

// ---------------------------------------------------------------------------
// solver

TEST(Psor, ObstacleBelowGivesZeroSolution) {
  ObstacleProblem pr;
  pr.params = Params::from_a(1, 0.2);
  pr.datum = [](const double*) { return 0.0; };
  pr.obstacle = [](const double*) { return -1.0; };
  auto sol = solve_psor(pr, grid(1, 32));
  EXPECT_TRUE(sol.converged);
  for (double v : sol.v) EXPECT_EQ(v, 0.0);
  for (char c : sol.contact()) EXPECT_FALSE(c);
  EXPECT_TRUE(extract_free_boundary(sol).empty());
}

TEST(Psor, ProfileDatumReproducesProfile) {
  for (double a : {-0.5, 0.0, 0.5}) {
    const Params p = Params::from_a(1, a);
    auto pr = profile_problem(p, {1.0});
    auto sol = solve_psor(pr, grid(1, 128));
    ASSERT_TRUE(sol.converged);
    ASSERT_TRUE(sol.coarse);
    const double err = sol.sup_error(pr.datum), err_coarse = sol.coarse->sup_error(pr.datum);
    // max |h| over the box is attained at (1, 0): (1/s)·2^s
    const double scale = std::pow(2.0, p.s) / p.s;
    EXPECT_LT(err, 0.02 * scale) << "a=" << a;
    EXPECT_LT(err / err_coarse, 0.7) << "a=" << a;
  }
}

TEST(Psor, PolynomialSolutionIsExactForFlatWeight) {
  const Params p = Params::from_a(1, 0.0);
  auto pr = polynomial_problem(p, build_h_2m<double>(1, 0.0, 1));
  auto sol = solve_psor(pr, grid(1, 64));
  ASSERT_TRUE(sol.converged);
  EXPECT_LT(sol.sup_error(pr.datum), 1e-8);
}

TEST(Psor, PolynomialSolutionConvergesForWeightedCase) {
  const Params p = Params::from_a(1, 0.4);
  auto pr = polynomial_problem(p, build_h_2m<double>(1, 0.4, 1));
  auto sol = solve_psor(pr, grid(1, 64));
  ASSERT_TRUE(sol.converged);
  const double err = sol.sup_error(pr.datum), err_coarse = sol.coarse->sup_error(pr.datum);
  EXPECT_LT(err, 1e-3);
  EXPECT_LT(err / err_coarse, 0.7);
}

TEST(Psor, EnergyNonincreasingAcrossSweeps) {
  for (bool cascade : {false, true}) {
    SolverOptions opt;
    opt.cascadic = cascade;
    const Params p = Params::from_a(1, -0.3);
    auto sol = solve_psor(profile_problem(p, {1.0}), grid(1, 64), opt);
    ASSERT_GT(sol.energy_history.size(), 3u);
    EXPECT_TRUE(energy_nonincreasing(sol.energy_history));
    EXPECT_TRUE(energy_nonincreasing(sol.coarse ? sol.coarse->energy_history : sol.energy_history));
  }
  // with an active obstacle and a poor start
  ObstacleProblem pr;
  pr.params = Params::from_a(1, 0.0);
  pr.datum = [](const double* X) { return X[0] * X[0] - X[1] * X[1] - 0.5; };
  pr.obstacle = [](const double* x) { return 0.2 - x[0] * x[0]; };
  SolverOptions opt;
  opt.cascadic = false;
  auto sol = solve_psor(pr, grid(1, 64), opt);
  EXPECT_TRUE(energy_nonincreasing(sol.energy_history));
  EXPECT_GT(sol.energy_history.front(), sol.energy_history.back());
}

TEST(Psor, KktConditionsHold) {
  ObstacleProblem pr;
  pr.params = Params::from_a(1, 0.3);
  pr.datum = [](const double* X) { return X[0] * X[0] - X[1] * X[1] - 0.5; };
  pr.obstacle = [](const double* x) { return 0.2 - x[0] * x[0]; };
  for (const auto& prob : {pr, profile_problem(Params::from_a(1, -0.4), {-1.0})}) {
    auto sol = solve_psor(prob, grid(1, 64));
    ASSERT_TRUE(sol.converged);
    const auto k = sol.kkt();
    EXPECT_TRUE(k.ok) << k.min_gap << " " << k.max_flux << " " << k.interior_residual << " "
                      << k.max_complementarity;
    EXPECT_GE(k.min_gap, 0.0);
    // the flux is nonpositive on contact and nearly zero elsewhere
    const auto flux = sol.bottom_flux();
    const auto contact = sol.contact();
    int contacts = 0;
    for (std::size_t c = 0; c < flux.size(); ++c) {
      if (contact[c]) ++contacts;
      if (contact[c] && !sol.mesh->is_boundary_column(c)) {
        EXPECT_LE(flux[c], 1e-6);
      }
    }
    EXPECT_GT(contacts, 2);
  }
}

TEST(Psor, RejectsIncompatibleInputs) {
  ObstacleProblem pr;
  pr.params = Params::from_a(1, 0.0);
  EXPECT_THROW(solve_psor(pr, grid(1, 16)), InvalidInput);
  pr.datum = [](const double*) { return 0.0; };
  pr.obstacle = [](const double*) { return 1.0; };
  EXPECT_THROW(solve_psor(pr, grid(1, 16)), PreconditionError);
  pr.obstacle = [](const double*) { return -1.0; };
  SolverOptions opt;
  opt.omega = 2.5;
  EXPECT_THROW(solve_psor(pr, grid(1, 16), opt), ParameterError);
  opt = {};
  opt.tol = 0.0;
  EXPECT_THROW(solve_psor(pr, grid(1, 16), opt), ParameterError);
}

TEST(Psor, ReductionToZeroObstacleCommutesWithSolve) {
  // quadratic obstacle: u - q̃ solves the zero-obstacle problem with datum g - q̃
  for (double a : {0.0, 0.4}) {
    const Params p = Params::from_a(1, a);
    Polynomial<double> q(1);
    q.add_term({0}, 0.2);
    q.add_term({2}, -1.0);
    const Obstacle obs = polynomial_obstacle(q);
    const ReducedProblem red = reduce_obstacle(p, obs, {0.0}, 2);
    auto g = [](const double* X) { return X[0] * X[0] - X[1] * X[1] - 0.5; };
    ObstacleProblem full;
    full.params = p;
    full.datum = g;
    full.obstacle = obs.value;
    ObstacleProblem zero;
    zero.params = p;
    zero.datum = [red, g](const double* X) { return red.to_reduced(g(X), X); };
    zero.obstacle = [](const double*) { return 0.0; };
    auto su = solve_psor(full, grid(1, 64));
    auto sv = solve_psor(zero, grid(1, 64));
    const Mesh& m = *su.mesh;
    double diff = 0.0;
    std::vector<double> X(2);
    for (std::size_t col = 0; col < m.ncols; ++col)
      for (std::size_t j = 0; j < m.nrows; ++j) {
        X[0] = m.column_x(col)[0];
        X[1] = m.y[j];
        diff = std::max(diff, std::fabs(red.to_reduced(su.v[m.node(col, j)], X.data()) - sv.v[m.node(col, j)]));
      }
    EXPECT_LT(diff, a == 0.0 ? 1e-8 : 5e-3);
    EXPECT_EQ(su.contact(), sv.contact());
  }
}

// ---------------------------------------------------------------------------
// free boundary

TEST(FreeBoundary, ProfileHasSinglePointAtOrigin) {
  auto sol = solve_psor(profile_problem(Params::from_a(1, 0.2), {1.0}), grid(1, 64));
  const auto fb = extract_free_boundary(sol);
  ASSERT_EQ(fb.size(), 1u);
  EXPECT_LE(std::fabs(fb[0][0]), sol.mesh->hx + 1e-12);
  auto near = nearest_free_boundary_point(sol, {0.3});
  ASSERT_TRUE(near);
  EXPECT_EQ((*near)[0], fb[0][0]);
}

TEST(FreeBoundary, PlanarProfileGivesLine) {
  auto sol = solve_psor(profile_problem(Params::from_a(2, 0.0), {1.0, 0.0}), grid(2, 32));
  const auto fb = extract_free_boundary(sol);
  ASSERT_FALSE(fb.empty());
  double lo = 1.0, hi = -1.0;
  for (const auto& x : fb) {
    EXPECT_LE(std::fabs(x[0]), sol.mesh->hx + 1e-12);
    lo = std::min(lo, x[1]);
    hi = std::max(hi, x[1]);
  }
  EXPECT_LT(lo, -0.9);
  EXPECT_GT(hi, 0.9);
}

// ---------------------------------------------------------------------------
// rescalings, classification, monitors

TEST(Rescale, HomogeneousRescalingsOfProfileAreStable) {
  const Params p = Params::from_a(1, 0.0);
  auto sol = solve_psor(profile_problem(p, {1.0}), grid(1, 128));
  const WeissRules rules = make_weiss_rules(p);
  const Field f = sol.field();
  const Field r = rescale(f, p, {0.0}, 0.25, RescaleMode::Homogeneous, 1.5, rules);
  RegularProfile prof({1.0}, p.s);
  for (double t : {0.1, 0.7, 1.9, 2.9}) {
    const double th[2] = {std::cos(t), std::sin(t)};
    EXPECT_NEAR(r(th), eval_h_e_s(prof, th), 1e-2);
  }
  const Field fn = rescale(f, p, {0.0}, 0.25, RescaleMode::FrequencyNormalized, 0.0, rules);
  EXPECT_NEAR(boundary_H(fn, {0.0}, 1.0, rules), 1.0, 1e-10);
  const auto d = rescaling_distances(f, p, {0.0}, {0.4, 0.2, 0.1}, RescaleMode::Homogeneous, 1.5, rules);
  ASSERT_EQ(d.size(), 2u);
  for (double x : d) EXPECT_LT(x, 1e-2);
}

TEST(Rescale, VanishingSolutionIsDegenerate) {
  ObstacleProblem pr;
  pr.params = Params::from_a(1, 0.0);
  pr.datum = [](const double*) { return 0.0; };
  pr.obstacle = [](const double*) { return -1.0; };
  auto sol = solve_psor(pr, grid(1, 32));
  const WeissRules rules = make_weiss_rules(pr.params);
  EXPECT_THROW(rescale(sol.field(), pr.params, {0.0}, 0.5, RescaleMode::FrequencyNormalized, 0.0, rules),
               DegeneratePoint);
}

TEST(Classify, ProfileIsRegularWithFittedConstantAndDirection) {
  for (double a : {-0.5, 0.0, 0.6}) {
    const Params p = Params::from_a(1, a);
    for (double dir : {1.0, -1.0}) {
      auto sol = solve_psor(profile_problem(p, {dir}, 1.7), grid(1, 128));
      const auto b = classify_point(sol, {0.0}, build_basis(p, 4));
      ASSERT_EQ(b.type, BlowupType::Regular) << "a=" << a;
      EXPECT_NEAR(b.lambda_hat, 1.0 + p.s, 0.02) << "a=" << a;
      EXPECT_NEAR(b.C, 1.7, 0.01 * 1.7);
      EXPECT_EQ(b.e[0], dir);
      EXPECT_TRUE(b.confident);
      EXPECT_LT(b.frequency_consistency, 0.05);
    }
  }
}

TEST(Classify, DegreeTwoSolutionIsSingularWithFullRank) {
  for (double a : {0.0, 0.4, -0.4}) {
    const Params p = Params::from_a(1, a);
    auto sol = solve_psor(polynomial_problem(p, build_h_2m<double>(1, a, 1)), grid(1, 128));
    const auto b = classify_point(sol, {0.0}, build_basis(p, 4));
    ASSERT_EQ(b.type, BlowupType::Singular) << "a=" << a;
    EXPECT_EQ(b.m, 1);
    EXPECT_EQ(b.d2m, 0);
    EXPECT_NEAR(b.lambda_hat, 2.0, 0.05);
    // p_2 ∝ x² - y²/(1+a)
    const double cx = b.p2m.coefficient({2, 0}), cy = b.p2m.coefficient({0, 2});
    EXPECT_NEAR(cy / cx, -1.0 / (1.0 + a), 0.05 / (1.0 + a)) << "a=" << a;
    EXPECT_NEAR(cx, 1.0, 0.05);
  }
}

TEST(Classify, PlanarProfileAndPlanarDegreeTwo) {
  const Params p = Params::from_a(2, 0.0);
  auto sol = solve_psor(profile_problem(p, {0.6, 0.8}), grid(2, 64));
  const auto b = classify_point(sol, {0.0, 0.0}, build_basis(p, 2));
  ASSERT_EQ(b.type, BlowupType::Regular);
  EXPECT_NEAR(b.e[0], 0.6, 0.02);
  EXPECT_NEAR(b.e[1], 0.8, 0.02);
  EXPECT_NEAR(b.C, 1.0, 0.02);
  // x1² - y² depends on one tangential direction: d_2 = 1
  Polynomial<double> q(3);
  q.add_term({2, 0, 0}, 1.0);
  q.add_term({0, 0, 2}, -1.0);
  auto s2 = solve_psor(polynomial_problem(p, q), grid(2, 64));
  const auto b2 = classify_point(s2, {0.0, 0.0}, build_basis(p, 2));
  ASSERT_EQ(b2.type, BlowupType::Singular);
  EXPECT_EQ(b2.d2m, 1);
}

TEST(Classify, BlowupJsonCarriesTypeSpecificFields) {
  const Params p = Params::from_a(1, 0.0);
  auto sol = solve_psor(profile_problem(p, {1.0}), grid(1, 64));
  const auto j = classify_point(sol, {0.0}, build_basis(p, 4)).to_json();
  EXPECT_EQ(j["type"], "regular");
  EXPECT_TRUE(j.contains("C"));
  EXPECT_FALSE(j.contains("d2m"));
  EXPECT_THROW(classify_point(sol, {0.0, 0.0}, build_basis(p, 4)), InvalidInput);
}

TEST(Monitors, PerturbedProfileDecaysAndMonitorsAreMonotone) {
  const Params p = Params::from_a(1, 0.0);
  auto sol = solve_psor(perturbed_profile_problem(p), grid(1, 128));
  ASSERT_TRUE(sol.converged);
  const auto r = decay_monitors(sol, {0.0}, 1.5);
  ASSERT_GE(r.fit_samples, 3u);
  EXPECT_GT(r.fitted_exponent, 0.0);
  EXPECT_TRUE(r.H_monotone.ok) << r.H_monotone.worst_excess;
  EXPECT_TRUE(r.Phi_monotone.ok);
  EXPECT_TRUE(r.Wmod_monotone.ok);
}

TEST(Monitors, MonotoneOnExactSolutions) {
  struct Case {
    ObstacleProblem pr;
    double lambda;
  };
  std::vector<Case> cases;
  for (double a : {-0.5, 0.0, 0.5}) {
    const Params p = Params::from_a(1, a);
    cases.push_back({profile_problem(p, {1.0}), 1.0 + p.s});
    cases.push_back({polynomial_problem(p, build_h_2m<double>(1, a, 1)), 2.0});
  }
  for (const auto& c : cases) {
    auto sol = solve_psor(c.pr, grid(1, 64));
    const auto r = decay_monitors(sol, {0.0}, c.lambda);
    EXPECT_TRUE(r.H_monotone.ok) << "a=" << c.pr.params.a << " λ=" << c.lambda;
    EXPECT_TRUE(r.Phi_monotone.ok);
    EXPECT_TRUE(r.Wmod_monotone.ok);
    // W stays at discretization level for exact blow-ups
    for (std::size_t i = 0; i < r.W.size(); ++i) EXPECT_LT(std::fabs(r.W[i]), 0.02);
  }
}

// ---------------------------------------------------------------------------
// persistence

TEST(Checkpoint, RoundTripIsBitExact) {
  auto sol = solve_psor(profile_problem(Params::from_a(1, 0.3), {1.0}), grid(1, 32));
  const auto path = temp_path("ckpt.bin");
  write_checkpoint(sol, path);
  const auto back = read_checkpoint(path);
  EXPECT_EQ(back.v, sol.v);
  EXPECT_EQ(back.phi, sol.phi);
  EXPECT_EQ(back.mesh->y, sol.mesh->y);
  EXPECT_EQ(back.iterations, sol.iterations);
  EXPECT_EQ(back.converged, sol.converged);
  EXPECT_EQ(slice_csv(back), slice_csv(sol));
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsForeignAndTruncatedFiles) {
  const auto path = temp_path("bad.bin");
  {
    std::ofstream f(path, std::ios::binary);
    f << "not a checkpoint at all";
  }
  EXPECT_THROW(read_checkpoint(path), IoError);
  auto sol = solve_psor(profile_problem(Params::from_a(1, 0.0), {1.0}), grid(1, 16));
  write_checkpoint(sol, path);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
  EXPECT_THROW(read_checkpoint(path), IoError);
  std::filesystem::remove(path);
  EXPECT_THROW(read_checkpoint(path), IoError);
}

TEST(Checkpoint, SliceCsvHasOneRowPerColumn) {
  auto sol = solve_psor(profile_problem(Params::from_a(1, 0.0), {1.0}), grid(1, 16));
  const auto csv = slice_csv(sol);
  EXPECT_EQ(csv.rfind("x,v,phi,flux,contact\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 18);
}
