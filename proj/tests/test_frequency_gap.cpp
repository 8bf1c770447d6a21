#include <cmath>

#include <gtest/gtest.h>

#include "fol/frequency_gap.hpp"

using namespace fol;

TEST(GapRegular, HalfLaplacianExcludesBothNeighbours) {
  const auto g = gap_regular(Params::from_a(1, 0.0));
  EXPECT_DOUBLE_EQ(g.center, 1.5);
  EXPECT_NEAR(g.left_width(), 0.5, 1e-12);
  EXPECT_NEAR(g.right_width(), 0.5, 1e-12);
  const auto j = g.to_json();
  EXPECT_NEAR(j["excluded"][0][0].get<double>(), 1.0, 1e-12);
  EXPECT_NEAR(j["excluded"][1][1].get<double>(), 2.0, 1e-12);
  EXPECT_NEAR(*g.left_width_as_written, 1.5, 1e-15);
}

TEST(GapRegular, WidthsEqualOneMinusSForRandomParameters) {
  Rng rng(42);
  for (int i = 0; i < 20; ++i) {
    const int n = 1 + static_cast<int>(rng.uniform() * 4.0);
    const double a = -0.99 + 1.98 * rng.uniform();
    const Params p = Params::from_a(n, a);
    const auto g = gap_regular(p);
    EXPECT_NEAR(g.right_width(), (1.0 + a) / 2.0, 1e-12) << "n=" << n << " a=" << a;
    EXPECT_NEAR(g.left_width(), (1.0 + a) / 2.0, 1e-12) << "n=" << n << " a=" << a;
    EXPECT_NEAR(g.left_width(), 1.0 - p.s, 1e-12);
    // the excluded set never contains 2s or 1+s
    EXPECT_GE(g.center - g.left_width(), 2.0 * p.s - 1e-12);
    EXPECT_FALSE(g.left.capped || g.right.capped);
  }
}

TEST(Gap2m, ClosedFormLeftWidth) {
  const auto g = gap_2m(Params::from_a(1, 0.0), 1, 0.01, 0.01, 0.0);
  EXPECT_NEAR(g.left_width(), 4.0 * 0.01 / 1.01, 1e-15);
  Rng rng(7);
  for (int i = 0; i < 20; ++i) {
    const int n = 1 + static_cast<int>(rng.uniform() * 3.0);
    const double a = -0.9 + 1.8 * rng.uniform();
    const int m = 1 + static_cast<int>(rng.uniform() * 3.0);
    const double e = 0.3 * rng.uniform() + 1e-4;
    const auto gg = gap_2m(Params::from_a(n, a), m, 0.1, e, log_beta(n));
    EXPECT_NEAR(gg.left_width(), (n + a + 4.0 * m - 1.0) * e / (1.0 + e), 1e-12);
  }
}

TEST(Gap2m, OneDimensionalRightWidthIsLinearSolve) {
  for (double e : {0.001, 0.01, 0.05, 0.15}) {
    const auto g = gap_2m(Params::from_a(1, 0.0), 1, e, 0.01, 0.0);
    EXPECT_NEAR(g.right_width(), 4.0 * e / (1.0 - e), 1e-12);
    EXPECT_FALSE(g.right.capped);
  }
}

TEST(Gap2m, RightWidthRootSatisfiesInequalityAndShrinksWithEpsilon) {
  const Params p = Params::from_a(2, 0.3);
  const double beta = log_beta(2), D = p.energy_denominator(4.0);
  double prev = 1.0;
  for (double e : {0.2, 0.1, 0.05, 0.01, 0.001, 1e-5}) {
    const auto g = gap_2m(p, 2, e, 0.01, beta);
    const double t = g.right_width();
    if (g.right.capped) continue;
    EXPECT_NEAR((1.0 - e * std::pow(t, beta)) * (1.0 + t / D), 1.0, 1e-12);
    EXPECT_LT(t, prev);
    prev = t;
  }
  EXPECT_LT(prev, 1e-4);
}

TEST(Gap2m, NoRootInBracketIsReportedConservatively) {
  const auto g = gap_2m(Params::from_a(2, 0.0), 1, 0.9, 0.01, log_beta(2));
  EXPECT_TRUE(g.right.capped);
  EXPECT_DOUBLE_EQ(g.right_width(), 1.0);
}

TEST(Gap2m, RejectsBadConstants) {
  const Params p = Params::from_a(1, 0.0);
  EXPECT_THROW(gap_2m(p, 0, 0.1, 0.1, 0.0), ParameterError);
  EXPECT_THROW(gap_2m(p, 1, 0.0, 0.1, 0.0), ParameterError);
  EXPECT_THROW(gap_2m(p, 1, 0.1, -0.1, 0.0), ParameterError);
  EXPECT_THROW(gap_2m(p, 1, 0.1, 0.1, 1.0), ParameterError);
}
