#include <gtest/gtest.h>

#include "property_suites.hpp"

using namespace firesale;

TEST(Properties, OutputsAreMonotoneForRandomClampedParameters) {
  const auto r = suites::monotonicity(1000, 7);
  EXPECT_TRUE(r.pass) << r.detail;
  EXPECT_EQ(r.checked, 1000u);
}

TEST(Properties, AnalyticGradientsMatchFiniteDifferences) {
  const auto r = suites::gradient_check(100, 11);
  EXPECT_TRUE(r.pass) << r.detail << " (worst relative error " << r.worst << ")";
  EXPECT_GT(r.checked, 10 * r.skipped);
}

TEST(Properties, SolverIteratesRiseAndEquilibriaAreComonotone) {
  const auto r = suites::solver_properties(500, 13);
  EXPECT_TRUE(r.pass) << r.detail;
  EXPECT_LT(r.worst, 1e-12);
}

TEST(Properties, StudentTailMatchesQuadrature) {
  const auto r = suites::t_distribution();
  EXPECT_TRUE(r.pass) << r.detail;
}
