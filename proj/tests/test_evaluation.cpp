#include <gtest/gtest.h>

#include <sstream>

#include "firesale/evaluation.hpp"
#include "property_suites.hpp"

using namespace firesale;

namespace {

Eigen::MatrixXd with_intercept(const std::vector<std::vector<double>>& cols) {
  const auto n = static_cast<Eigen::Index>(cols.front().size());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(cols.size() + 1));
  for (Eigen::Index r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) x(r, static_cast<Eigen::Index>(c)) = cols[c][static_cast<std::size_t>(r)];
    x(r, static_cast<Eigen::Index>(cols.size())) = 1.0;
  }
  return x;
}

BankingSystem case1_system(const IdfSpec& spec) {
  auto sys = BankingSystem::with_uniform_liabilities(Tensor::matrix({{1.0}, {1.0}}), 0.6, 0.85);
  sys.leverage_sensitivity = full_liquidation_sensitivity(sys, spec);
  return sys;
}

BankingSystem case2_system(const IdfSpec& spec) {
  auto sys = BankingSystem::with_uniform_liabilities(Tensor::matrix({{0.4, 0.6}, {0.6, 0.4}}), 0.6, 0.9);
  sys.leverage_sensitivity = full_liquidation_sensitivity(sys, spec);
  return sys;
}

const IdfSpec kCross = IdfSpec::linear_cross({1.0, 1.0}, Tensor::matrix({{0.15, 0.015}, {0.015, 0.15}}));

}  // namespace

TEST(Pearson, Examples) {
  const std::vector<double> x{0.1, 0.5, 0.2, 0.9, 0.4};
  std::vector<double> neg, aff;
  for (double v : x) {
    neg.push_back(-v);
    aff.push_back(2 * v + 3);
  }
  EXPECT_DOUBLE_EQ(pearson(x, x), 1.0);
  EXPECT_DOUBLE_EQ(pearson(x, neg), -1.0);
  EXPECT_DOUBLE_EQ(pearson(x, aff), 1.0);
}

TEST(Pearson, InvariantUnderPositiveAffineMaps) {
  Rng rng{4};
  std::vector<double> x(100), y(100);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = rng.uniform();
    y[i] = x[i] + 0.3 * rng.normal();
  }
  const double base = pearson(x, y);
  std::vector<double> y2;
  for (double v : y) y2.push_back(4.0 * v - 7.0);
  EXPECT_NEAR(pearson(x, y2), base, 1e-14);
}

TEST(Pearson, DegenerateInputsAreRejected) {
  EXPECT_THROW(pearson({1, 1, 1}, {1, 2, 3}), DegenerateDataError);
  EXPECT_THROW(pearson({1, 2}, {1, 2, 3}), std::invalid_argument);
  EXPECT_THROW(pearson({1}, {1}), std::invalid_argument);
}

TEST(ScaleLiquidations, EndpointsAndMidpoint) {
  const auto s = scale_liquidations({0.2, 0.8, 0.5}, 0.0, 2.0);
  EXPECT_DOUBLE_EQ(s[0], 0.0);
  EXPECT_DOUBLE_EQ(s[1], 2.0);
  EXPECT_DOUBLE_EQ(s[2], 1.0);
}

TEST(ScaleLiquidations, PreservesOrderAndDifferenceRatios) {
  const std::vector<double> x{0.3, 0.1, 0.7, 0.4};
  const auto s = scale_liquidations(x, 1.0, 3.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) EXPECT_EQ(x[i] < x[j], s[i] < s[j]);
  }
  EXPECT_NEAR((s[2] - s[0]) / (s[3] - s[1]), (x[2] - x[0]) / (x[3] - x[1]), 1e-12);
}

TEST(ScaleLiquidations, DegenerateInputsAreRejected) {
  EXPECT_THROW(scale_liquidations({0.5, 0.5}, 0.0, 2.0), DegenerateDataError);
  EXPECT_THROW(scale_liquidations({0.1, 0.5}, 2.0, 2.0), std::invalid_argument);
}

TEST(Ols, ExactLineIsRecovered) {
  std::vector<double> x, y;
  for (int i = 0; i < 20; ++i) {
    x.push_back(0.1 * i);
    y.push_back(2.0 * x.back() + 1.0);
  }
  const auto r = ols(y, with_intercept({x}));
  EXPECT_NEAR(r.estimates[0], 2.0, 1e-12);
  EXPECT_NEAR(r.estimates[1], 1.0, 1e-12);
  EXPECT_LT(r.standard_errors[0], 1e-12);
  EXPECT_EQ(r.dof, 18u);
}

TEST(Ols, ConstantResponseHasZeroSlope) {
  const auto r = ols({3, 3, 3, 3}, with_intercept({{0.1, 0.4, 0.2, 0.9}}));
  EXPECT_NEAR(r.estimates[0], 0.0, 1e-14);
  EXPECT_NEAR(r.estimates[1], 3.0, 1e-14);
}

TEST(Ols, MachinePrecisionOnNoiselessMultipleRegression) {
  Rng rng{8};
  std::vector<double> a(200), b(200), y(200);
  for (std::size_t i = 0; i < y.size(); ++i) {
    a[i] = rng.uniform();
    b[i] = rng.uniform();
    y[i] = -0.15 * a[i] - 0.015 * b[i] + 1.0;
  }
  const auto r = ols(y, with_intercept({a, b}));
  EXPECT_NEAR(r.estimates[0], -0.15, 1e-14);
  EXPECT_NEAR(r.estimates[1], -0.015, 1e-14);
  EXPECT_NEAR(r.estimates[2], 1.0, 1e-14);
}

TEST(Ols, NoisyEstimatesFallWithinFourStandardErrors) {
  Rng rng{2025};
  const std::vector<double> beta{-0.15, -0.015, 1.0};
  int inside = 0, total = 0;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> a(60), b(60), y(60);
    for (std::size_t i = 0; i < y.size(); ++i) {
      a[i] = rng.uniform(0.0, 1.0);
      b[i] = rng.uniform(0.0, 1.0);
      y[i] = beta[0] * a[i] + beta[1] * b[i] + beta[2] + 0.01 * rng.normal();
    }
    const auto r = ols(y, with_intercept({a, b}));
    for (std::size_t j = 0; j < 3; ++j) {
      inside += std::abs(r.estimates[j] - beta[j]) <= 4.0 * r.standard_errors[j];
      ++total;
    }
  }
  EXPECT_GE(inside, static_cast<int>(0.99 * total));
}

TEST(Ols, RankDeficiencyIsRejected) {
  const std::vector<double> a{0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<double> twice;
  for (double v : a) twice.push_back(2 * v);
  try {
    (void)ols({1, 2, 3, 4, 5}, with_intercept({a, twice}));
    FAIL() << "expected DegenerateDataError";
  } catch (const DegenerateDataError& e) {
    EXPECT_NE(std::string(e.what()).find("rank"), std::string::npos);
  }
  EXPECT_THROW(ols({1, 2}, with_intercept({{0.1, 0.2}})), std::invalid_argument);
}

TEST(TTest, Examples) {
  RegressionResult r;
  r.estimates = {0.5, 100.0, 2.0};
  r.standard_errors = {0.1, 1.0, 1.0};
  r.dof = 1000;
  auto t = t_test(r, {0.5, 0.0, 0.0});
  EXPECT_EQ(t.t_values[0], 0.0);
  EXPECT_EQ(t.p_values[0], 1.0);
  EXPECT_EQ(t.t_values[1], 100.0);
  EXPECT_LT(t.p_values[1], 1e-10);
  r.dof = 10;
  t = t_test(r, {0.5, 0.0, 0.0});
  EXPECT_NEAR(t.p_values[2], 0.0733880348, 1e-9);
  EXPECT_THROW(t_test(r, {0.0}), std::invalid_argument);
}

// The frozen constant above came from this quadrature oracle.
TEST(TTest, FrozenValueMatchesQuadratureOracle) {
  EXPECT_NEAR(suites::t_tail_by_quadrature(2.0, 10.0), 0.0733880348, 1e-9);
}

TEST(TTest, SymmetricAndDecreasingInMagnitude) {
  for (double dof : {3.0, 30.0}) {
    double prev = 1.0;
    for (double t = 0.0; t <= 6.0; t += 0.25) {
      const double p = student_t_two_sided(t, dof);
      EXPECT_EQ(p, student_t_two_sided(-t, dof));
      EXPECT_LE(p, prev);
      EXPECT_GE(p, 0.0);
      prev = p;
    }
  }
}

TEST(TTest, TailMatchesQuadratureOracle) {
  const auto r = suites::t_distribution();
  EXPECT_TRUE(r.pass) << r.detail;
}

TEST(Evaluate, OracleGivesPerfectReport) {
  for (const auto& spec : {IdfSpec::linear({2.0}), IdfSpec::arctangent({2.0})}) {
    const auto sys = case1_system(spec);
    const auto test = generate_dataset(sys, spec, 300, 5);
    const auto rep = evaluate(OraclePredictor(sys, spec), test, sys, spec, "oracle");
    EXPECT_EQ(rep.mse_sum, 0.0);
    EXPECT_DOUBLE_EQ(*rep.assets[0].correlation, 1.0);
    EXPECT_LT(*rep.assets[0].scaled_mae, 1e-12);
    EXPECT_FALSE(rep.regression);
    ASSERT_EQ(rep.curve.size(), 201u);
    for (const auto& c : rep.curve) EXPECT_NEAR(c.p_hat, c.p_true, 1e-12);
    EXPECT_EQ(rep.curve.front().ell, 0.0);
    EXPECT_EQ(rep.curve.front().p_true, 1.0);
    EXPECT_EQ(rep.curve.back().ell, 2.0);
  }
}

TEST(Evaluate, OracleRegressionRecoversCrossImpact) {
  const auto sys = case2_system(kCross);
  const auto test = generate_dataset(sys, kCross, 400, 6);
  const auto rep = evaluate(OraclePredictor(sys, kCross), test, sys, kCross, "oracle");
  EXPECT_EQ(rep.mse_sum, 0.0);
  ASSERT_TRUE(rep.regression);
  const auto& g = *rep.regression;
  ASSERT_EQ(g.result.estimates.size(), 3u);
  EXPECT_EQ(g.regressors, (std::vector<std::string>{"ell_star_1", "ell_star_2", "intercept"}));
  EXPECT_NEAR(g.result.estimates[0], -0.15, 1e-10);
  EXPECT_NEAR(g.result.estimates[1], -0.015, 1e-10);
  EXPECT_NEAR(g.result.estimates[2], 1.0, 1e-10);
  ASSERT_TRUE(g.true_null);
  EXPECT_EQ(g.true_null->nulls, (std::vector<double>{-0.15, -0.015, 1.0}));
  EXPECT_EQ(g.zero_null.nulls, (std::vector<double>{0.0, 0.0, 0.0}));
  for (std::size_t a = 0; a < 2; ++a) EXPECT_DOUBLE_EQ(*rep.assets[a].correlation, 1.0);
}

TEST(Evaluate, TrueCoefficientsOnlyForLinearKinds) {
  EXPECT_EQ(*true_coefficients(kCross, 1), (std::vector<double>{-0.015, -0.15, 1.0}));
  EXPECT_EQ(*true_coefficients(IdfSpec::linear({2.0}), 0), (std::vector<double>{-0.15, 1.0}));
  EXPECT_FALSE(true_coefficients(IdfSpec::exponential({2.0}), 0));
}

TEST(Evaluate, EmptyTestSetIsRejected) {
  const auto spec = IdfSpec::linear({2.0});
  const auto sys = case1_system(spec);
  EXPECT_THROW(evaluate(OraclePredictor(sys, spec), {}, sys, spec), std::invalid_argument);
}

TEST(Evaluate, UntrainedModelReportIsComplete) {
  const auto sys = case2_system(kCross);
  const auto test = generate_dataset(sys, kCross, 100, 7);
  Architecture a;
  a.liquidation_hidden = {8};
  a.price_hidden = {8};
  a.proportional_liquidation = true;
  a.own_shock_path = true;
  const auto model = DualModel::create(Variant::Proposed, sys.holdings, a, 1);
  const auto rep = evaluate(model, test, sys, kCross, "proposed", 11);
  EXPECT_EQ(rep.samples, 100u);
  EXPECT_EQ(rep.assets.size(), 2u);
  EXPECT_NEAR(rep.mse_sum, rep.assets[0].mse + rep.assets[1].mse, 1e-15);
  EXPECT_NEAR(rep.mse_mean, 0.5 * rep.mse_sum, 1e-15);
  EXPECT_EQ(rep.curve.size(), 22u);
  // The curve comes from the monotone Price Net, so it never rises.
  for (std::size_t i = 1; i < rep.curve.size(); ++i) {
    if (rep.curve[i].asset == rep.curve[i - 1].asset) EXPECT_LE(rep.curve[i].p_hat, rep.curve[i - 1].p_hat);
  }
  const auto j = to_json(rep);
  EXPECT_EQ(j.at("regression").at("estimates").size(), 3u);
  EXPECT_TRUE(j.contains("curve_max_abs_error"));
  std::ostringstream curve, table, reg;
  write_curve_csv(curve, rep.curve);
  write_asset_table_csv(table, rep);
  write_regression_csv(reg, *rep.regression);
  EXPECT_EQ(curve.str().substr(0, curve.str().find('\n')), "asset,ell,ell_hat,p_hat,p_true");
  const std::string reg_text = reg.str();
  EXPECT_EQ(std::count(reg_text.begin(), reg_text.end(), '\n'), 4);
}

TEST(Anchors, MapModelUnitsToBalanceSheetRange) {
  LiquidationAnchors a{{0.5}, {1.5}, {0.0}, {2.0}};
  EXPECT_DOUBLE_EQ(a.to_true(0, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(a.to_true(0, 1.5), 2.0);
  EXPECT_DOUBLE_EQ(a.to_model(0, a.to_true(0, 0.9)), 0.9);
}
