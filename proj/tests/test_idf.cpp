#include <gtest/gtest.h>

#include <cmath>

#include "firesale/idf.hpp"
#include "firesale/random.hpp"

using namespace firesale;

namespace {
const std::vector<double> kTwo{2.0};
IdfSpec cross(double off) {
  return IdfSpec::linear_cross({1.0, 1.0}, Tensor::matrix({{0.15, off}, {off, 0.15}}));
}
}  // namespace

TEST(Idf, Examples) {
  EXPECT_EQ(IdfSpec::linear(kTwo).price({0.0})[0], 1.0);
  EXPECT_DOUBLE_EQ(IdfSpec::linear(kTwo).price({2.0})[0], 0.7);
  EXPECT_EQ(IdfSpec::exponential(kTwo).price({0.0})[0], 1.0);
  EXPECT_EQ(IdfSpec::arctangent(kTwo).price({0.0})[0], 1.0);
  EXPECT_DOUBLE_EQ(cross(0.015).price({1.0, 1.0})[0], 0.835);
}

TEST(Idf, ClosedForms) {
  const double pi = std::acos(-1.0);
  EXPECT_DOUBLE_EQ(IdfSpec::exponential(kTwo).price({1.5})[0], std::exp(-0.225));
  EXPECT_DOUBLE_EQ(IdfSpec::arctangent(kTwo).price({1.0})[0], (2 * pi - pi / 4) / (2 * pi));
  const auto p = cross(0.015).price({0.4, 0.8});
  EXPECT_DOUBLE_EQ(p[0], 1.0 - 0.15 * 0.4 - 0.015 * 0.8);
  EXPECT_DOUBLE_EQ(p[1], 1.0 - 0.015 * 0.4 - 0.15 * 0.8);
}

TEST(Idf, DiagonalCrossMatchesIndependentLinear) {
  const auto a = cross(0.0).price({0.3, 0.9});
  const auto b = IdfSpec::linear({1.0, 1.0}).price({0.3, 0.9});
  EXPECT_EQ(a, b);
}

TEST(Idf, PriceAtZeroIsBasePrice) {
  const std::vector<double> base{1.3};
  EXPECT_EQ(IdfSpec::linear(kTwo, {}, base).price({0.0})[0], 1.3);
  EXPECT_EQ(IdfSpec::exponential(kTwo, {}, base).price({0.0})[0], 1.3);
  EXPECT_EQ(IdfSpec::arctangent(kTwo, base).price({0.0})[0], 1.3);
  EXPECT_EQ(IdfSpec::linear_cross({1.0, 1.0}, Tensor::matrix({{0.15, 0.01}, {0.01, 0.15}}), {1.3, 0.9})
                .price({0.0, 0.0}),
            (std::vector<double>{1.3, 0.9}));
}

TEST(Idf, OutOfRangeLiquidationIsRejected) {
  EXPECT_THROW(IdfSpec::linear(kTwo).price({2.5}), std::domain_error);
  EXPECT_THROW(IdfSpec::linear(kTwo).price({-0.1}), std::domain_error);
  EXPECT_THROW(IdfSpec::linear(kTwo).price({1.0, 1.0}), ShapeError);
}

TEST(Idf, InvalidSpecsAreRejected) {
  EXPECT_THROW(IdfSpec::linear(kTwo, {}, {0.0}), std::invalid_argument);
  // Price would go negative inside the admissible range.
  EXPECT_THROW(IdfSpec::linear({10.0}), std::invalid_argument);
  // Cross impact may not dominate own impact, and must be non-negative.
  EXPECT_THROW(IdfSpec::linear_cross({1.0, 1.0}, Tensor::matrix({{0.01, 0.15}, {0.15, 0.01}})),
               std::invalid_argument);
  EXPECT_THROW(IdfSpec::linear_cross({1.0, 1.0}, Tensor::matrix({{0.15, -0.01}, {0.0, 0.15}})),
               std::invalid_argument);
}

TEST(Idf, MonotoneNonIncreasing) {
  Rng rng{3};
  const std::vector<IdfSpec> specs{IdfSpec::linear({2.0, 2.0}), IdfSpec::exponential({2.0, 2.0}),
                                   IdfSpec::arctangent({2.0, 2.0}), cross(0.015)};
  for (const auto& spec : specs) {
    const auto cap = spec.max_liquidation();
    for (int trial = 0; trial < 1000; ++trial) {
      std::vector<double> a(2), b(2);
      for (int m = 0; m < 2; ++m) {
        a[m] = rng.uniform(0.0, cap[m]);
        b[m] = rng.uniform(a[m], cap[m]);
      }
      const auto pa = spec.price(a), pb = spec.price(b);
      for (int m = 0; m < 2; ++m) EXPECT_GE(pa[m], pb[m]);
    }
  }
}

TEST(Idf, ExponentialAndArctangentStayPositive) {
  for (double l : {0.0, 1.0, 10.0, 1e3, 4e3}) {
    EXPECT_GT(IdfSpec::exponential({1e7}).price({l})[0], 0.0);
    EXPECT_GT(IdfSpec::arctangent({1e7}).price({l})[0], 0.0);
  }
}
