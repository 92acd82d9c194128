#include <gtest/gtest.h>

#include <functional>

#include "firesale/autodiff.hpp"
#include "firesale/random.hpp"
#include "property_suites.hpp"

using namespace firesale;

namespace {

Tensor vec(std::vector<double> v) { return Tensor::vector(std::move(v)); }

using Builder = std::function<Tape::NodeId(Tape&, const std::vector<Tape::NodeId>&)>;

// Loss = mse(primitive(inputs), target); every input's analytic gradient is
// compared with central differences, skipping entries that straddle a kink.
struct FdStats {
  std::size_t checked = 0;
  double worst = 0.0;
};

void expect_gradients_match(const Builder& build, std::vector<Tensor> inputs, const Tensor& target, FdStats& stats) {
  auto loss_of = [&](const std::vector<Tensor>& in) {
    Tape tape;
    std::vector<Tape::NodeId> ids;
    for (const auto& t : in) ids.push_back(tape.parameter(t));
    return tape.value(tape.mse(build(tape, ids), tape.constant(target)))[0];
  };
  Tape tape;
  std::vector<Tape::NodeId> ids;
  for (const auto& t : inputs) ids.push_back(tape.parameter(t));
  const auto grads = tape.backward(tape.mse(build(tape, ids), tape.constant(target)));
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      std::function<double()> f = [&] { return loss_of(inputs); };
      const auto fd = suites::central_difference(f, inputs[k][i], 1e-5);
      if (!fd) continue;
      const double g = grads.of(ids[k])[i];
      if (std::abs(g) <= 1e-8) {
        EXPECT_LE(std::abs(*fd), 1e-7);
        continue;
      }
      const double err = suites::relative_error(g, *fd);
      stats.worst = std::max(stats.worst, err);
      ++stats.checked;
      EXPECT_LE(err, 1e-4) << "input " << k << " entry " << i << ": analytic " << g << " fd " << *fd;
    }
  }
}

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST(Affine, ZeroWeightsReturnBias) {
  Tape t;
  const auto y = t.affine(t.constant(vec({1, 2})), t.constant(Tensor::matrix({{0, 0}, {0, 0}})), t.constant(vec({3, 4})));
  EXPECT_EQ(t.value(y).values(), (std::vector<double>{3, 4}));
}

TEST(Affine, UnitBasisSelectsColumn) {
  Tape t;
  const auto y = t.affine(t.constant(vec({1, 0})), t.constant(Tensor::matrix({{2, 5}, {7, 11}})), t.constant(vec({0, 0})));
  EXPECT_EQ(t.value(y).values(), (std::vector<double>{2, 7}));
}

TEST(Affine, DirectSubstitution) {
  Tape t;
  const auto y = t.affine(t.constant(vec({0.5, 0.5})), t.constant(Tensor::matrix({{1, 1}, {1, 1}})), t.constant(vec({1, 1})));
  EXPECT_EQ(t.value(y).values(), (std::vector<double>{2, 2}));
}

TEST(Affine, ShapeMismatchIsRejected) {
  Tape t;
  const auto x = t.constant(vec({1, 2, 3}));
  const auto w = t.constant(Tensor::matrix({{1, 1}, {1, 1}}));
  EXPECT_THROW(t.affine(x, w, t.constant(vec({0, 0}))), ShapeError);
  EXPECT_THROW(t.affine(t.constant(vec({1, 2})), w, t.constant(vec({0, 0, 0}))), ShapeError);
}

TEST(Relu, Definition) {
  Tape t;
  EXPECT_EQ(t.value(t.relu(t.constant(vec({-1, 0, 2})))).values(), (std::vector<double>{0, 0, 2}));
  EXPECT_EQ(t.value(t.relu(t.constant(vec({0})))).values(), (std::vector<double>{0}));
  EXPECT_EQ(t.value(t.relu(t.constant(vec({3.5})))).values(), (std::vector<double>{3.5}));
}

TEST(Relu, SubgradientAtZeroIsZero) {
  Tape t;
  const auto x = t.parameter(vec({0.0}));
  const auto g = t.backward(t.mse(t.relu(x), t.constant(vec({1.0}))));
  EXPECT_EQ(g.of(x)[0], 0.0);
}

TEST(Backward, SquareOfWeight) {
  Tape t;
  const auto w = t.parameter(Tensor::matrix({{3.0}}));
  const auto y = t.affine(t.constant(vec({1.0})), w, t.constant(vec({0.0})));
  const auto g = t.backward(t.mse(y, t.constant(vec({0.0}))));
  EXPECT_DOUBLE_EQ(g.of(w)[0], 6.0);
}

TEST(Backward, IndependentParameterGetsZero) {
  Tape t;
  const auto unused = t.parameter(vec({1.0, 2.0}));
  const auto x = t.parameter(vec({0.5}));
  const auto g = t.backward(t.mse(x, t.constant(vec({0.0}))));
  EXPECT_EQ(g.of(unused).values(), (std::vector<double>{0.0, 0.0}));
}

TEST(Backward, NonScalarLossIsRejected) {
  Tape t;
  const auto x = t.parameter(vec({1.0, 2.0}));
  EXPECT_THROW(t.backward(x), ShapeError);
}

TEST(Backward, TwoLayerNetworkMatchesFiniteDifferences) {
  Rng rng{5};
  FdStats stats;
  for (int trial = 0; trial < 20; ++trial) {
    const Builder net = [](Tape& t, const std::vector<Tape::NodeId>& p) {
      const auto h = t.relu(t.affine(p[0], p[1], p[2]));
      return t.affine(h, p[3], p[4]);
    };
    expect_gradients_match(net,
                           {random_tensor(rng, {4, 3}), random_tensor(rng, {5, 3}), random_tensor(rng, {5}),
                            random_tensor(rng, {2, 5}), random_tensor(rng, {2})},
                           random_tensor(rng, {4, 2}), stats);
  }
  EXPECT_GT(stats.checked, 500u);
}

// Every primitive, 100 random configurations each.
TEST(Primitives, GradientsMatchFiniteDifferences) {
  Rng rng{2024};
  FdStats stats;
  for (int c = 0; c < 100; ++c) {
    const std::size_t rows = 1 + rng.below(4);
    const std::size_t in = 1 + rng.below(4);
    const std::size_t out = 1 + rng.below(4);
    const double sign = rng.below(2) ? 1.0 : -1.0;

    expect_gradients_match([sign](Tape& t, const auto& p) { return t.signed_affine(p[0], p[1], p[2], sign); },
                           {random_tensor(rng, {rows, in}), random_tensor(rng, {out, in}), random_tensor(rng, {out})},
                           random_tensor(rng, {rows, out}), stats);
    expect_gradients_match([](Tape& t, const auto& p) { return t.relu(p[0]); }, {random_tensor(rng, {rows, in})},
                           random_tensor(rng, {rows, in}), stats);
    expect_gradients_match([](Tape& t, const auto& p) { return t.add(p[0], p[1]); },
                           {random_tensor(rng, {rows, in}), random_tensor(rng, {rows, in})},
                           random_tensor(rng, {rows, in}), stats);
    expect_gradients_match([](Tape& t, const auto& p) { return t.negate(p[0]); }, {random_tensor(rng, {rows, in})},
                           random_tensor(rng, {rows, in}), stats);
    expect_gradients_match([](Tape& t, const auto& p) { return t.concat(p[0], p[1]); },
                           {random_tensor(rng, {rows, in}), random_tensor(rng, {rows, out})},
                           random_tensor(rng, {rows, in + out}), stats);
    expect_gradients_match([](Tape& t, const auto& p) { return t.scale_columns(p[0], p[1]); },
                           {random_tensor(rng, {rows, in}), random_tensor(rng, {in})},
                           random_tensor(rng, {rows, in}), stats);
    const std::size_t copies = 1 + rng.below(3);
    expect_gradients_match([copies](Tape& t, const auto& p) { return t.spread(p[0], copies); },
                           {random_tensor(rng, {rows, in})}, random_tensor(rng, {rows, in * copies}), stats);
    const Tensor holdings = random_tensor(rng, {in, out}, 0.0, 1.0);
    expect_gradients_match([holdings](Tape& t, const auto& p) { return t.aggregate(p[0], holdings); },
                           {random_tensor(rng, {rows, in * out})}, random_tensor(rng, {rows, out}), stats);
    expect_gradients_match([](Tape& t, const auto& p) { return p[0]; }, {random_tensor(rng, {rows, in})},
                           random_tensor(rng, {rows, in}), stats);
  }
  EXPECT_GT(stats.checked, 5000u);
}

TEST(Aggregate, WeightedSumPerAsset) {
  Tape t;
  auto agg = [&t](const Tensor& a, const Tensor& l) { return t.value(t.aggregate(t.constant(l), a)).values(); };
  EXPECT_EQ(agg(Tensor::matrix({{1}, {1}}), Tensor::matrix({{0.5, 0.5}})), (std::vector<double>{1.0}));
  EXPECT_EQ(agg(Tensor::matrix({{1}, {1}}), Tensor::matrix({{0.0, 0.0}})), (std::vector<double>{0.0}));
  EXPECT_EQ(agg(Tensor::matrix({{0.4, 0.6}, {0.6, 0.4}}), Tensor::matrix({{1, 1, 1, 1}})),
            (std::vector<double>{1.0, 1.0}));
}

TEST(Aggregate, ShapeMismatchIsRejected) {
  Tape t;
  EXPECT_THROW(t.aggregate(t.constant(Tensor::matrix({{1, 1, 1}})), Tensor::matrix({{1}, {1}})), ShapeError);
}

TEST(Forward, IsBitIdenticalAcrossRuns) {
  Rng rng{77};
  const Tensor x = random_tensor(rng, {8, 3}), w = random_tensor(rng, {4, 3}), b = random_tensor(rng, {4});
  auto run = [&] {
    Tape t;
    return t.value(t.relu(t.affine(t.constant(x), t.constant(w), t.constant(b))));
  };
  EXPECT_EQ(run(), run());
}

TEST(Forward, NonNegativeAffineAndReluAreMonotone) {
  Rng rng{78};
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor w = random_tensor(rng, {3, 4}, 0.0, 1.0), b = random_tensor(rng, {3});
    Tensor x = random_tensor(rng, {1, 4});
    Tensor x2 = x;
    for (double& v : x2.values()) v += rng.uniform();
    Tape t;
    const auto y = t.value(t.relu(t.affine(t.constant(x), t.constant(w), t.constant(b))));
    const auto y2 = t.value(t.relu(t.affine(t.constant(x2), t.constant(w), t.constant(b))));
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_LE(y[i], y2[i]);
  }
}
