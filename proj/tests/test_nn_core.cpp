#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "hfdrl/nn_core.hpp"
#include "oracles.hpp"

using namespace hfdrl;

namespace {

ParamSet random_net(std::size_t in, std::vector<std::size_t> hidden, std::size_t actions, std::uint64_t seed) {
  return init_params(network_shapes(in, hidden, actions), seed);
}

Vector random_vector(Eigen::Index n, Rng& rng, double scale = 1.0) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = uniform(rng, -scale, scale);
  return v;
}

}  // namespace

TEST(InitParams, DeterministicAndGlorotBounded) {
  const std::vector<LayerShape> shapes = {{4, 128}, {128, 128}, {128, 3}};
  const ParamSet a = init_params(shapes, 7);
  const ParamSet b = init_params(shapes, 7);
  ASSERT_EQ(a.layers.size(), 3u);
  EXPECT_TRUE(a == b);
  for (const auto& l : a.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.weights.rows() + l.weights.cols()));
    EXPECT_LE(l.weights.cwiseAbs().maxCoeff(), bound);
    EXPECT_EQ(l.biases.cwiseAbs().maxCoeff(), 0.0);
  }
  EXPECT_FALSE(a == init_params(shapes, 8));
}

TEST(InitParams, SingleWeightWithinSqrt3) {
  const ParamSet p = init_params({{1, 1}}, 0);
  EXPECT_LE(std::abs(p.layers[0].weights(0, 0)), std::sqrt(3.0));
  EXPECT_EQ(p.layers[0].biases[0], 0.0);
}

TEST(InitParams, BrokenChainIsShapeError) {
  EXPECT_THROW(init_params({{4, 128}, {64, 128}}, 1), ShapeError);
}

TEST(Forward, ZeroParamsGiveZeroOutputs) {
  ParamSet p = random_net(4, {8, 8}, 2, 3);
  for (auto& l : p.layers) {
    l.weights.setZero();
    l.biases.setZero();
  }
  const auto out = forward(p, Vector::Constant(4, 0.7));
  EXPECT_EQ(out.logits.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(out.value, 0.0);
}

TEST(Forward, OneByOneClosedForm) {
  ParamSet p = init_params({{1, 1}, {1, 2}}, 0);
  p.layers[0].weights(0, 0) = 0.7;
  p.layers[0].biases[0] = -0.2;
  p.layers[1].weights << 1.5, -2.0;
  p.layers[1].biases << 0.1, 0.3;
  const double x = 0.9;
  const double h = std::tanh(0.7 * x - 0.2);
  const auto out = forward(p, Vector::Constant(1, x));
  EXPECT_DOUBLE_EQ(out.logits[0], 1.5 * h + 0.1);
  EXPECT_DOUBLE_EQ(out.value, -2.0 * h + 0.3);
}

TEST(Forward, MatchesStraightLineOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const ParamSet p = random_net(6, {17, 9}, 3, 100 + trial);
    const Vector x = random_vector(6, rng, 2.0);
    const auto out = forward(p, x);
    const auto ref = oracle::forward(p, std::vector<double>(x.data(), x.data() + x.size()));
    for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(out.logits[i], ref[static_cast<std::size_t>(i)], 1e-12);
    EXPECT_NEAR(out.value, ref.back(), 1e-12);
  }
}

TEST(Forward, WrongStateLengthIsShapeError) {
  const ParamSet p = random_net(4, {8}, 2, 1);
  EXPECT_THROW(forward(p, Vector::Zero(5)), ShapeError);
}

TEST(Backward, ZeroHeadGradientGivesZeroGradient) {
  const ParamSet p = random_net(4, {8, 8}, 2, 5);
  HeadGradient head{Vector::Zero(2), 0.0};
  const Gradient g = backward(p, Vector::Constant(4, 0.3), head);
  EXPECT_EQ(g.flatten().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, OneByOneAnalyticDerivative) {
  ParamSet p = init_params({{1, 1}, {1, 2}}, 0);
  p.layers[0].weights(0, 0) = 0.4;
  p.layers[1].weights << 2.0, 0.5;
  const double x = 1.3;
  const double h = std::tanh(0.4 * x);
  // loss = logit, so dL/dlogit = 1 and dL/dvalue = 0
  const Gradient g = backward(p, Vector::Constant(1, x), {Vector::Constant(1, 1.0), 0.0});
  EXPECT_NEAR(g.layers[1].weights(0, 0), h, 1e-15);
  EXPECT_NEAR(g.layers[1].biases[0], 1.0, 1e-15);
  EXPECT_NEAR(g.layers[0].weights(0, 0), 2.0 * (1.0 - h * h) * x, 1e-15);
  EXPECT_NEAR(g.layers[0].biases[0], 2.0 * (1.0 - h * h), 1e-15);
}

TEST(Backward, MatchesFiniteDifferences) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    ParamSet p = random_net(3, {5, 4}, 3, 200 + trial);
    const Vector x = random_vector(3, rng);
    const Vector c = random_vector(3, rng);
    const double cv = uniform(rng, -1.0, 1.0);
    // scalar loss L = c . logits + cv * value
    auto loss = [&](const ParamSet& q) {
      const auto o = forward(q, x);
      return c.dot(o.logits) + cv * o.value;
    };
    const Gradient g = backward(p, x, {c, cv});
    const double h = 1e-5;
    for (std::size_t k = 0; k < p.layers.size(); ++k)
      for (Eigen::Index i = 0; i < p.layers[k].weights.size(); ++i) {
        double& w = p.layers[k].weights.data()[i];
        const double saved = w;
        w = saved + h;
        const double up = loss(p);
        w = saved - h;
        const double down = loss(p);
        w = saved;
        const double fd = (up - down) / (2 * h);
        const double an = g.layers[k].weights.data()[i];
        EXPECT_NEAR(an, fd, 1e-4 * std::max(1.0, std::abs(fd)));
      }
  }
}

TEST(Backward, NonFiniteDeltaIsNumericError) {
  const ParamSet p = random_net(2, {3}, 2, 1);
  HeadGradient head{Vector::Constant(2, std::numeric_limits<double>::quiet_NaN()), 0.0};
  EXPECT_THROW(backward(p, Vector::Zero(2), head), NumericError);
}

TEST(Adam, ZeroGradientLeavesParamsAndCountsStep) {
  const ParamSet p = random_net(2, {3}, 2, 4);
  const AdamState opt = AdamState::for_params(p, 0.1);
  const auto [q, next] = adam_step(p, Gradient::zeros_like(p), opt);
  EXPECT_TRUE(q == p);
  EXPECT_EQ(next.step, opt.step + 1);
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradient) {
  ParamSet p = init_params({{1, 1}}, 3);
  const double w0 = p.layers[0].weights(0, 0);
  Gradient g = Gradient::zeros_like(p);
  g.layers[0].weights(0, 0) = 1.0;
  const auto [q, opt] = adam_step(p, g, AdamState::for_params(p, 0.1));
  EXPECT_NEAR(q.layers[0].weights(0, 0) - w0, -0.1, 1e-6);
}

TEST(Adam, DescendsQuadraticMonotonically) {
  ParamSet p = init_params({{1, 1}}, 0);
  p.layers[0].weights(0, 0) = 1.0;
  AdamState opt = AdamState::for_params(p, 0.05);
  double prev = 1.0;
  for (int i = 0; i < 10; ++i) {
    Gradient g = Gradient::zeros_like(p);
    g.layers[0].weights(0, 0) = 2.0 * p.layers[0].weights(0, 0);
    adam_update(p, g, opt);
    const double now = std::abs(p.layers[0].weights(0, 0));
    EXPECT_LT(now, prev);
    prev = now;
  }
}

TEST(Adam, IncongruentGradientIsShapeError) {
  const ParamSet p = random_net(2, {3}, 2, 4);
  const ParamSet other = random_net(2, {4}, 2, 4);
  EXPECT_THROW(adam_step(p, Gradient::zeros_like(other), AdamState::for_params(p)), ShapeError);
}

TEST(Softmax, SymmetricLogitsGiveEqualProbabilities) {
  const Vector p = softmax(Vector::Zero(2));
  EXPECT_EQ(p[0], 0.5);
  EXPECT_EQ(p[1], 0.5);
}

TEST(Softmax, StableForHugeLogits) {
  Vector z(2);
  z << 1000.0, 0.0;
  const Vector p = softmax(z);
  EXPECT_NEAR(p[0], 1.0, 1e-15);
  EXPECT_TRUE(p.allFinite());
  EXPECT_TRUE(log_softmax(z).allFinite());
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(softmax_sample(z, rng), 0u);
}

TEST(SoftmaxSample, FrequenciesMatchProbabilities) {
  Vector z(3);
  z << 1.0, 2.0, 3.0;
  const Vector p = softmax(z);
  Rng rng(99);
  const int n = 100000;
  std::vector<int> counts(3, 0);
  for (int i = 0; i < n; ++i) ++counts[softmax_sample(z, rng)];
  for (int a = 0; a < 3; ++a) {
    const double f = static_cast<double>(counts[static_cast<std::size_t>(a)]) / n;
    const double sd = std::sqrt(p[a] * (1 - p[a]) / n);
    EXPECT_NEAR(f, p[a], 3 * sd);
  }
}

TEST(ParamSet, FlattenIsRowMajorWeightsThenBiasesPerLayer) {
  const ParamSet p = random_net(3, {4}, 2, 8);
  const Vector f = p.flatten();
  const auto ref = oracle::flatten(p);
  ASSERT_EQ(static_cast<std::size_t>(f.size()), ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_EQ(f[static_cast<Eigen::Index>(i)], ref[i]);
  EXPECT_EQ(p.parameter_count(), ref.size());
}
