// Numerics layer: tensor ops, tape backward, and the finite-difference oracle.

#include <gtest/gtest.h>

#include <cmath>

#include "bgtf/gradcheck.hpp"
#include "bgtf/ops.hpp"
#include "bgtf/tensor.hpp"

using namespace bgtf;

namespace {

// Scalar readout for gradient checks: loss = sum(y * c) for a fixed random c,
// so every output coordinate influences the loss.
Tensor readout(const Tensor& y, const Tensor& c, Tape* tape) {
  return sum_all(mul(y, c, tape), tape);
}

Tensor fixed_weights(const Shape& shape, std::uint64_t seed) {
  SeededRng rng(seed);
  return random_uniform(shape, rng, -1.0, 1.0);
}

}  // namespace

TEST(Matmul, IdentityCase) {
  Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  Tensor b = Tensor::matrix(2, 2, {3, 4, 5, 6});
  Tensor out = matmul(eye, b);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(out.at(i), b.at(i));
}

TEST(Matmul, HandArithmetic) {
  Tensor a = Tensor::matrix(1, 2, {1, 2});
  Tensor b = Tensor::matrix(2, 1, {3, 4});
  EXPECT_DOUBLE_EQ(matmul(a, b).item(), 11.0);
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
  Tensor a = Tensor::matrix(3, 4, std::vector<double>(12, 1.0));
  Tensor b = Tensor::matrix(5, 2, std::vector<double>(10, 1.0));
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[3x4]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[5x2]"), std::string::npos) << msg;
  }
}

TEST(Matmul, GradMatchesFiniteDifferences) {
  SeededRng rng(42);
  Tensor a = random_uniform({3, 4}, rng, -1.0, 1.0);
  Tensor b = random_uniform({4, 2}, rng, -1.0, 1.0);
  Tensor c = fixed_weights({3, 2}, 7);
  const double err = grad_check(
      [&](Tape* t) { return readout(matmul(a, b, t), c, t); }, {a, b});
  EXPECT_LT(err, 1e-6);
}

TEST(Activation, TrivialValues) {
  Tensor x = Tensor::vec({0.0});
  EXPECT_DOUBLE_EQ(activation(x, Act::Sigmoid).at(0), 0.5);
  EXPECT_DOUBLE_EQ(activation(x, Act::Tanh).at(0), 0.0);
  EXPECT_DOUBLE_EQ(activation(Tensor::vec({-2.0}), Act::Relu).at(0), 0.0);
  EXPECT_DOUBLE_EQ(activation(Tensor::vec({2.0}), Act::Relu).at(0), 2.0);
}

TEST(Activation, SigmoidLargeNegativeIsSafe) {
  const double y = activation(Tensor::vec({-50.0}), Act::Sigmoid).at(0);
  EXPECT_GT(y, 0.0);
  EXPECT_LE(y, 1e-20);
  EXPECT_TRUE(std::isfinite(y));
  // Very large magnitudes must not produce NaN either.
  EXPECT_TRUE(activation(Tensor::vec({-1e300, 1e300}), Act::Sigmoid).all_finite());
}

TEST(Activation, GradMatchesFiniteDifferences) {
  for (Act kind : {Act::Sigmoid, Act::Tanh, Act::Relu}) {
    SeededRng rng(kind == Act::Sigmoid ? 1u : kind == Act::Tanh ? 2u : 3u);
    Tensor x = random_uniform({2, 3}, rng, -2.0, 2.0);
    Tensor c = fixed_weights({2, 3}, 11);
    const double err = grad_check(
        [&](Tape* t) { return readout(activation(x, kind, t), c, t); }, {x});
    EXPECT_LT(err, 1e-6);
  }
}

TEST(Softmax, UniformUnderEqualLogits) {
  Tensor x = Tensor::matrix(1, 3, {4.2, 4.2, 4.2});
  Tensor y = softmax_rows(x);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(y.at(j), 1.0 / 3.0, 1e-15);
}

TEST(Softmax, HandArithmetic) {
  Tensor x = Tensor::matrix(1, 2, {0.0, std::log(3.0)});
  Tensor y = softmax_rows(x);
  EXPECT_NEAR(y.at(0), 0.25, 1e-12);
  EXPECT_NEAR(y.at(1), 0.75, 1e-12);
}

TEST(Softmax, LargeLogitStability) {
  Tensor x = Tensor::matrix(1, 3, {1e4, 1.0, 2.0});
  Tensor y = softmax_rows(x);
  EXPECT_TRUE(y.all_finite());
  double sum = 0.0;
  for (std::size_t j = 0; j < 3; ++j) sum += y.at(j);
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SeededRng rng(seed);
    Tensor x = random_uniform({4, 5}, rng, -3.0, 3.0);
    Tensor y = softmax_rows(x);
    for (std::size_t i = 0; i < 4; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < 5; ++j) sum += y.at(i, j);
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
    Tensor shifted = affine(x, 1.0, 17.5);
    Tensor ys = softmax_rows(shifted);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(ys.at(i), y.at(i), 1e-12);
  }
}

TEST(Softmax, GradMatchesFiniteDifferences) {
  SeededRng rng(5);
  Tensor x = random_uniform({3, 4}, rng, -2.0, 2.0);
  Tensor c = fixed_weights({3, 4}, 13);
  const double err = grad_check(
      [&](Tape* t) { return readout(softmax_rows(x, t), c, t); }, {x});
  EXPECT_LT(err, 1e-6);
}

TEST(LayerNorm, ConstantRowMapsToBias) {
  Tensor x = Tensor::matrix(1, 4, {7, 7, 7, 7});
  Tensor gain = Tensor::vec({1, 1, 1, 1});
  Tensor bias = Tensor::vec({0, 0, 0, 0});
  Tensor y = layer_norm(x, gain, bias);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(y.at(j), 0.0);
}

TEST(LayerNorm, HandArithmetic) {
  Tensor x = Tensor::matrix(1, 2, {1, 3});
  Tensor gain = Tensor::vec({1, 1});
  Tensor bias = Tensor::vec({0, 0});
  Tensor y = layer_norm(x, gain, bias, 1e-12);
  EXPECT_NEAR(y.at(0), -1.0, 1e-10);
  EXPECT_NEAR(y.at(1), 1.0, 1e-10);
}

TEST(LayerNorm, NormalizedRowStats) {
  SeededRng rng(9);
  Tensor x = random_uniform({5, 8}, rng, -4.0, 4.0);
  Tensor gain = Tensor::full({8}, 1.0);
  Tensor bias = Tensor::zeros({8});
  // The statistics identity is exact only as eps -> 0; the default eps = 1e-5
  // biases row variance by about eps / sigma^2.
  Tensor y = layer_norm(x, gain, bias, 1e-12);
  for (std::size_t i = 0; i < 5; ++i) {
    double mean = 0.0, var = 0.0;
    for (std::size_t j = 0; j < 8; ++j) mean += y.at(i, j);
    mean /= 8.0;
    for (std::size_t j = 0; j < 8; ++j) var += (y.at(i, j) - mean) * (y.at(i, j) - mean);
    var /= 8.0;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-6);
  }
}

TEST(LayerNorm, ShiftScaleInvariance) {
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    SeededRng rng(seed);
    Tensor x = random_uniform({3, 6}, rng, -2.0, 2.0);
    Tensor gain = Tensor::full({6}, 1.0);
    Tensor bias = Tensor::zeros({6});
    const double a = 0.5 + rng.uniform();  // a > 0
    const double b = rng.uniform(-5.0, 5.0);
    Tensor y1 = layer_norm(x, gain, bias, 1e-12);
    Tensor y2 = layer_norm(affine(x, a, b), gain, bias, 1e-12);
    for (std::size_t i = 0; i < y1.size(); ++i) EXPECT_NEAR(y2.at(i), y1.at(i), 1e-9);
  }
}

TEST(LayerNorm, GainBiasGradMatchesFiniteDifferences) {
  SeededRng rng(31);
  Tensor x = random_uniform({3, 4}, rng, -2.0, 2.0);
  Tensor gain = random_uniform({4}, rng, 0.5, 1.5);
  Tensor bias = random_uniform({4}, rng, -0.5, 0.5);
  Tensor c = fixed_weights({3, 4}, 17);
  const double err = grad_check(
      [&](Tape* t) { return readout(layer_norm(x, gain, bias, 1e-5, t), c, t); },
      {x, gain, bias});
  EXPECT_LT(err, 1e-5);
}

TEST(Dropout, RateZeroIsIdentity) {
  SeededRng rng(1);
  Tensor x = random_uniform({4, 4}, rng, -1.0, 1.0);
  Tensor y = dropout(x, 0.0, true, &rng);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(y.at(i), x.at(i));
}

TEST(Dropout, InferenceModeIsIdentity) {
  SeededRng rng(2);
  Tensor x = random_uniform({4, 4}, rng, -1.0, 1.0);
  Tensor y = dropout(x, 0.9, false, &rng);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(y.at(i), x.at(i));
}

TEST(Dropout, LawOfLargeNumbers) {
  SeededRng rng(3);
  Tensor x = Tensor::full({100000}, 1.0);
  Tensor y = dropout(x, 0.1, true, &rng);
  double sum = 0.0;
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sum += y.at(i);
    if (y.at(i) == 0.0) ++zeros;
  }
  EXPECT_NEAR(sum / static_cast<double>(y.size()), 1.0, 0.01);
  EXPECT_NEAR(static_cast<double>(zeros) / static_cast<double>(y.size()), 0.1, 0.01);
}

TEST(Dropout, RateOutsideDomainIsConfigError) {
  SeededRng rng(4);
  Tensor x = Tensor::vec({1.0});
  EXPECT_THROW(dropout(x, 1.0, true, &rng), ConfigError);
  EXPECT_THROW(dropout(x, -0.1, true, &rng), ConfigError);
}

TEST(Dropout, BackwardUsesSameScaledMask) {
  SeededRng rng(5);
  Tensor x = Tensor::full({64}, 2.0);
  Tape tape;
  Tensor y = dropout(x, 0.25, true, &rng, &tape);
  Tensor loss = sum_all(y, &tape);
  tape.backward(loss);
  // Gradient of sum(y) w.r.t. x is exactly the mask that scaled the forward.
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(x.grad()[i], y.at(i) / x.at(i));
}

TEST(Tape, AdditiveAccumulationOnTwoConsumerGraph) {
  Tensor x = Tensor::vec({1.5, -2.0, 0.5});
  Tape tape;
  // y = x*x + 3x  =>  dy/dx = 2x + 3
  Tensor y = add(mul(x, x, &tape), affine(x, 3.0, 0.0, &tape), &tape);
  Tensor loss = sum_all(y, &tape);
  tape.backward(loss);
  for (std::size_t i = 0; i < x.size(); ++i)
    EXPECT_NEAR(x.grad()[i], 2.0 * x.at(i) + 3.0, 1e-12);
}

TEST(GradCheck, QuadraticIsExact) {
  Tensor w = Tensor::vec({1.0, 2.0});
  const double err = grad_check([&](Tape* t) { return sum_all(mul(w, w, t), t); }, {w});
  EXPECT_LT(err, 1e-9);
  EXPECT_NEAR(w.grad()[0], 2.0, 1e-12);
  EXPECT_NEAR(w.grad()[1], 4.0, 1e-12);
}

TEST(GradCheck, RejectsOutOfRangeStep) {
  Tensor w = Tensor::vec({1.0});
  GradCheckOptions opts;
  opts.h = 1e-2;
  EXPECT_THROW(grad_check([&](Tape* t) { return sum_all(w, t); }, {w}, opts), OracleError);
}

// Spec invariant: every differentiable op matches central differences at
// h = 1e-5 with max relative error < 1e-4 on random small tensors, >= 3 seeds.
TEST(GradCheck, AllOpsAcrossSeeds) {
  for (std::uint64_t seed : {101u, 202u, 303u}) {
    SeededRng rng(seed);
    Tensor a = random_uniform({3, 4}, rng, -1.5, 1.5);
    Tensor b = random_uniform({4, 3}, rng, -1.5, 1.5);
    Tensor e = random_uniform({3, 4}, rng, -1.5, 1.5);
    Tensor bias = random_uniform({4}, rng, -1.0, 1.0);
    Tensor gain = random_uniform({4}, rng, 0.5, 1.5);
    Tensor c34 = fixed_weights({3, 4}, seed + 1);
    Tensor c33 = fixed_weights({3, 3}, seed + 2);
    Tensor c43 = fixed_weights({4, 3}, seed + 3);
    Tensor c14 = fixed_weights({1, 4}, seed + 4);
    Tensor c24 = fixed_weights({2, 4}, seed + 5);

    auto check = [&](const char* what, const std::function<Tensor(Tape*)>& f,
                     std::vector<Tensor> params) {
      EXPECT_LT(grad_check(f, params), 1e-4) << what << " seed " << seed;
    };

    check("matmul", [&](Tape* t) { return readout(matmul(a, b, t), c33, t); }, {a, b});
    check("add", [&](Tape* t) { return readout(add(a, e, t), c34, t); }, {a, e});
    check("mul", [&](Tape* t) { return readout(mul(a, e, t), c34, t); }, {a, e});
    check("affine", [&](Tape* t) { return readout(affine(a, -1.0, 1.0, t), c34, t); }, {a});
    check("add_row", [&](Tape* t) { return readout(add_row(a, bias, t), c34, t); }, {a, bias});
    check("sigmoid", [&](Tape* t) { return readout(activation(a, Act::Sigmoid, t), c34, t); }, {a});
    check("tanh", [&](Tape* t) { return readout(activation(a, Act::Tanh, t), c34, t); }, {a});
    check("softmax", [&](Tape* t) { return readout(softmax_rows(a, t), c34, t); }, {a});
    check("layer_norm",
          [&](Tape* t) { return readout(layer_norm(a, gain, bias, 1e-5, t), c34, t); },
          {a, gain, bias});
    check("transpose", [&](Tape* t) { return readout(transpose(a, t), c43, t); }, {a});
    check("slice_cols", [&](Tape* t) { return readout(slice_cols(a, 1, 3, t), c33, t); }, {a});
    check("concat_cols",
          [&](Tape* t) { return readout(concat_cols({a, e}, t), fixed_weights({3, 8}, seed + 6), t); },
          {a, e});
    check("slice_row", [&](Tape* t) { return readout(slice_row(a, 1, t), c14, t); }, {a});
    check("mean_rows", [&](Tape* t) { return readout(mean_rows(a, t), c14, t); }, {a});
    check("stack_rows", [&](Tape* t) {
      return readout(stack_rows({slice_row(a, 0, t), slice_row(a, 2, t)}, t), c24, t);
    }, {a});
  }
}

TEST(Tensor, ForwardOpsAreFiniteAndDeterministic) {
  SeededRng rng_a(77);
  SeededRng rng_b(77);
  Tensor x1 = random_uniform({4, 4}, rng_a, -10.0, 10.0);
  Tensor x2 = random_uniform({4, 4}, rng_b, -10.0, 10.0);
  for (std::size_t i = 0; i < x1.size(); ++i) EXPECT_DOUBLE_EQ(x1.at(i), x2.at(i));

  Tensor gain = Tensor::full({4}, 1.0);
  Tensor bias = Tensor::zeros({4});
  Tensor y1 = layer_norm(softmax_rows(activation(x1, Act::Tanh)), gain, bias);
  Tensor y2 = layer_norm(softmax_rows(activation(x2, Act::Tanh)), gain, bias);
  EXPECT_TRUE(y1.all_finite());
  for (std::size_t i = 0; i < y1.size(); ++i) EXPECT_DOUBLE_EQ(y1.at(i), y2.at(i));
}

TEST(SeededRng, IdenticalSeedsIdenticalStreams) {
  SeededRng a(123456789);
  SeededRng b(123456789);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  SeededRng c(1);
  SeededRng d(2);
  bool differ = false;
  for (int i = 0; i < 10 && !differ; ++i) differ = c.next_u64() != d.next_u64();
  EXPECT_TRUE(differ);
}

TEST(SeededRng, NormalMomentsSane) {
  SeededRng rng(55);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    sum += v;
    sq += v * v;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}
