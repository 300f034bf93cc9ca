// Attention layer: scaled dot-product, multi-head, encoder stack, positional
// encoding.

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "bgtf/attention.hpp"
#include "bgtf/gradcheck.hpp"

using namespace bgtf;

namespace {

Tensor permute_rows(const Tensor& m, const std::vector<std::size_t>& perm) {
  Tensor out = Tensor::zeros({m.rows(), m.cols()});
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out.at(i, j) = m.at(perm[i], j);
  return out;
}

std::vector<EncoderLayerParams> seeded_stack(std::size_t n_layers, std::size_t d_model,
                                             std::size_t heads, std::uint64_t seed) {
  SeededRng rng(seed);
  std::vector<EncoderLayerParams> layers;
  for (std::size_t i = 0; i < n_layers; ++i)
    layers.push_back(EncoderLayerParams::init(d_model, 4 * d_model, heads, rng));
  return layers;
}

}  // namespace

TEST(ScaledDotAttention, SingleTokenReturnsValueRow) {
  Tensor q = Tensor::matrix(1, 3, {0.4, -0.2, 0.9});
  Tensor k = Tensor::matrix(1, 3, {1.0, 2.0, 3.0});
  Tensor v = Tensor::matrix(1, 2, {5.0, -7.0});
  Tensor out = scaled_dot_attention(q, k, v);
  EXPECT_DOUBLE_EQ(out.at(0), 5.0);
  EXPECT_DOUBLE_EQ(out.at(1), -7.0);
}

TEST(ScaledDotAttention, ZeroQueriesGiveUniformMixture) {
  Tensor q = Tensor::zeros({3, 2});
  SeededRng rng(4);
  Tensor k = random_uniform({3, 2}, rng, -1.0, 1.0);
  Tensor v = random_uniform({3, 4}, rng, -2.0, 2.0);
  Tensor out = scaled_dot_attention(q, k, v);
  for (std::size_t j = 0; j < 4; ++j) {
    double mean = (v.at(0, j) + v.at(1, j) + v.at(2, j)) / 3.0;
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(out.at(i, j), mean, 1e-12);
  }
}

TEST(ScaledDotAttention, HandArithmetic) {
  Tensor q = Tensor::matrix(2, 1, {1.0, 0.0});
  Tensor k = Tensor::matrix(2, 1, {1.0, 0.0});
  Tensor v = Tensor::matrix(2, 1, {10.0, 20.0});
  Tensor out = scaled_dot_attention(q, k, v);
  const double e = std::exp(1.0);
  EXPECT_NEAR(out.at(0, 0), (e * 10.0 + 20.0) / (e + 1.0), 1e-12);
  EXPECT_NEAR(out.at(0, 0), 12.689, 1e-3);
  EXPECT_DOUBLE_EQ(out.at(1, 0), 15.0);  // zero logits -> uniform over the two values
}

TEST(ScaledDotAttention, AttentionRowsAreDistributions) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SeededRng rng(seed);
    Tensor q = random_uniform({4, 3}, rng, -2.0, 2.0);
    Tensor k = random_uniform({4, 3}, rng, -2.0, 2.0);
    Tensor v = random_uniform({4, 2}, rng, -2.0, 2.0);
    // Recompute the weights from components and check both the distribution
    // property and that the op output is exactly attn @ V.
    Tensor attn = softmax_rows(affine(matmul(q, transpose(k)), 1.0 / std::sqrt(3.0), 0.0));
    for (std::size_t i = 0; i < 4; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_GE(attn.at(i, j), 0.0);
        sum += attn.at(i, j);
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
    Tensor expected = matmul(attn, v);
    Tensor out = scaled_dot_attention(q, k, v);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_DOUBLE_EQ(out.at(i), expected.at(i));
  }
}

TEST(MultiHeadAttention, SingleHeadDegeneratesToPlainAttention) {
  SeededRng rng(17);
  MhaParams p = MhaParams::init(4, 1, rng);
  Tensor x = random_uniform({3, 4}, rng, -1.0, 1.0);
  Tensor out = multi_head_attention(x, p);
  Tensor expected = matmul(scaled_dot_attention(matmul(x, p.w_q), matmul(x, p.w_k), matmul(x, p.w_v)), p.w_o);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out.at(i), expected.at(i), 1e-12);
}

TEST(MultiHeadAttention, PermutationEquivariantWithoutPe) {
  SeededRng rng(19);
  MhaParams p = MhaParams::init(6, 2, rng);
  Tensor x = random_uniform({4, 6}, rng, -1.0, 1.0);
  std::vector<std::size_t> perm = {2, 0, 3, 1};
  Tensor direct = multi_head_attention(permute_rows(x, perm), p);
  Tensor permuted = permute_rows(multi_head_attention(x, p), perm);
  for (std::size_t i = 0; i < direct.size(); ++i) EXPECT_NEAR(direct.at(i), permuted.at(i), 1e-9);
}

TEST(MultiHeadAttention, HeadCountMustDivideModelWidth) {
  SeededRng rng(23);
  EXPECT_THROW(MhaParams::init(6, 4, rng), ConfigError);
}

TEST(MultiHeadAttention, GradMatchesFiniteDifferences) {
  SeededRng rng(29);
  MhaParams p = MhaParams::init(4, 2, rng);
  Tensor x = random_uniform({3, 4}, rng, -1.0, 1.0);
  Tensor c = random_uniform({3, 4}, rng, -1.0, 1.0);
  std::vector<Tensor> params = {x, p.w_q, p.w_k, p.w_v, p.w_o};
  const double err = grad_check(
      [&](Tape* t) { return sum_all(mul(multi_head_attention(x, p, DropoutSpec::off(), t), c, t), t); },
      params);
  EXPECT_LT(err, 1e-4);
}

TEST(EncoderLayer, PreservesShapeForAnySequenceLength) {
  SeededRng rng(31);
  EncoderLayerParams p = EncoderLayerParams::init(4, 16, 2, rng);
  for (std::size_t t_len : {1u, 2u, 7u}) {
    Tensor x = random_uniform({t_len, 4}, rng, -1.0, 1.0);
    EXPECT_EQ(encoder_layer(x, p).shape(), x.shape());
  }
}

TEST(EncoderLayer, DeterministicWithDropoutOff) {
  SeededRng rng(37);
  EncoderLayerParams p = EncoderLayerParams::init(4, 16, 2, rng);
  Tensor x = random_uniform({3, 4}, rng, -1.0, 1.0);
  Tensor a = encoder_layer(x, p);
  Tensor b = encoder_layer(x, p);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_DOUBLE_EQ(a.at(i), b.at(i));
}

TEST(EncoderLayer, GradMatchesFiniteDifferences) {
  SeededRng rng(41);
  EncoderLayerParams p = EncoderLayerParams::init(4, 8, 2, rng);
  Tensor x = random_uniform({3, 4}, rng, -1.0, 1.0);
  Tensor c = random_uniform({3, 4}, rng, -1.0, 1.0);
  std::vector<Tensor> params = {x};
  for (auto& [name, tensor] : p.named("enc")) params.push_back(tensor);
  const double err = grad_check(
      [&](Tape* t) { return sum_all(mul(encoder_layer(x, p, DropoutSpec::off(), t), c, t), t); },
      params);
  EXPECT_LT(err, 1e-4);
}

TEST(EncoderStack, OneLayerEqualsSingleLayerCall) {
  auto layers = seeded_stack(1, 4, 2, 43);
  SeededRng rng(44);
  Tensor x = random_uniform({3, 4}, rng, -1.0, 1.0);
  Tensor a = encoder_stack(x, layers);
  Tensor b = encoder_layer(x, layers[0]);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_DOUBLE_EQ(a.at(i), b.at(i));
}

TEST(EncoderStack, EmptyLayerListIsConfigError) {
  Tensor x = Tensor::zeros({2, 4});
  EXPECT_THROW(encoder_stack(x, {}), ConfigError);
}

TEST(EncoderStack, EquivarianceComposesThroughLayers) {
  auto layers = seeded_stack(3, 4, 2, 47);
  SeededRng rng(48);
  Tensor x = random_uniform({5, 4}, rng, -1.0, 1.0);
  std::vector<std::size_t> perm = {4, 2, 0, 1, 3};
  Tensor direct = encoder_stack(permute_rows(x, perm), layers);
  Tensor permuted = permute_rows(encoder_stack(x, layers), perm);
  for (std::size_t i = 0; i < direct.size(); ++i) EXPECT_NEAR(direct.at(i), permuted.at(i), 1e-9);
}

TEST(EncoderStack, TwoLayerGradMatchesFiniteDifferences) {
  auto layers = seeded_stack(2, 4, 2, 53);
  SeededRng rng(54);
  Tensor x = random_uniform({3, 4}, rng, -1.0, 1.0);
  Tensor c = random_uniform({3, 4}, rng, -1.0, 1.0);
  std::vector<Tensor> params = {x};
  for (std::size_t l = 0; l < layers.size(); ++l)
    for (auto& [name, tensor] : layers[l].named("enc" + std::to_string(l))) params.push_back(tensor);
  const double err = grad_check(
      [&](Tape* t) { return sum_all(mul(encoder_stack(x, layers, DropoutSpec::off(), t), c, t), t); },
      params);
  EXPECT_LT(err, 1e-4);
}

TEST(SinusoidalPe, FirstPositionIsSinZeroCosZero) {
  Tensor pe = sinusoidal_pe(5, 8);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(pe.at(0, 2 * i), 0.0);
    EXPECT_DOUBLE_EQ(pe.at(0, 2 * i + 1), 1.0);
  }
}

TEST(SinusoidalPe, EntriesBoundedByOne) {
  Tensor pe = sinusoidal_pe(20, 16);
  for (std::size_t i = 0; i < pe.size(); ++i) {
    EXPECT_GE(pe.at(i), -1.0);
    EXPECT_LE(pe.at(i), 1.0);
  }
}

TEST(SinusoidalPe, HandEvaluation) {
  Tensor pe = sinusoidal_pe(2, 4);
  EXPECT_NEAR(pe.at(1, 0), std::sin(1.0), 1e-12);
  EXPECT_NEAR(pe.at(1, 0), 0.84147, 1e-5);
  EXPECT_NEAR(pe.at(1, 1), std::cos(1.0), 1e-12);
  EXPECT_NEAR(pe.at(1, 2), std::sin(1.0 / 100.0), 1e-12);
}

TEST(SinusoidalPe, OddWidthIsConfigError) { EXPECT_THROW(sinusoidal_pe(4, 5), ConfigError); }

TEST(SinusoidalPe, AdditionBreaksEquivariance) {
  auto layers = seeded_stack(2, 4, 2, 59);
  SeededRng rng(60);
  Tensor x = random_uniform({4, 4}, rng, -1.0, 1.0);
  Tensor pe = sinusoidal_pe(4, 4);
  std::vector<std::size_t> perm = {1, 0, 2, 3};  // transposition of two tokens
  Tensor a = encoder_stack(add(x, pe), layers);
  Tensor b = permute_rows(encoder_stack(add(permute_rows(x, perm), pe), layers), perm);
  double max_diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) max_diff = std::max(max_diff, std::abs(a.at(i) - b.at(i)));
  EXPECT_GT(max_diff, 1e-6);
}
