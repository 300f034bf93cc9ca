// Tree baselines: CART splits, forest bagging, the AdaBoost.R2 recurrence,
// and second-order boosting arithmetic.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bgtf/metrics.hpp"
#include "bgtf/trees.hpp"

using namespace bgtf;

namespace {

Matrix column(const std::vector<double>& xs) {
  Matrix m;
  for (double v : xs) m.push_back({v});
  return m;
}

double train_mse(const std::vector<double>& y, const std::vector<double>& pred) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - pred[i]) * (y[i] - pred[i]);
  return s / double(y.size());
}

Matrix random_matrix(std::size_t n, std::size_t f, SeededRng& rng) {
  Matrix m(n, std::vector<double>(f));
  for (auto& row : m)
    for (double& v : row) v = rng.uniform(-3.0, 3.0);
  return m;
}

}  // namespace

TEST(Cart, SingleSampleIsALeafWithItsTarget) {
  CartModel m = cart_fit({{1.0, 2.0}}, {7.5});
  EXPECT_EQ(m.tree.nodes.size(), 1u);
  EXPECT_DOUBLE_EQ(cart_predict(m, {{9.0, 9.0}})[0], 7.5);
}

TEST(Cart, SeparablePairSplitsPerfectly) {
  CartOptions opts;
  opts.max_depth = 16;
  opts.min_samples_leaf = 1;
  CartModel m = cart_fit(column({0.0, 1.0}), {0.0, 10.0}, opts);
  const auto pred = cart_predict(m, column({0.0, 1.0}));
  EXPECT_DOUBLE_EQ(train_mse({0.0, 10.0}, pred), 0.0);
}

TEST(Cart, HandEnumeratedSplit) {
  // {(1,1),(2,1),(3,5),(4,5)}: the best split separates the two plateaus.
  CartOptions opts;
  opts.max_depth = 1;
  opts.min_samples_leaf = 1;
  CartModel m = cart_fit(column({1, 2, 3, 4}), {1, 1, 5, 5}, opts);
  const TreeNode& root = m.tree.nodes[0];
  ASSERT_EQ(root.feature, 0);
  EXPECT_GT(root.threshold, 2.0);
  EXPECT_LT(root.threshold, 3.0);
  EXPECT_DOUBLE_EQ(m.tree.nodes[std::size_t(root.left)].value, 1.0);
  EXPECT_DOUBLE_EQ(m.tree.nodes[std::size_t(root.right)].value, 5.0);
}

TEST(Cart, EmptyDatasetIsAFitError) { EXPECT_THROW(cart_fit({}, {}), DataError); }

TEST(Cart, MemorizesPairwiseDistinctRows) {
  SeededRng rng(3);
  Matrix x = random_matrix(40, 3, rng);
  std::vector<double> y;
  for (std::size_t i = 0; i < 40; ++i) y.push_back(rng.uniform(0.0, 100.0));
  CartOptions opts;
  opts.max_depth = 64;
  opts.min_samples_leaf = 1;
  CartModel m = cart_fit(x, y, opts);
  EXPECT_DOUBLE_EQ(train_mse(y, cart_predict(m, x)), 0.0);
}

TEST(Cart, InvariantUnderTrainingRowPermutation) {
  SeededRng rng(4);
  Matrix x = random_matrix(30, 2, rng);
  std::vector<double> y;
  for (std::size_t i = 0; i < 30; ++i) y.push_back(rng.uniform(0.0, 10.0));
  CartModel a = cart_fit(x, y);
  std::vector<std::size_t> perm(30);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);
  Matrix xp;
  std::vector<double> yp;
  for (std::size_t i : perm) {
    xp.push_back(x[i]);
    yp.push_back(y[i]);
  }
  CartModel b = cart_fit(xp, yp);
  Matrix probe = random_matrix(20, 2, rng);
  const auto pa = cart_predict(a, probe);
  const auto pb = cart_predict(b, probe);
  for (std::size_t i = 0; i < probe.size(); ++i) EXPECT_EQ(pa[i], pb[i]);
}

TEST(Rf, DegenerateForestEqualsCart) {
  SeededRng rng(5);
  Matrix x = random_matrix(25, 3, rng);
  std::vector<double> y;
  for (std::size_t i = 0; i < 25; ++i) y.push_back(rng.uniform(0.0, 50.0));
  RfOptions rf_opts;
  rf_opts.n_trees = 1;
  rf_opts.bootstrap = false;
  rf_opts.feature_fraction = 1.0;
  rf_opts.max_depth = 8;
  rf_opts.min_samples_leaf = 2;
  ForestModel f = rf_fit(x, y, rf_opts);
  CartModel c = cart_fit(x, y, {8, 2});
  Matrix probe = random_matrix(15, 3, rng);
  const auto pf = rf_predict(f, probe);
  const auto pc = cart_predict(c, probe);
  for (std::size_t i = 0; i < probe.size(); ++i) EXPECT_EQ(pf[i], pc[i]);
}

TEST(Rf, ConstantTargetsPredictTheConstant) {
  SeededRng rng(6);
  Matrix x = random_matrix(20, 2, rng);
  std::vector<double> y(20, 42.0);
  RfOptions opts;
  opts.n_trees = 5;
  ForestModel f = rf_fit(x, y, opts);
  for (double p : rf_predict(f, random_matrix(10, 2, rng))) EXPECT_DOUBLE_EQ(p, 42.0);
}

TEST(Rf, DeterministicGivenSeed) {
  SeededRng rng(7);
  Matrix x = random_matrix(30, 3, rng);
  std::vector<double> y;
  for (std::size_t i = 0; i < 30; ++i) y.push_back(rng.uniform(0.0, 10.0));
  RfOptions opts;
  opts.n_trees = 10;
  opts.seed = 99;
  ForestModel a = rf_fit(x, y, opts);
  ForestModel b = rf_fit(x, y, opts);
  Matrix probe = random_matrix(12, 3, rng);
  const auto pa = rf_predict(a, probe);
  const auto pb = rf_predict(b, probe);
  for (std::size_t i = 0; i < probe.size(); ++i) EXPECT_EQ(pa[i], pb[i]);
}

TEST(Rf, FeatureFractionDomainIsEnforced) {
  Matrix x = {{1.0}, {2.0}};
  std::vector<double> y = {1.0, 2.0};
  RfOptions opts;
  opts.feature_fraction = 0.0;
  EXPECT_THROW(rf_fit(x, y, opts), ConfigError);
  opts.feature_fraction = 1.5;
  EXPECT_THROW(rf_fit(x, y, opts), ConfigError);
}

TEST(Adaboost, PerfectFirstRoundStopsWithExactPredictions) {
  AdaboostOptions opts;
  opts.max_depth = 3;
  opts.n_rounds = 10;
  AdaboostModel m = adaboost_r2_fit(column({0.0, 1.0}), {0.0, 10.0}, opts);
  EXPECT_EQ(m.trees.size(), 1u);
  const auto pred = adaboost_predict(m, column({0.0, 1.0}));
  EXPECT_DOUBLE_EQ(pred[0], 0.0);
  EXPECT_DOUBLE_EQ(pred[1], 10.0);
}

TEST(Adaboost, WeightedMedianOfASingleTreeIsThatTree) {
  EXPECT_DOUBLE_EQ(weighted_median({{3.7, 2.0}}), 3.7);
  // Even weights, three values: the middle one carries the crossing.
  EXPECT_DOUBLE_EQ(weighted_median({{1.0, 1.0}, {2.0, 1.0}, {9.0, 1.0}}), 2.0);
}

// Independent step-by-step trace of the Drucker recurrence: own resampling
// (same documented rng stream), own stump fitter, own weight updates, own
// weighted median. Compared against the production fit on an 8-point dataset.
TEST(Adaboost, MatchesIndependentTraceOracle) {
  const std::vector<double> xs = {0, 1, 2, 3, 4, 5, 6, 7};
  const std::vector<double> ys = {1.0, 1.2, 0.8, 5.0, 5.2, 4.9, 9.0, 9.3};
  const std::size_t n = xs.size();
  const std::uint64_t seed = 123;
  const std::size_t rounds = 3;

  AdaboostOptions opts;
  opts.n_rounds = rounds;
  opts.max_depth = 1;
  opts.seed = seed;
  AdaboostModel production = adaboost_r2_fit(column(xs), ys, opts);

  // ---- oracle ----
  struct Stump {
    bool is_leaf;
    double threshold, left, right, leaf;
    double predict(double x) const { return is_leaf ? leaf : (x <= threshold ? left : right); }
  };
  auto fit_stump = [&](const std::vector<std::size_t>& sample) {
    double best_gain = -1.0;
    Stump best{true, 0, 0, 0, 0};
    double total = 0.0;
    for (std::size_t i : sample) total += ys[i];
    best.leaf = total / double(sample.size());
    std::vector<std::size_t> sorted = sample;
    std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    double left_sum = 0.0;
    for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
      left_sum += ys[sorted[k]];
      if (xs[sorted[k]] == xs[sorted[k + 1]]) continue;
      const double nl = double(k + 1), nr = double(sorted.size() - k - 1);
      const double right_sum = total - left_sum;
      const double gain =
          left_sum * left_sum / nl + right_sum * right_sum / nr - total * total / double(sorted.size());
      if (gain > best_gain) {
        best_gain = gain;
        best.is_leaf = false;
        best.threshold = xs[sorted[k]] + 0.5 * (xs[sorted[k + 1]] - xs[sorted[k]]);
        best.left = left_sum / nl;
        best.right = right_sum / nr;
      }
    }
    return best;
  };

  std::vector<double> w(n, 1.0 / double(n));
  std::vector<Stump> stumps;
  std::vector<double> stump_weights;
  for (std::size_t round = 0; round < rounds; ++round) {
    SeededRng rng(derive_seed(seed, 5000 + round));
    std::vector<double> cdf(n);
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      acc += w[k];
      cdf[k] = acc;
    }
    std::vector<std::size_t> sample;
    for (std::size_t d = 0; d < n; ++d) {
      const double u = rng.uniform() * acc;
      sample.push_back(std::min<std::size_t>(
          std::size_t(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin()), n - 1));
    }
    Stump st = fit_stump(sample);
    std::vector<double> resid(n);
    double max_resid = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      resid[k] = std::abs(ys[k] - st.predict(xs[k]));
      max_resid = std::max(max_resid, resid[k]);
    }
    ASSERT_GT(max_resid, 0.0);
    double avg_loss = 0.0;
    for (std::size_t k = 0; k < n; ++k) avg_loss += w[k] * resid[k] / max_resid;
    ASSERT_LT(avg_loss, 0.5);
    const double beta = avg_loss / (1.0 - avg_loss);
    stumps.push_back(st);
    stump_weights.push_back(std::log(1.0 / beta));
    double w_sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      w[k] *= std::pow(beta, 1.0 - resid[k] / max_resid);
      w_sum += w[k];
    }
    for (double& wk : w) wk /= w_sum;
  }

  ASSERT_EQ(production.trees.size(), rounds);
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<std::pair<double, double>> vw;
    for (std::size_t t = 0; t < rounds; ++t) vw.emplace_back(stumps[t].predict(xs[k]), stump_weights[t]);
    std::sort(vw.begin(), vw.end());
    double total = 0.0;
    for (auto& [v, wt] : vw) total += wt;
    double cum = 0.0, oracle_pred = vw.back().first;
    for (auto& [v, wt] : vw) {
      cum += wt;
      if (cum >= 0.5 * total) {
        oracle_pred = v;
        break;
      }
    }
    EXPECT_NEAR(adaboost_predict(production, {{xs[k]}})[0], oracle_pred, 1e-12);
  }
}

TEST(Adaboost, RetainedRoundsAllBeatHalfLoss) {
  SeededRng rng(8);
  Matrix x = random_matrix(40, 2, rng);
  std::vector<double> y;
  for (std::size_t i = 0; i < 40; ++i) y.push_back(x[i][0] * 3.0 + rng.normal(0.0, 2.0));
  AdaboostOptions opts;
  opts.n_rounds = 20;
  AdaboostModel m = adaboost_r2_fit(x, y, opts);
  ASSERT_GE(m.trees.size(), 1u);
  for (double lbar : m.round_avg_loss) EXPECT_LT(lbar, 0.5);
  EXPECT_EQ(m.trees.size(), m.round_avg_loss.size());
}

TEST(Gbt, SingleUnregularizedRoundFitsResiduals) {
  SeededRng rng(9);
  Matrix x = random_matrix(20, 2, rng);
  std::vector<double> y;
  for (std::size_t i = 0; i < 20; ++i) y.push_back(rng.uniform(0.0, 10.0));
  GbtOptions opts;
  opts.n_rounds = 1;
  opts.max_depth = 32;
  opts.eta = 1.0;
  opts.lambda = 0.0;
  opts.gamma = 0.0;
  GbtModel m = gbt_fit(x, y, opts);
  EXPECT_NEAR(train_mse(y, gbt_predict(m, x)), 0.0, 1e-18);
}

TEST(Gbt, HugeGammaBlocksAllSplits) {
  SeededRng rng(10);
  Matrix x = random_matrix(20, 2, rng);
  std::vector<double> y;
  double mean = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    y.push_back(rng.uniform(0.0, 10.0));
    mean += y.back();
  }
  mean /= 20.0;
  GbtOptions opts;
  opts.n_rounds = 5;
  opts.gamma = 1e12;
  GbtModel m = gbt_fit(x, y, opts);
  for (double p : gbt_predict(m, x)) EXPECT_NEAR(p, mean, 1e-9);
}

TEST(Gbt, HandArithmeticWithUnitLambda) {
  // {(0,0),(1,2)}, lambda=1, eta=1: base = 1, gradients {1,-1},
  // leaf weights -G/(H+lambda) = -1/2 and +1/2.
  GbtOptions opts;
  opts.n_rounds = 1;
  opts.max_depth = 4;
  opts.eta = 1.0;
  opts.lambda = 1.0;
  opts.gamma = 0.0;
  GbtModel m = gbt_fit(column({0.0, 1.0}), {0.0, 2.0}, opts);
  const auto pred = gbt_predict(m, column({0.0, 1.0}));
  EXPECT_DOUBLE_EQ(pred[0], 0.5);
  EXPECT_DOUBLE_EQ(pred[1], 1.5);
}

TEST(Gbt, TrainMseNonincreasingPerRound) {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    SeededRng rng(seed);
    Matrix x = random_matrix(30, 2, rng);
    std::vector<double> y;
    for (std::size_t i = 0; i < 30; ++i)
      y.push_back(2.0 * x[i][0] - x[i][1] + rng.normal(0.0, 0.5));
    GbtOptions opts;
    opts.n_rounds = 25;
    opts.eta = 0.1;
    opts.lambda = 0.0;
    opts.gamma = 0.0;
    GbtModel m = gbt_fit(x, y, opts);
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k <= m.trees.size(); ++k) {
      const double mse = train_mse(y, gbt_predict(m, x, k));
      EXPECT_LE(mse, prev + 1e-12) << "round " << k;
      prev = mse;
    }
  }
}

TEST(Gbt, ConfigDomainIsEnforced) {
  Matrix x = {{0.0}, {1.0}};
  std::vector<double> y = {0.0, 1.0};
  GbtOptions opts;
  opts.eta = 0.0;
  EXPECT_THROW(gbt_fit(x, y, opts), ConfigError);
  opts.eta = 1.5;
  EXPECT_THROW(gbt_fit(x, y, opts), ConfigError);
  opts.eta = 0.1;
  opts.lambda = -1.0;
  EXPECT_THROW(gbt_fit(x, y, opts), ConfigError);
}

TEST(TreePredict, LeafOnlyTreeIsConstant) {
  CartModel m = cart_fit({{1.0}, {1.0}}, {4.0, 6.0});  // identical rows: no legal split
  EXPECT_EQ(m.tree.nodes.size(), 1u);
  for (double p : cart_predict(m, column({-5, 0, 5}))) EXPECT_DOUBLE_EQ(p, 5.0);
}

TEST(TreePredict, ForestPredictionIsMeanOfTrees) {
  SeededRng rng(14);
  Matrix x = random_matrix(25, 2, rng);
  std::vector<double> y;
  for (std::size_t i = 0; i < 25; ++i) y.push_back(rng.uniform(0.0, 10.0));
  RfOptions opts;
  opts.n_trees = 7;
  opts.seed = 3;
  ForestModel f = rf_fit(x, y, opts);
  Matrix probe = random_matrix(5, 2, rng);
  const auto pred = rf_predict(f, probe);
  for (std::size_t i = 0; i < probe.size(); ++i) {
    double mean = 0.0;
    for (const Tree& t : f.trees) mean += t.predict_row(probe[i]);
    mean /= double(f.trees.size());
    EXPECT_DOUBLE_EQ(pred[i], mean);
  }
}

TEST(TreePredict, WidthMismatchIsSchemaError) {
  CartModel m = cart_fit({{1.0, 2.0}, {3.0, 4.0}}, {1.0, 2.0});
  EXPECT_THROW(cart_predict(m, {{1.0}}), SchemaError);
}

TEST(Trees, BoostersInvariantUnderRowPermutation) {
  SeededRng rng(15);
  Matrix x = random_matrix(24, 2, rng);
  std::vector<double> y;
  for (std::size_t i = 0; i < 24; ++i) y.push_back(x[i][0] - 2.0 * x[i][1] + rng.normal(0.0, 0.3));
  std::vector<std::size_t> perm(24);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);
  Matrix xp;
  std::vector<double> yp;
  for (std::size_t i : perm) {
    xp.push_back(x[i]);
    yp.push_back(y[i]);
  }
  Matrix probe = random_matrix(10, 2, rng);

  AdaboostOptions ab;
  ab.n_rounds = 5;
  ab.seed = 31;
  const auto ab1 = adaboost_predict(adaboost_r2_fit(x, y, ab), probe);
  const auto ab2 = adaboost_predict(adaboost_r2_fit(xp, yp, ab), probe);
  for (std::size_t i = 0; i < probe.size(); ++i) EXPECT_EQ(ab1[i], ab2[i]);

  GbtOptions gb;
  gb.n_rounds = 10;
  const auto gb1 = gbt_predict(gbt_fit(x, y, gb), probe);
  const auto gb2 = gbt_predict(gbt_fit(xp, yp, gb), probe);
  for (std::size_t i = 0; i < probe.size(); ++i) EXPECT_EQ(gb1[i], gb2[i]);

  RfOptions rf;
  rf.n_trees = 8;
  rf.seed = 17;
  const auto rf1 = rf_predict(rf_fit(x, y, rf), probe);
  const auto rf2 = rf_predict(rf_fit(xp, yp, rf), probe);
  for (std::size_t i = 0; i < probe.size(); ++i) EXPECT_EQ(rf1[i], rf2[i]);
}
