#pragma once
// The four tree baselines: CART, bagged random forest, AdaBoost.R2 with
// weighted-median aggregation, and second-order regularized gradient-boosted
// trees. Desk-scale, exhaustive midpoint split search.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "bgtf/tensor.hpp"
#include "bgtf/train.hpp"

namespace bgtf {

// Flat node storage; node 0 is the root. Internal nodes route
// x[feature] <= threshold to the left child.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  double value = 0.0;
  int left = -1;
  int right = -1;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict_row(const std::vector<double>& row) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const TreeNode& n = nodes[static_cast<std::size_t>(i)];
      i = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }
};

using Matrix = std::vector<std::vector<double>>;

namespace detail {

inline void require_fit_data(const Matrix& x, const std::vector<double>& y, const char* op) {
  if (x.empty() || x.size() != y.size())
    throw DataError(std::string(op) + ": need equal nonzero row/target counts, got " +
                    std::to_string(x.size()) + " and " + std::to_string(y.size()));
  for (const auto& row : x)
    if (row.size() != x[0].size()) throw DataError(std::string(op) + ": ragged feature rows");
}

inline void require_width(const Matrix& x, std::size_t width, const char* op) {
  for (const auto& row : x)
    if (row.size() != width)
      throw SchemaError(std::string(op) + ": row width " + std::to_string(row.size()) +
                        " does not match fit-time width " + std::to_string(width));
}

// Canonical row order: lexicographic by feature vector, then target. Fits use
// this order so training is invariant to the incoming row permutation (both
// the resampling streams and the floating-point summation order).
inline std::vector<std::size_t> canonical_order(const Matrix& x, const std::vector<double>& y) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (x[a] != x[b]) return x[a] < x[b];
    return y[a] < y[b];
  });
  return order;
}

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// CART
// ---------------------------------------------------------------------------

struct CartOptions {
  std::size_t max_depth = 8;
  std::size_t min_samples_leaf = 2;
};

namespace detail {

class CartGrower {
 public:
  CartGrower(const Matrix& x, const std::vector<double>& y, const CartOptions& opts,
             SeededRng* feature_rng, std::size_t features_per_split)
      : x_(x), y_(y), opts_(opts), feature_rng_(feature_rng), m_(features_per_split) {}

  Tree grow(std::vector<std::size_t> indices) {
    Tree tree;
    build(tree, std::move(indices), 0);
    return tree;
  }

 private:
  int build(Tree& tree, std::vector<std::size_t> indices, std::size_t depth) {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i : indices) {
      sum += y_[i];
      sumsq += y_[i] * y_[i];
    }
    const double n = static_cast<double>(indices.size());
    const double mean = sum / n;
    const double sse = sumsq - sum * sum / n;
    tree.nodes[static_cast<std::size_t>(node_id)].value = mean;

    const bool stop = depth >= opts_.max_depth || indices.size() < 2 * opts_.min_samples_leaf ||
                      sse <= 1e-12;
    if (stop) return node_id;

    const SplitChoice best = find_best_split(indices);
    if (best.feature < 0) return node_id;  // no legal split (identical feature vectors)

    std::vector<std::size_t> left, right;
    for (std::size_t i : indices)
      (x_[i][static_cast<std::size_t>(best.feature)] <= best.threshold ? left : right).push_back(i);
    indices.clear();
    indices.shrink_to_fit();
    const int left_id = build(tree, std::move(left), depth + 1);
    const int right_id = build(tree, std::move(right), depth + 1);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left_id;
    node.right = right_id;
    return node_id;
  }

  // Exhaustive search over midpoints of consecutive distinct sorted values.
  // Any legal split is acceptable even at zero gain; ties resolve to the
  // lowest feature index, then the smallest threshold.
  SplitChoice find_best_split(const std::vector<std::size_t>& indices) {
    const std::size_t n_features = x_[0].size();
    std::vector<std::size_t> features(n_features);
    std::iota(features.begin(), features.end(), std::size_t{0});
    if (feature_rng_ && m_ < n_features) {
      // Per-split feature subsample, drawn from the tree's own stream.
      for (std::size_t i = 0; i < m_; ++i)
        std::swap(features[i], features[i + feature_rng_->below(n_features - i)]);
      features.resize(m_);
      std::sort(features.begin(), features.end());
    }

    SplitChoice best;
    bool found = false;
    std::vector<std::pair<double, std::size_t>> sorted(indices.size());
    for (std::size_t f : features) {
      for (std::size_t k = 0; k < indices.size(); ++k)
        sorted[k] = {x_[indices[k]][f], indices[k]};
      // Stable on the incoming (canonical) order so equal feature values sum
      // identically regardless of the original row permutation.
      std::stable_sort(sorted.begin(), sorted.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      double left_sum = 0.0;
      const double total_sum = [&] {
        double s = 0.0;
        for (std::size_t i : indices) s += y_[i];
        return s;
      }();
      for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
        left_sum += y_[sorted[k].second];
        if (sorted[k].first == sorted[k + 1].first) continue;
        const std::size_t n_left = k + 1, n_right = sorted.size() - n_left;
        if (n_left < opts_.min_samples_leaf || n_right < opts_.min_samples_leaf) continue;
        // SSE reduction = n_L*n_R/n * (mean_L - mean_R)^2, via the sums form.
        const double right_sum = total_sum - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(n_left) +
                            right_sum * right_sum / static_cast<double>(n_right) -
                            total_sum * total_sum / static_cast<double>(sorted.size());
        const double threshold = sorted[k].first + 0.5 * (sorted[k + 1].first - sorted[k].first);
        if (!found || gain > best.gain) {
          best = {static_cast<int>(f), threshold, gain};
          found = true;
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  const std::vector<double>& y_;
  CartOptions opts_;
  SeededRng* feature_rng_;
  std::size_t m_;
};

}  // namespace detail

struct CartModel {
  Tree tree;
  std::size_t n_features = 0;
};

inline CartModel cart_fit(const Matrix& x, const std::vector<double>& y,
                          const CartOptions& opts = {}) {
  detail::require_fit_data(x, y, "cart_fit");
  CartModel model;
  model.n_features = x[0].size();
  detail::CartGrower grower(x, y, opts, nullptr, model.n_features);
  model.tree = grower.grow(detail::canonical_order(x, y));
  return model;
}

inline std::vector<double> cart_predict(const CartModel& model, const Matrix& x) {
  detail::require_width(x, model.n_features, "cart_predict");
  std::vector<double> out;
  out.reserve(x.size());
  for (const auto& row : x) out.push_back(model.tree.predict_row(row));
  return out;
}

// ---------------------------------------------------------------------------
// Random forest: bagging + per-split feature subsampling, mean aggregation.
// ---------------------------------------------------------------------------

struct RfOptions {
  std::size_t n_trees = 100;
  std::size_t max_depth = 8;
  std::size_t min_samples_leaf = 2;
  std::optional<double> feature_fraction;  // default: 1/sqrt(F), rounded up
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

struct ForestModel {
  std::vector<Tree> trees;
  std::size_t n_features = 0;
};

inline ForestModel rf_fit(const Matrix& x, const std::vector<double>& y, const RfOptions& opts = {}) {
  detail::require_fit_data(x, y, "rf_fit");
  if (opts.n_trees < 1) throw ConfigError("rf_fit: n_trees must be >= 1");
  const std::size_t n_features = x[0].size();
  double fraction = 1.0 / std::sqrt(static_cast<double>(n_features));
  if (opts.feature_fraction) {
    if (!(*opts.feature_fraction > 0.0 && *opts.feature_fraction <= 1.0))
      throw ConfigError("rf_fit: feature_fraction must lie in (0, 1]");
    fraction = *opts.feature_fraction;
  }
  const std::size_t m = std::min(
      n_features, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n_features))));

  const std::vector<std::size_t> canonical = detail::canonical_order(x, y);
  ForestModel model;
  model.n_features = n_features;
  const CartOptions cart_opts{opts.max_depth, opts.min_samples_leaf};
  for (std::size_t t = 0; t < opts.n_trees; ++t) {
    SeededRng tree_rng(derive_seed(opts.seed, t));
    std::vector<std::size_t> sample;
    if (opts.bootstrap) {
      sample.reserve(canonical.size());
      for (std::size_t i = 0; i < canonical.size(); ++i)
        sample.push_back(canonical[tree_rng.below(canonical.size())]);
    } else {
      sample = canonical;
    }
    detail::CartGrower grower(x, y, cart_opts, m < n_features ? &tree_rng : nullptr, m);
    model.trees.push_back(grower.grow(std::move(sample)));
  }
  return model;
}

inline std::vector<double> rf_predict(const ForestModel& model, const Matrix& x) {
  detail::require_width(x, model.n_features, "rf_predict");
  std::vector<double> out;
  out.reserve(x.size());
  for (const auto& row : x) {
    double sum = 0.0;
    for (const Tree& t : model.trees) sum += t.predict_row(row);
    out.push_back(sum / static_cast<double>(model.trees.size()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// AdaBoost.R2 (Drucker, linear loss) with weighted-median prediction.
// ---------------------------------------------------------------------------

struct AdaboostOptions {
  std::size_t n_rounds = 50;
  std::size_t max_depth = 3;
  std::uint64_t seed = 0;
};

struct AdaboostModel {
  std::vector<Tree> trees;
  std::vector<double> log_inv_beta;  // per retained tree, ln(1/beta)
  std::vector<double> round_avg_loss;  // audit: weighted average loss per retained round
  double fallback_mean = 0.0;          // used only when no round was retained
  std::size_t n_features = 0;
};

inline double weighted_median(std::vector<std::pair<double, double>> value_weight) {
  std::sort(value_weight.begin(), value_weight.end());
  double total = 0.0;
  for (const auto& [v, w] : value_weight) total += w;
  double cum = 0.0;
  for (const auto& [v, w] : value_weight) {
    cum += w;
    if (cum >= 0.5 * total) return v;
  }
  return value_weight.back().first;
}

inline AdaboostModel adaboost_r2_fit(const Matrix& x, const std::vector<double>& y,
                                     const AdaboostOptions& opts = {}) {
  detail::require_fit_data(x, y, "adaboost_r2_fit");
  if (opts.n_rounds < 1) throw ConfigError("adaboost_r2_fit: n_rounds must be >= 1");
  const std::size_t n = x.size();
  const std::vector<std::size_t> canonical = detail::canonical_order(x, y);

  AdaboostModel model;
  model.n_features = x[0].size();
  for (std::size_t k : canonical) model.fallback_mean += y[k];
  model.fallback_mean /= static_cast<double>(n);

  std::vector<double> w(n, 1.0 / static_cast<double>(n));  // indexed by canonical position
  const CartOptions cart_opts{opts.max_depth, 1};

  for (std::size_t round = 0; round < opts.n_rounds; ++round) {
    SeededRng rng(derive_seed(opts.seed, 5000 + round));
    // Weighted resample via inverse CDF over the canonical order.
    std::vector<double> cdf(n);
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      acc += w[k];
      cdf[k] = acc;
    }
    std::vector<std::size_t> ranks;
    ranks.reserve(n);
    for (std::size_t d = 0; d < n; ++d) {
      const double u = rng.uniform() * acc;
      const std::size_t k = static_cast<std::size_t>(
          std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      ranks.push_back(std::min(k, n - 1));
    }
    // Sort the resample by canonical rank so the tree fit sums in an order
    // independent of the original row permutation.
    std::sort(ranks.begin(), ranks.end());
    std::vector<std::size_t> sample;
    sample.reserve(n);
    for (std::size_t k : ranks) sample.push_back(canonical[k]);

    detail::CartGrower grower(x, y, cart_opts, nullptr, model.n_features);
    Tree tree = grower.grow(std::move(sample));

    std::vector<double> resid(n);
    double max_resid = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      resid[k] = std::abs(y[canonical[k]] - tree.predict_row(x[canonical[k]]));
      max_resid = std::max(max_resid, resid[k]);
    }
    if (max_resid == 0.0) {
      // Perfect fit: retain and stop; the model is valid.
      model.trees.push_back(std::move(tree));
      model.log_inv_beta.push_back(std::log(1e10));
      model.round_avg_loss.push_back(0.0);
      break;
    }
    double avg_loss = 0.0;
    for (std::size_t k = 0; k < n; ++k) avg_loss += w[k] * (resid[k] / max_resid);
    if (avg_loss >= 0.5) break;  // Drucker stop: this round is discarded

    const double beta = avg_loss / (1.0 - avg_loss);
    model.trees.push_back(std::move(tree));
    model.log_inv_beta.push_back(std::log(1.0 / beta));
    model.round_avg_loss.push_back(avg_loss);

    double w_sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      w[k] *= std::pow(beta, 1.0 - resid[k] / max_resid);
      w_sum += w[k];
    }
    for (double& wk : w) wk /= w_sum;
  }
  return model;
}

inline std::vector<double> adaboost_predict(const AdaboostModel& model, const Matrix& x) {
  detail::require_width(x, model.n_features, "adaboost_predict");
  std::vector<double> out;
  out.reserve(x.size());
  for (const auto& row : x) {
    if (model.trees.empty()) {
      out.push_back(model.fallback_mean);
      continue;
    }
    std::vector<std::pair<double, double>> vw;
    vw.reserve(model.trees.size());
    for (std::size_t t = 0; t < model.trees.size(); ++t)
      vw.emplace_back(model.trees[t].predict_row(row), model.log_inv_beta[t]);
    out.push_back(weighted_median(std::move(vw)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradient-boosted trees, squared loss, second-order machinery:
//   g = pred - y, h = 1, leaf weight -G/(H+lambda),
//   gain = 1/2 [G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l)] - gamma, accepted
//   only when positive; staged prediction adds eta * tree each round.
// ---------------------------------------------------------------------------

struct GbtOptions {
  std::size_t n_rounds = 100;
  std::size_t max_depth = 4;
  double eta = 0.1;
  double lambda = 1.0;
  double gamma = 0.0;
};

struct GbtModel {
  std::vector<Tree> trees;
  double base = 0.0;  // train-target mean
  double eta = 0.1;
  std::size_t n_features = 0;
};

namespace detail {

class GbtGrower {
 public:
  GbtGrower(const Matrix& x, const std::vector<double>& g, const GbtOptions& opts)
      : x_(x), g_(g), opts_(opts) {}

  Tree grow(std::vector<std::size_t> indices) {
    Tree tree;
    build(tree, std::move(indices), 0);
    return tree;
  }

 private:
  int build(Tree& tree, std::vector<std::size_t> indices, std::size_t depth) {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double g_sum = 0.0;
    for (std::size_t i : indices) g_sum += g_[i];
    const double h_sum = static_cast<double>(indices.size());
    tree.nodes[static_cast<std::size_t>(node_id)].value = -g_sum / (h_sum + opts_.lambda);
    if (depth >= opts_.max_depth || indices.size() < 2) return node_id;

    SplitChoice best = find_best_split(indices, g_sum, h_sum);
    if (best.feature < 0) return node_id;

    std::vector<std::size_t> left, right;
    for (std::size_t i : indices)
      (x_[i][static_cast<std::size_t>(best.feature)] <= best.threshold ? left : right).push_back(i);
    indices.clear();
    indices.shrink_to_fit();
    const int left_id = build(tree, std::move(left), depth + 1);
    const int right_id = build(tree, std::move(right), depth + 1);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left_id;
    node.right = right_id;
    return node_id;
  }

  SplitChoice find_best_split(const std::vector<std::size_t>& indices, double g_total,
                              double h_total) {
    SplitChoice best;
    const double parent_score = g_total * g_total / (h_total + opts_.lambda);
    std::vector<std::pair<double, std::size_t>> sorted(indices.size());
    for (std::size_t f = 0; f < x_[0].size(); ++f) {
      for (std::size_t k = 0; k < indices.size(); ++k)
        sorted[k] = {x_[indices[k]][f], indices[k]};
      std::stable_sort(sorted.begin(), sorted.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      double g_left = 0.0;
      for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
        g_left += g_[sorted[k].second];
        if (sorted[k].first == sorted[k + 1].first) continue;
        const double h_left = static_cast<double>(k + 1);
        const double h_right = h_total - h_left;
        const double g_right = g_total - g_left;
        const double gain = 0.5 * (g_left * g_left / (h_left + opts_.lambda) +
                                   g_right * g_right / (h_right + opts_.lambda) - parent_score) -
                            opts_.gamma;
        if (gain > 0.0 && gain > best.gain) {
          best.feature = static_cast<int>(f);
          best.threshold = sorted[k].first + 0.5 * (sorted[k + 1].first - sorted[k].first);
          best.gain = gain;
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  const std::vector<double>& g_;
  GbtOptions opts_;
};

}  // namespace detail

inline GbtModel gbt_fit(const Matrix& x, const std::vector<double>& y, const GbtOptions& opts = {}) {
  detail::require_fit_data(x, y, "gbt_fit");
  if (opts.n_rounds < 1) throw ConfigError("gbt_fit: n_rounds must be >= 1");
  if (opts.lambda < 0.0 || opts.gamma < 0.0 || !(opts.eta > 0.0 && opts.eta <= 1.0))
    throw ConfigError("gbt_fit: need lambda >= 0, gamma >= 0, 0 < eta <= 1");

  const std::vector<std::size_t> canonical = detail::canonical_order(x, y);
  GbtModel model;
  model.n_features = x[0].size();
  model.eta = opts.eta;
  for (std::size_t k : canonical) model.base += y[k];
  model.base /= static_cast<double>(y.size());

  std::vector<double> pred(y.size(), model.base);
  std::vector<double> grad(y.size());
  for (std::size_t round = 0; round < opts.n_rounds; ++round) {
    for (std::size_t i = 0; i < y.size(); ++i) grad[i] = pred[i] - y[i];
    detail::GbtGrower grower(x, grad, opts);
    Tree tree = grower.grow(canonical);
    for (std::size_t i = 0; i < y.size(); ++i) pred[i] += opts.eta * tree.predict_row(x[i]);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

// Prediction truncated to the first n_rounds trees (full model when nullopt).
inline std::vector<double> gbt_predict(const GbtModel& model, const Matrix& x,
                                       std::optional<std::size_t> n_rounds = std::nullopt) {
  detail::require_width(x, model.n_features, "gbt_predict");
  const std::size_t rounds = std::min(n_rounds.value_or(model.trees.size()), model.trees.size());
  std::vector<double> out;
  out.reserve(x.size());
  for (const auto& row : x) {
    double v = model.base;
    for (std::size_t t = 0; t < rounds; ++t) v += model.eta * model.trees[t].predict_row(row);
    out.push_back(v);
  }
  return out;
}

}  // namespace bgtf
