#pragma once
// MSE loss, Adam, and the deterministic mini-batch training loop with
// best-validation checkpointing.

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bgtf/model.hpp"
#include "bgtf/ops.hpp"

namespace bgtf {

// splitmix64 step; used to derive independent sub-streams (dropout, per-epoch
// shuffles) from one user-facing seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// (1/B) sum (pred_i - target_i)^2. Gradient w.r.t. pred is 2(pred-target)/B.
inline Tensor mse_loss(const Tensor& pred, const Tensor& target, Tape* tape = nullptr) {
  if (pred.size() == 0 || target.size() == 0) throw DataError("mse_loss: empty batch");
  if (pred.size() != target.size())
    throw ShapeError("mse_loss: lengths disagree: " + shape_str(pred.shape()) + " vs " +
                     shape_str(target.shape()));
  const std::size_t b = pred.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const double d = pred.at(i) - target.at(i);
    sum += d * d;
  }
  Tensor out = Tensor::scalar(sum / static_cast<double>(b));
  if (tape) {
    detail::prepare(tape, {pred, target, out});
    tape->record([pred, target, out, b]() {
      const double d = out.grad()[0];
      const double scale = 2.0 / static_cast<double>(b);
      for (std::size_t i = 0; i < b; ++i) {
        const double r = scale * (pred.at(i) - target.at(i)) * d;
        pred.grad()[i] += r;
        target.grad()[i] -= r;
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;
  std::vector<std::vector<double>> m, v;  // aligned with the parameter list

  static AdamState init(const std::vector<std::pair<std::string, Tensor>>& params,
                        double learning_rate) {
    AdamState s;
    s.learning_rate = learning_rate;
    for (const auto& [name, p] : params) {
      s.m.emplace_back(p.size(), 0.0);
      s.v.emplace_back(p.size(), 0.0);
    }
    return s;
  }
};

inline void adam_step(const std::vector<std::pair<std::string, Tensor>>& params, AdamState& s) {
  if (params.size() != s.m.size())
    throw TrainError("adam_step: state tracks " + std::to_string(s.m.size()) +
                     " parameters, got " + std::to_string(params.size()));
  ++s.t;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& [name, p] = params[k];
    const std::vector<double>& g = p.grad();
    std::vector<double>& m = s.m[k];
    std::vector<double>& v = s.v[k];
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i]))
        throw TrainError("adam_step: non-finite gradient in parameter '" + name + "'");
      m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
      v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p.at(i) -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.eps);
    }
  }
}

// Global-norm gradient clipping; returns the pre-clip norm.
inline double clip_grad_norm(const std::vector<std::pair<std::string, Tensor>>& params,
                             double max_norm) {
  double sq = 0.0;
  for (const auto& [name, p] : params)
    for (double g : p.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (const auto& [name, p] : params)
      for (double& g : p.grad()) g *= scale;
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  bool shuffle = true;
  std::optional<std::size_t> early_stop_patience;
  std::optional<double> clip_max_norm;

  void validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
  }
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;  // NaN where there is no validation split
  std::vector<double> seconds;   // measured wall time per epoch
  std::size_t best_epoch = 0;    // 0-based; only meaningful with validation
};

struct NeuralDataset {
  std::vector<EncodedRecord> records;
  std::vector<double> targets_std;  // standardized target values

  std::size_t size() const { return records.size(); }
};

// The visit order for one epoch: a pure function of (seed, epoch).
inline std::vector<std::size_t> epoch_shuffle_order(std::size_t n, std::uint64_t seed,
                                                    std::size_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  SeededRng rng(derive_seed(seed, 1000 + epoch));
  rng.shuffle(order);
  return order;
}

// Shuffled mini-batch epochs; the visit order is a pure function of (seed,
// epoch). With a validation set the returned parameters are those of the
// best-validation epoch, otherwise the final ones.
inline TrainHistory train_neural(ModelParams& params, const NeuralDataset& train,
                                 const NeuralDataset& val, const TrainConfig& cfg) {
  cfg.validate();
  if (train.size() == 0) throw DataError("train: empty train split");
  if (train.records.size() != train.targets_std.size())
    throw DataError("train: records/targets length mismatch");

  auto named = params.named();
  AdamState adam = AdamState::init(named, cfg.learning_rate);
  SeededRng dropout_rng(derive_seed(cfg.seed, 1));

  TrainHistory history;
  double best_val = std::numeric_limits<double>::infinity();
  ModelParams best_params;
  bool have_best = false;
  std::size_t epochs_since_best = 0;

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.shuffle) order = epoch_shuffle_order(train.size(), cfg.seed, epoch);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < train.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, train.size());
      std::vector<EncodedRecord> batch;
      std::vector<double> batch_targets;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train.records[order[i]]);
        batch_targets.push_back(train.targets_std[order[i]]);
      }
      params.zero_grads();
      Tape tape;
      Tensor preds = model_forward(batch, params, /*training=*/true, &dropout_rng, &tape);
      Tensor loss = mse_loss(preds, Tensor::vec(batch_targets), &tape);
      if (!std::isfinite(loss.item()))
        throw TrainError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(start / cfg.batch_size));
      tape.backward(loss);
      if (cfg.clip_max_norm) clip_grad_norm(named, *cfg.clip_max_norm);
      adam_step(named, adam);
      loss_sum += loss.item() * static_cast<double>(end - start);
    }
    history.train_loss.push_back(loss_sum / static_cast<double>(train.size()));

    double vloss = std::numeric_limits<double>::quiet_NaN();
    if (val.size() > 0) {
      Tensor preds = model_forward(val.records, params, /*training=*/false, nullptr, nullptr);
      vloss = mse_loss(preds, Tensor::vec(val.targets_std)).item();
      if (vloss < best_val) {
        best_val = vloss;
        best_params = params.clone();
        have_best = true;
        history.best_epoch = epoch;
        epochs_since_best = 0;
      } else {
        ++epochs_since_best;
      }
    }
    history.val_loss.push_back(vloss);
    history.seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

    if (val.size() > 0 && cfg.early_stop_patience && epochs_since_best > *cfg.early_stop_patience)
      break;
  }

  if (have_best) params.copy_data_from(best_params);
  return history;
}

}  // namespace bgtf
