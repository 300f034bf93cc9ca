#pragma once
// The gradient-integrity suite: every differentiable unit checked against
// central finite differences across multiple seeds. Backs the gradcheck CLI
// command and the acceptance gate.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "bgtf/gradcheck.hpp"
#include "bgtf/model.hpp"
#include "bgtf/train.hpp"

namespace bgtf {

struct GradcheckUnitResult {
  std::string name;
  double max_rel_err = 0.0;
  bool passed = false;
};

inline constexpr double kGradcheckTolerance = 1e-4;

inline const std::vector<std::string> kGradcheckUnits = {
    "matmul", "sigmoid", "tanh", "relu", "softmax", "layer_norm",
    "gru_cell", "bigru_forward", "multi_head_attention", "encoder_layer",
    "hybrid", "transformer"};

namespace detail {

inline Tensor weighted_sum(const Tensor& y, const Tensor& weights, Tape* tape) {
  return sum_all(mul(y, weights, tape), tape);
}

inline double unit_gradcheck(const std::string& unit, std::uint64_t seed,
                             const std::string& sabotage_unit) {
  SeededRng rng(derive_seed(seed, 42));
  GradCheckOptions opts;
  opts.coord_seed = seed;
  if (unit == sabotage_unit)
    opts.corrupt_gradients = [](std::vector<Tensor>& params) { params[0].grad()[0] += 1.0; };

  auto op_check = [&](const std::function<Tensor(Tape*)>& f, std::vector<Tensor> params) {
    return grad_check(f, params, opts);
  };

  if (unit == "matmul") {
    Tensor a = random_uniform({3, 4}, rng, -1.0, 1.0);
    Tensor b = random_uniform({4, 2}, rng, -1.0, 1.0);
    Tensor c = random_uniform({3, 2}, rng, -1.0, 1.0);
    return op_check([&](Tape* t) { return weighted_sum(matmul(a, b, t), c, t); }, {a, b});
  }
  if (unit == "sigmoid" || unit == "tanh" || unit == "relu") {
    const Act kind = unit == "sigmoid" ? Act::Sigmoid : unit == "tanh" ? Act::Tanh : Act::Relu;
    Tensor x = random_uniform({3, 4}, rng, -2.0, 2.0);
    Tensor c = random_uniform({3, 4}, rng, -1.0, 1.0);
    return op_check([&](Tape* t) { return weighted_sum(activation(x, kind, t), c, t); }, {x});
  }
  if (unit == "softmax") {
    Tensor x = random_uniform({3, 5}, rng, -2.0, 2.0);
    Tensor c = random_uniform({3, 5}, rng, -1.0, 1.0);
    return op_check([&](Tape* t) { return weighted_sum(softmax_rows(x, t), c, t); }, {x});
  }
  if (unit == "layer_norm") {
    Tensor x = random_uniform({3, 6}, rng, -2.0, 2.0);
    Tensor gain = random_uniform({6}, rng, 0.5, 1.5);
    Tensor bias = random_uniform({6}, rng, -0.5, 0.5);
    Tensor c = random_uniform({3, 6}, rng, -1.0, 1.0);
    return op_check(
        [&](Tape* t) { return weighted_sum(layer_norm(x, gain, bias, 1e-5, t), c, t); },
        {x, gain, bias});
  }
  if (unit == "gru_cell") {
    GruParams p = GruParams::init(3, 3, rng);
    Tensor x = random_uniform({1, 3}, rng, -1.0, 1.0);
    Tensor h = random_uniform({1, 3}, rng, -0.5, 0.5);
    Tensor c = random_uniform({1, 3}, rng, -1.0, 1.0);
    std::vector<Tensor> params = {x, h};
    for (auto& [name, t] : p.named("gru")) params.push_back(t);
    return op_check([&](Tape* t) { return weighted_sum(gru_cell(x, h, p, t), c, t); }, params);
  }
  if (unit == "bigru_forward") {
    BiGruParams p = BiGruParams::init(2, 3, rng);
    Tensor seq = random_uniform({4, 2}, rng, -1.0, 1.0);
    Tensor c = random_uniform({4, 6}, rng, -1.0, 1.0);
    std::vector<Tensor> params = {seq};
    for (auto& [name, t] : p.named("gru")) params.push_back(t);
    return op_check([&](Tape* t) { return weighted_sum(bigru_forward(seq, p, t), c, t); }, params);
  }
  if (unit == "multi_head_attention") {
    MhaParams p = MhaParams::init(6, 2, rng);
    Tensor x = random_uniform({3, 6}, rng, -1.0, 1.0);
    Tensor c = random_uniform({3, 6}, rng, -1.0, 1.0);
    return op_check(
        [&](Tape* t) {
          return weighted_sum(multi_head_attention(x, p, DropoutSpec::off(), t), c, t);
        },
        {x, p.w_q, p.w_k, p.w_v, p.w_o});
  }
  if (unit == "encoder_layer") {
    EncoderLayerParams p = EncoderLayerParams::init(4, 8, 2, rng);
    Tensor x = random_uniform({3, 4}, rng, -1.0, 1.0);
    Tensor c = random_uniform({3, 4}, rng, -1.0, 1.0);
    std::vector<Tensor> params = {x};
    for (auto& [name, t] : p.named("enc")) params.push_back(t);
    return op_check(
        [&](Tape* t) { return weighted_sum(encoder_layer(x, p, DropoutSpec::off(), t), c, t); },
        params);
  }
  if (unit == "hybrid" || unit == "transformer") {
    const ModelKind kind = unit == "hybrid" ? ModelKind::Hybrid : ModelKind::Transformer;
    const auto records = generate_synthetic(3, derive_seed(seed, 7));
    const FeatureSpec spec = FeatureSpec::canonical(records);
    std::vector<std::size_t> all = {0, 1, 2};
    const Scaler scaler = fit_scaler(records, all);
    std::vector<EncodedRecord> encoded;
    for (const TaskRecord& r : records) encoded.push_back(encode_record(r, spec, scaler));
    ModelParams p = ModelParams::init(kind, HybridConfig::tiny_preset(), spec, rng);
    Tensor targets = random_uniform({3}, rng, -1.0, 1.0);
    std::vector<Tensor> params;
    for (auto& [name, t] : p.named()) params.push_back(t);
    opts.max_coords_per_tensor = 2;  // full models: sampled coordinates
    return grad_check(
        [&](Tape* t) {
          return mse_loss(model_forward(encoded, p, false, nullptr, t), targets, t);
        },
        params, opts);
  }
  throw ConfigError("gradcheck: unknown unit '" + unit + "'");
}

}  // namespace detail

// Runs every unit across n_seeds seeds and reports the worst error per unit.
// sabotage_unit, when non-empty, deliberately corrupts that unit's analytic
// gradient (negative control).
inline std::vector<GradcheckUnitResult> run_gradcheck_suite(std::uint64_t base_seed,
                                                            std::size_t n_seeds = 3,
                                                            const std::string& sabotage_unit = "") {
  std::vector<GradcheckUnitResult> results;
  for (const std::string& unit : kGradcheckUnits) {
    GradcheckUnitResult r;
    r.name = unit;
    for (std::size_t s = 0; s < n_seeds; ++s)
      r.max_rel_err = std::max(r.max_rel_err, detail::unit_gradcheck(unit, base_seed + s, sabotage_unit));
    r.passed = r.max_rel_err < kGradcheckTolerance;
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace bgtf
