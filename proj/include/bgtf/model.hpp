#pragma once
// The sequence regressors: per-feature tokenization, the BiGRU-fronted
// encoder model (no positional encoding), and the plain-Transformer baseline
// (sinusoidal positional encoding, no BiGRU). Both end in mean pooling and a
// scalar head; predictions are in standardized target units.

#include <string>
#include <utility>
#include <vector>

#include "bgtf/attention.hpp"
#include "bgtf/features.hpp"
#include "bgtf/gru.hpp"
#include "bgtf/ops.hpp"

namespace bgtf {

enum class ModelKind { Hybrid, Transformer, Cart, RandomForest, Adaboost, Gbt };

inline std::string model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Hybrid: return "hybrid";
    case ModelKind::Transformer: return "transformer";
    case ModelKind::Cart: return "cart";
    case ModelKind::RandomForest: return "rf";
    case ModelKind::Adaboost: return "adaboost";
    case ModelKind::Gbt: return "gbt";
  }
  return "unknown";
}

inline ModelKind model_kind_from_name(const std::string& name) {
  for (ModelKind k : {ModelKind::Hybrid, ModelKind::Transformer, ModelKind::Cart,
                      ModelKind::RandomForest, ModelKind::Adaboost, ModelKind::Gbt})
    if (model_kind_name(k) == name) return k;
  throw ConfigError("unknown model kind '" + name + "'");
}

struct HybridConfig {
  std::size_t n_layers = 6;
  std::size_t d_model = 512;
  std::size_t heads = 8;
  std::size_t gru_hidden = 256;  // per direction
  double dropout = 0.1;
  std::size_t d_ff = 2048;  // 4 x d_model
  std::string preset = "paper";

  static HybridConfig paper_preset() { return {}; }

  static HybridConfig tiny_preset() {
    HybridConfig c;
    c.n_layers = 2;
    c.d_model = 32;
    c.heads = 2;
    c.gru_hidden = 16;
    c.dropout = 0.1;
    c.d_ff = 128;
    c.preset = "tiny";
    return c;
  }

  static HybridConfig from_preset(const std::string& name) {
    if (name == "paper") return paper_preset();
    if (name == "tiny") return tiny_preset();
    throw ConfigError("unknown preset '" + name + "' (expected 'paper' or 'tiny')");
  }

  // The BiGRU concatenation feeds the encoder directly, with no projection
  // layer in between, so 2 * gru_hidden must equal d_model on the hybrid path.
  void validate(ModelKind kind) const {
    if (n_layers == 0) throw ConfigError("config: n_layers must be >= 1");
    if (heads == 0 || d_model % heads != 0)
      throw ConfigError("config: d_model " + std::to_string(d_model) +
                        " not divisible by heads " + std::to_string(heads));
    if (d_ff == 0) throw ConfigError("config: d_ff must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("config: dropout must lie in [0, 1)");
    if (kind == ModelKind::Hybrid && 2 * gru_hidden != d_model)
      throw ConfigError("config: 2 * gru_hidden (" + std::to_string(2 * gru_hidden) +
                        ") must equal d_model (" + std::to_string(d_model) + ")");
    if (kind == ModelKind::Transformer && d_model % 2 != 0)
      throw ConfigError("config: positional encoding needs an even d_model");
  }

  bool operator==(const HybridConfig&) const = default;
};

// Named parameter collection for both neural models. Token width is
// gru_hidden on the hybrid path and d_model on the baseline path.
struct ModelParams {
  ModelKind kind = ModelKind::Hybrid;
  HybridConfig cfg;
  FeatureSpec spec;

  std::vector<Tensor> numeric_scale;  // per numeric feature, [1 x D_in]
  std::vector<Tensor> numeric_shift;  // per numeric feature, [1 x D_in]
  std::vector<Tensor> cat_tables;     // per categorical feature, [V x D_in]
  BiGruParams gru;                    // hybrid only
  std::vector<EncoderLayerParams> layers;
  Tensor head_w;  // [d_model x 1]
  Tensor head_b;  // [1]

  std::size_t token_width() const {
    return kind == ModelKind::Hybrid ? cfg.gru_hidden : cfg.d_model;
  }

  static ModelParams init(ModelKind kind, const HybridConfig& cfg, const FeatureSpec& spec,
                          SeededRng& rng) {
    if (kind != ModelKind::Hybrid && kind != ModelKind::Transformer)
      throw ConfigError("ModelParams::init: not a neural model kind");
    cfg.validate(kind);
    ModelParams p;
    p.kind = kind;
    p.cfg = cfg;
    p.spec = spec;
    const std::size_t d_in = p.token_width();
    for (const FeatureDesc& f : spec.features) {
      if (f.kind == FeatureKind::Numeric) {
        p.numeric_scale.push_back(random_normal({1, d_in}, rng, 0.0, 1.0 / std::sqrt(double(d_in))));
        p.numeric_shift.push_back(Tensor::zeros({1, d_in}));
      } else {
        const double limit = std::sqrt(6.0 / static_cast<double>(f.vocab.size() + d_in));
        p.cat_tables.push_back(random_uniform({f.vocab.size(), d_in}, rng, -limit, limit));
      }
    }
    if (kind == ModelKind::Hybrid) p.gru = BiGruParams::init(d_in, cfg.gru_hidden, rng);
    for (std::size_t l = 0; l < cfg.n_layers; ++l)
      p.layers.push_back(EncoderLayerParams::init(cfg.d_model, cfg.d_ff, cfg.heads, rng));
    p.head_w = glorot_uniform(cfg.d_model, 1, rng);
    p.head_b = Tensor::zeros({1});
    return p;
  }

  std::vector<std::pair<std::string, Tensor>> named() const {
    std::vector<std::pair<std::string, Tensor>> out;
    std::size_t num_i = 0, cat_i = 0;
    for (const FeatureDesc& f : spec.features) {
      if (f.kind == FeatureKind::Numeric) {
        out.emplace_back("embed." + f.name + ".scale", numeric_scale[num_i]);
        out.emplace_back("embed." + f.name + ".shift", numeric_shift[num_i]);
        ++num_i;
      } else {
        out.emplace_back("embed." + f.name + ".table", cat_tables[cat_i]);
        ++cat_i;
      }
    }
    if (kind == ModelKind::Hybrid) {
      auto g = gru.named("gru");
      out.insert(out.end(), g.begin(), g.end());
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto e = layers[l].named("enc." + std::to_string(l));
      out.insert(out.end(), e.begin(), e.end());
    }
    out.emplace_back("head.w", head_w);
    out.emplace_back("head.b", head_b);
    return out;
  }

  std::size_t count_parameters() const {
    std::size_t n = 0;
    for (const auto& [name, t] : named()) n += t.size();
    return n;
  }

  // Deep copy: a copied ModelParams still aliases the same tensor storage, so
  // snapshots (best-validation checkpointing) must clone every tensor.
  ModelParams clone() const {
    ModelParams copy = *this;
    for (auto& ref : copy.all_tensors()) ref.get() = ref.get().clone();
    return copy;
  }

  void copy_data_from(const ModelParams& other) {
    auto mine = named();
    auto theirs = other.named();
    if (mine.size() != theirs.size()) throw SchemaError("copy_data_from: parameter sets disagree");
    for (std::size_t i = 0; i < mine.size(); ++i) mine[i].second.copy_data_from(theirs[i].second);
  }

  void zero_grads() const {
    for (auto& [name, t] : named()) {
      t.ensure_grad();
      t.zero_grad();
    }
  }

 private:
  // Mutable access to every tensor field, for clone().
  std::vector<std::reference_wrapper<Tensor>> all_tensors() {
    std::vector<std::reference_wrapper<Tensor>> out;
    for (Tensor& t : numeric_scale) out.push_back(t);
    for (Tensor& t : numeric_shift) out.push_back(t);
    for (Tensor& t : cat_tables) out.push_back(t);
    if (kind == ModelKind::Hybrid) {
      for (Tensor* t : {&gru.forward.w_z, &gru.forward.w_r, &gru.forward.w_h, &gru.forward.u_z,
                        &gru.forward.u_r, &gru.forward.u_h, &gru.forward.b_z, &gru.forward.b_r,
                        &gru.forward.b_h, &gru.backward.w_z, &gru.backward.w_r, &gru.backward.w_h,
                        &gru.backward.u_z, &gru.backward.u_r, &gru.backward.u_h, &gru.backward.b_z,
                        &gru.backward.b_r, &gru.backward.b_h})
        out.push_back(*t);
    }
    for (EncoderLayerParams& l : layers)
      for (Tensor* t : {&l.mha.w_q, &l.mha.w_k, &l.mha.w_v, &l.mha.w_o, &l.ffn_w1, &l.ffn_b1,
                        &l.ffn_w2, &l.ffn_b2, &l.ln1_gain, &l.ln1_bias, &l.ln2_gain, &l.ln2_bias})
        out.push_back(*t);
    out.push_back(head_w);
    out.push_back(head_b);
    return out;
  }
};

// One token per feature: numeric features get a learned affine embedding
// z * scale + shift, categorical features a table lookup. Result is [F x D_in].
inline Tensor embed_record(const EncodedRecord& rec, const ModelParams& p, Tape* tape = nullptr) {
  if (rec.numeric_z.size() != p.spec.count() || rec.code.size() != p.spec.count())
    throw SchemaError("embed_record: encoded record does not match the feature spec");
  std::vector<Tensor> tokens;
  tokens.reserve(p.spec.count());
  std::size_t num_i = 0, cat_i = 0;
  for (std::size_t f = 0; f < p.spec.count(); ++f) {
    if (p.spec.features[f].kind == FeatureKind::Numeric) {
      tokens.push_back(add(affine(p.numeric_scale[num_i], rec.numeric_z[f], 0.0, tape),
                           p.numeric_shift[num_i], tape));
      ++num_i;
    } else {
      const Tensor& table = p.cat_tables[cat_i];
      if (rec.code[f] >= table.rows())
        throw VocabError("feature '" + p.spec.features[f].name + "': code " +
                         std::to_string(rec.code[f]) + " out of vocabulary of size " +
                         std::to_string(table.rows()));
      tokens.push_back(slice_row(table, rec.code[f], tape));
      ++cat_i;
    }
  }
  return stack_rows(tokens, tape);
}

namespace detail {

inline Tensor pooled_head(const Tensor& encoded, const ModelParams& p, Tape* tape) {
  Tensor pooled = mean_rows(encoded, tape);
  return add_row(matmul(pooled, p.head_w, tape), p.head_b, tape);  // [1 x 1]
}

}  // namespace detail

// Hybrid path: embed -> BiGRU -> encoder stack (no positional encoding) ->
// mean pool -> scalar head. Predictions are standardized target values.
inline Tensor hybrid_forward(const std::vector<EncodedRecord>& batch, const ModelParams& p,
                             bool training = false, SeededRng* rng = nullptr,
                             Tape* tape = nullptr) {
  if (p.kind != ModelKind::Hybrid) throw ConfigError("hybrid_forward: params are not a hybrid model");
  p.cfg.validate(p.kind);
  if (batch.empty()) throw DataError("hybrid_forward: empty batch");
  DropoutSpec drop{p.cfg.dropout, training, rng};
  std::vector<Tensor> preds;
  preds.reserve(batch.size());
  for (const EncodedRecord& rec : batch) {
    Tensor tokens = embed_record(rec, p, tape);
    Tensor fused = bigru_forward(tokens, p.gru, tape);  // [F x d_model]
    Tensor encoded = encoder_stack(fused, p.layers, drop, tape);
    preds.push_back(detail::pooled_head(encoded, p, tape));
  }
  return stack_scalars(preds, tape);
}

// Baseline path: embed at width d_model, add sinusoidal positional encoding,
// then the identical encoder/pool/head pipeline with the BiGRU removed.
inline Tensor baseline_transformer_forward(const std::vector<EncodedRecord>& batch,
                                           const ModelParams& p, bool training = false,
                                           SeededRng* rng = nullptr, Tape* tape = nullptr) {
  if (p.kind != ModelKind::Transformer)
    throw ConfigError("baseline_transformer_forward: params are not a baseline transformer");
  p.cfg.validate(p.kind);
  if (batch.empty()) throw DataError("baseline_transformer_forward: empty batch");
  DropoutSpec drop{p.cfg.dropout, training, rng};
  Tensor pe = sinusoidal_pe(p.spec.count(), p.cfg.d_model);
  std::vector<Tensor> preds;
  preds.reserve(batch.size());
  for (const EncodedRecord& rec : batch) {
    Tensor tokens = add(embed_record(rec, p, tape), pe, tape);
    Tensor encoded = encoder_stack(tokens, p.layers, drop, tape);
    preds.push_back(detail::pooled_head(encoded, p, tape));
  }
  return stack_scalars(preds, tape);
}

inline Tensor model_forward(const std::vector<EncodedRecord>& batch, const ModelParams& p,
                            bool training = false, SeededRng* rng = nullptr, Tape* tape = nullptr) {
  return p.kind == ModelKind::Hybrid ? hybrid_forward(batch, p, training, rng, tape)
                                     : baseline_transformer_forward(batch, p, training, rng, tape);
}

}  // namespace bgtf
