#pragma once
// Scaled dot-product attention, multi-head self-attention, position-wise
// feed-forward, post-norm encoder layers, and sinusoidal positional encoding.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "bgtf/ops.hpp"
#include "bgtf/tensor.hpp"

namespace bgtf {

inline constexpr double kLayerNormEps = 1e-5;

struct MhaParams {
  Tensor w_q, w_k, w_v, w_o;  // [d_model x d_model]
  std::size_t heads = 1;

  std::size_t d_model() const { return w_q.rows(); }

  static MhaParams init(std::size_t d_model, std::size_t heads, SeededRng& rng) {
    if (heads == 0 || d_model % heads != 0)
      throw ConfigError("multi_head_attention: d_model " + std::to_string(d_model) +
                        " not divisible by head count " + std::to_string(heads));
    MhaParams p;
    p.w_q = glorot_uniform(d_model, d_model, rng);
    p.w_k = glorot_uniform(d_model, d_model, rng);
    p.w_v = glorot_uniform(d_model, d_model, rng);
    p.w_o = glorot_uniform(d_model, d_model, rng);
    p.heads = heads;
    return p;
  }

  void validate() const {
    const std::size_t d = d_model();
    for (const Tensor* t : {&w_q, &w_k, &w_v, &w_o})
      if (t->shape() != Shape{d, d})
        throw ShapeError("MhaParams: projection is " + shape_str(t->shape()) + ", expected " +
                         shape_str({d, d}));
    if (heads == 0 || d % heads != 0)
      throw ConfigError("multi_head_attention: d_model " + std::to_string(d) +
                        " not divisible by head count " + std::to_string(heads));
  }

  std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const {
    return {{prefix + ".w_q", w_q}, {prefix + ".w_k", w_k}, {prefix + ".w_v", w_v},
            {prefix + ".w_o", w_o}};
  }
};

struct EncoderLayerParams {
  MhaParams mha;
  Tensor ffn_w1, ffn_b1;  // [d_model x d_ff], [d_ff]
  Tensor ffn_w2, ffn_b2;  // [d_ff x d_model], [d_model]
  Tensor ln1_gain, ln1_bias, ln2_gain, ln2_bias;  // [d_model]

  std::size_t d_model() const { return mha.d_model(); }
  std::size_t d_ff() const { return ffn_w1.cols(); }

  static EncoderLayerParams init(std::size_t d_model, std::size_t d_ff, std::size_t heads,
                                 SeededRng& rng) {
    EncoderLayerParams p;
    p.mha = MhaParams::init(d_model, heads, rng);
    p.ffn_w1 = glorot_uniform(d_model, d_ff, rng);
    p.ffn_b1 = Tensor::zeros({d_ff});
    p.ffn_w2 = glorot_uniform(d_ff, d_model, rng);
    p.ffn_b2 = Tensor::zeros({d_model});
    p.ln1_gain = Tensor::full({d_model}, 1.0);
    p.ln1_bias = Tensor::zeros({d_model});
    p.ln2_gain = Tensor::full({d_model}, 1.0);
    p.ln2_bias = Tensor::zeros({d_model});
    return p;
  }

  std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const {
    auto out = mha.named(prefix + ".mha");
    out.emplace_back(prefix + ".ffn.w1", ffn_w1);
    out.emplace_back(prefix + ".ffn.b1", ffn_b1);
    out.emplace_back(prefix + ".ffn.w2", ffn_w2);
    out.emplace_back(prefix + ".ffn.b2", ffn_b2);
    out.emplace_back(prefix + ".ln1.gain", ln1_gain);
    out.emplace_back(prefix + ".ln1.bias", ln1_bias);
    out.emplace_back(prefix + ".ln2.gain", ln2_gain);
    out.emplace_back(prefix + ".ln2.bias", ln2_bias);
    return out;
  }
};

// softmax(Q K^T / sqrt(d_k)) V. No masking anywhere: this is an encoder-only
// regressor over fixed-length feature sequences.
inline Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                   Tape* tape = nullptr) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || q.rows() != k.rows() ||
      q.rows() != v.rows())
    throw ShapeError("scaled_dot_attention: row counts disagree: " + shape_str(q.shape()) + ", " +
                     shape_str(k.shape()) + ", " + shape_str(v.shape()));
  if (q.cols() != k.cols())
    throw ShapeError("scaled_dot_attention: query/key widths disagree: " + shape_str(q.shape()) +
                     " vs " + shape_str(k.shape()));
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Tensor scores = affine(matmul(q, transpose(k, tape), tape), inv_sqrt_dk, 0.0, tape);
  Tensor attn = softmax_rows(scores, tape);
  return matmul(attn, v, tape);
}

// Projected Q, K, V split into `heads` column blocks of width d_k, attended
// per head, concatenated, and mapped back through w_o. Dropout applies to the
// sublayer output (never to attention probabilities).
inline Tensor multi_head_attention(const Tensor& x, const MhaParams& p,
                                   const DropoutSpec& drop = DropoutSpec::off(),
                                   Tape* tape = nullptr) {
  p.validate();
  if (x.rank() != 2 || x.cols() != p.d_model())
    throw ShapeError("multi_head_attention: input " + shape_str(x.shape()) +
                     " does not match d_model " + std::to_string(p.d_model()));
  const std::size_t d_k = p.d_model() / p.heads;
  Tensor q = matmul(x, p.w_q, tape);
  Tensor k = matmul(x, p.w_k, tape);
  Tensor v = matmul(x, p.w_v, tape);
  std::vector<Tensor> head_outputs;
  head_outputs.reserve(p.heads);
  for (std::size_t a = 0; a < p.heads; ++a) {
    Tensor qa = slice_cols(q, a * d_k, d_k, tape);
    Tensor ka = slice_cols(k, a * d_k, d_k, tape);
    Tensor va = slice_cols(v, a * d_k, d_k, tape);
    head_outputs.push_back(scaled_dot_attention(qa, ka, va, tape));
  }
  Tensor merged = matmul(concat_cols(head_outputs, tape), p.w_o, tape);
  return dropout(merged, drop, tape);
}

// Post-norm arrangement:
//   y1 = LN(x + dropout(MHA(x)))
//   y  = LN(y1 + dropout(FFN(y1))),  FFN(y) = relu(y W1 + b1) W2 + b2
inline Tensor encoder_layer(const Tensor& x, const EncoderLayerParams& p,
                            const DropoutSpec& drop = DropoutSpec::off(), Tape* tape = nullptr) {
  Tensor attn = multi_head_attention(x, p.mha, drop, tape);
  Tensor y1 = layer_norm(add(x, attn, tape), p.ln1_gain, p.ln1_bias, kLayerNormEps, tape);
  Tensor hidden = activation(add_row(matmul(y1, p.ffn_w1, tape), p.ffn_b1, tape), Act::Relu, tape);
  Tensor ffn = add_row(matmul(hidden, p.ffn_w2, tape), p.ffn_b2, tape);
  Tensor ffn_dropped = dropout(ffn, drop, tape);
  return layer_norm(add(y1, ffn_dropped, tape), p.ln2_gain, p.ln2_bias, kLayerNormEps, tape);
}

inline Tensor encoder_stack(const Tensor& x, const std::vector<EncoderLayerParams>& layers,
                            const DropoutSpec& drop = DropoutSpec::off(), Tape* tape = nullptr) {
  if (layers.empty()) throw ConfigError("encoder_stack: need at least one layer");
  Tensor out = x;
  for (const EncoderLayerParams& layer : layers) out = encoder_layer(out, layer, drop, tape);
  return out;
}

// PE[t, 2i] = sin(t / 10000^(2i/d_model)), PE[t, 2i+1] = cos(t / 10000^(2i/d_model)).
// Used only by the plain-Transformer baseline; the hybrid path never adds it.
inline Tensor sinusoidal_pe(std::size_t t_len, std::size_t d_model) {
  if (d_model % 2 != 0)
    throw ConfigError("sinusoidal_pe: d_model must be even, got " + std::to_string(d_model));
  Tensor pe = Tensor::zeros({t_len, d_model});
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t i = 0; i < d_model / 2; ++i) {
      const double rate = std::pow(10000.0, 2.0 * static_cast<double>(i) / static_cast<double>(d_model));
      pe.at(t, 2 * i) = std::sin(static_cast<double>(t) / rate);
      pe.at(t, 2 * i + 1) = std::cos(static_cast<double>(t) / rate);
    }
  return pe;
}

}  // namespace bgtf
