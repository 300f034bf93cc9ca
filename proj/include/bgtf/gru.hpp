#pragma once
// GRU cell, directional sequence evaluation, and the bidirectional layer that
// preprocesses token sequences ahead of the encoder stack.

#include <string>
#include <utility>
#include <vector>

#include "bgtf/ops.hpp"
#include "bgtf/tensor.hpp"

namespace bgtf {

// Row-vector convention throughout: hidden = x_row * W + h_row * U + b, with
// W [input_dim x hidden], U [hidden x hidden], b [hidden].
struct GruParams {
  Tensor w_z, w_r, w_h;
  Tensor u_z, u_r, u_h;
  Tensor b_z, b_r, b_h;

  std::size_t input_dim() const { return w_z.rows(); }
  std::size_t hidden_dim() const { return w_z.cols(); }

  // Glorot-uniform matrices, zero biases.
  static GruParams init(std::size_t input_dim, std::size_t hidden, SeededRng& rng) {
    GruParams p;
    p.w_z = glorot_uniform(input_dim, hidden, rng);
    p.w_r = glorot_uniform(input_dim, hidden, rng);
    p.w_h = glorot_uniform(input_dim, hidden, rng);
    p.u_z = glorot_uniform(hidden, hidden, rng);
    p.u_r = glorot_uniform(hidden, hidden, rng);
    p.u_h = glorot_uniform(hidden, hidden, rng);
    p.b_z = Tensor::zeros({hidden});
    p.b_r = Tensor::zeros({hidden});
    p.b_h = Tensor::zeros({hidden});
    return p;
  }

  static GruParams zeros(std::size_t input_dim, std::size_t hidden) {
    GruParams p;
    p.w_z = Tensor::zeros({input_dim, hidden});
    p.w_r = Tensor::zeros({input_dim, hidden});
    p.w_h = Tensor::zeros({input_dim, hidden});
    p.u_z = Tensor::zeros({hidden, hidden});
    p.u_r = Tensor::zeros({hidden, hidden});
    p.u_h = Tensor::zeros({hidden, hidden});
    p.b_z = Tensor::zeros({hidden});
    p.b_r = Tensor::zeros({hidden});
    p.b_h = Tensor::zeros({hidden});
    return p;
  }

  void validate() const {
    const std::size_t d = input_dim(), h = hidden_dim();
    auto expect = [](const Tensor& t, const Shape& s, const char* name) {
      if (t.shape() != s)
        throw ShapeError(std::string("GruParams: ") + name + " is " + shape_str(t.shape()) +
                         ", expected " + shape_str(s));
      if (!t.all_finite()) throw ShapeError(std::string("GruParams: ") + name + " has non-finite entries");
    };
    expect(w_z, {d, h}, "w_z");
    expect(w_r, {d, h}, "w_r");
    expect(w_h, {d, h}, "w_h");
    expect(u_z, {h, h}, "u_z");
    expect(u_r, {h, h}, "u_r");
    expect(u_h, {h, h}, "u_h");
    expect(b_z, {h}, "b_z");
    expect(b_r, {h}, "b_r");
    expect(b_h, {h}, "b_h");
  }

  std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const {
    return {{prefix + ".w_z", w_z}, {prefix + ".w_r", w_r}, {prefix + ".w_h", w_h},
            {prefix + ".u_z", u_z}, {prefix + ".u_r", u_r}, {prefix + ".u_h", u_h},
            {prefix + ".b_z", b_z}, {prefix + ".b_r", b_r}, {prefix + ".b_h", b_h}};
  }
};

struct BiGruParams {
  GruParams forward;
  GruParams backward;

  static BiGruParams init(std::size_t input_dim, std::size_t hidden, SeededRng& rng) {
    BiGruParams p;
    p.forward = GruParams::init(input_dim, hidden, rng);
    p.backward = GruParams::init(input_dim, hidden, rng);
    return p;
  }

  void validate() const {
    forward.validate();
    backward.validate();
    if (forward.input_dim() != backward.input_dim() || forward.hidden_dim() != backward.hidden_dim())
      throw ShapeError("BiGruParams: forward and backward dimensions disagree");
  }

  std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const {
    auto out = forward.named(prefix + ".fwd");
    auto b = backward.named(prefix + ".bwd");
    out.insert(out.end(), b.begin(), b.end());
    return out;
  }
};

// Intermediate gate values, exposed for testing the gate-bound properties.
struct GruCellTrace {
  Tensor z, r, candidate, h;
};

// One GRU step:
//   z = sigmoid(x W_z + h U_z + b_z)
//   r = sigmoid(x W_r + h U_r + b_r)
//   c = tanh(x W_h + (r . h) U_h + b_h)
//   h' = (1 - z) . h + z . c
inline GruCellTrace gru_cell_traced(const Tensor& x_t, const Tensor& h_prev, const GruParams& p,
                                    Tape* tape = nullptr) {
  if (x_t.rows() != 1 || x_t.cols() != p.input_dim())
    throw ShapeError("gru_cell: input " + shape_str(x_t.shape()) + " does not match input_dim " +
                     std::to_string(p.input_dim()));
  if (h_prev.rows() != 1 || h_prev.cols() != p.hidden_dim())
    throw ShapeError("gru_cell: hidden state " + shape_str(h_prev.shape()) +
                     " does not match hidden_dim " + std::to_string(p.hidden_dim()));
  GruCellTrace tr;
  tr.z = activation(add_row(add(matmul(x_t, p.w_z, tape), matmul(h_prev, p.u_z, tape), tape), p.b_z, tape),
                    Act::Sigmoid, tape);
  tr.r = activation(add_row(add(matmul(x_t, p.w_r, tape), matmul(h_prev, p.u_r, tape), tape), p.b_r, tape),
                    Act::Sigmoid, tape);
  Tensor gated = mul(tr.r, h_prev, tape);
  tr.candidate = activation(
      add_row(add(matmul(x_t, p.w_h, tape), matmul(gated, p.u_h, tape), tape), p.b_h, tape),
      Act::Tanh, tape);
  tr.h = add(mul(affine(tr.z, -1.0, 1.0, tape), h_prev, tape), mul(tr.z, tr.candidate, tape), tape);
  return tr;
}

inline Tensor gru_cell(const Tensor& x_t, const Tensor& h_prev, const GruParams& p,
                       Tape* tape = nullptr) {
  return gru_cell_traced(x_t, h_prev, p, tape).h;
}

// Runs the cell over a [T x D] sequence with h_0 = 0. Output row t always
// corresponds to input position t: in reversed mode the traversal goes
// end-to-start and the rows are re-aligned.
inline Tensor gru_sequence(const Tensor& seq, const GruParams& p, bool reversed,
                           Tape* tape = nullptr) {
  if (seq.rank() != 2 || seq.rows() < 1)
    throw ShapeError("gru_sequence: need a non-empty [TxD] sequence, got " + shape_str(seq.shape()));
  if (seq.cols() != p.input_dim())
    throw ShapeError("gru_sequence: sequence width " + std::to_string(seq.cols()) +
                     " does not match input_dim " + std::to_string(p.input_dim()));
  const std::size_t t_len = seq.rows();
  std::vector<Tensor> out_rows(t_len);
  Tensor h = Tensor::zeros({1, p.hidden_dim()});
  for (std::size_t step = 0; step < t_len; ++step) {
    const std::size_t pos = reversed ? t_len - 1 - step : step;
    Tensor x_t = slice_row(seq, pos, tape);
    h = gru_cell(x_t, h, p, tape);
    out_rows[pos] = h;
  }
  return stack_rows(out_rows, tape);
}

// Row t of the result is concat(forward_state_t, backward_state_t): [T x 2H].
inline Tensor bigru_forward(const Tensor& seq, const BiGruParams& p, Tape* tape = nullptr) {
  p.validate();
  Tensor fwd = gru_sequence(seq, p.forward, false, tape);
  Tensor bwd = gru_sequence(seq, p.backward, true, tape);
  return concat_cols({fwd, bwd}, tape);
}

}  // namespace bgtf
