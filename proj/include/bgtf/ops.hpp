#pragma once
// Differentiable tensor operations. Every op computes its forward result into
// a fresh tensor and, when a tape is supplied, records one backward step that
// adds into the operands' gradient buffers.

#include <cmath>
#include <vector>

#include "bgtf/tensor.hpp"

namespace bgtf {

enum class Act { Sigmoid, Tanh, Relu };

namespace detail {

inline void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
}

inline void prepare(Tape* tape, std::initializer_list<Tensor> tensors) {
  if (!tape) return;
  for (Tensor t : tensors) t.ensure_grad();
}

}  // namespace detail

// ---- matmul --------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape = nullptr) {
  detail::require_rank2(a, "matmul");
  detail::require_rank2(b, "matmul");
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions disagree: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = Tensor::zeros({m, n});
  {
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    double* od = out.data().data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = ad[i * k + p];
        const double* brow = bd + p * n;
        double* orow = od + i * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
      }
  }
  if (tape) {
    detail::prepare(tape, {a, b, out});
    tape->record([a, b, out, m, k, n]() {
      const double* dc = out.grad().data();
      const double* ad = a.data().data();
      const double* bd = b.data().data();
      double* da = a.grad().data();
      double* db = b.grad().data();
      // dA += dC * B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double d = dc[i * n + j];
          const double* brow = bd + 0;
          for (std::size_t p = 0; p < k; ++p) da[i * k + p] += d * brow[p * n + j];
        }
      // dB += A^T * dC
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t i = 0; i < m; ++i) {
          const double aip = ad[i * k + p];
          const double* dcrow = dc + i * n;
          double* dbrow = db + p * n;
          for (std::size_t j = 0; j < n; ++j) dbrow[j] += aip * dcrow[j];
        }
    });
  }
  return out;
}

// ---- elementwise ----------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b, Tape* tape = nullptr) {
  if (a.shape() != b.shape())
    throw ShapeError("add: shapes disagree: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor out = a.clone();
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) += b.at(i);
  if (tape) {
    detail::prepare(tape, {a, b, out});
    tape->record([a, b, out]() {
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double d = out.grad()[i];
        a.grad()[i] += d;
        b.grad()[i] += d;
      }
    });
  }
  return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b, Tape* tape = nullptr) {
  if (a.shape() != b.shape())
    throw ShapeError("mul: shapes disagree: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor out = a.clone();
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) *= b.at(i);
  if (tape) {
    detail::prepare(tape, {a, b, out});
    tape->record([a, b, out]() {
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double d = out.grad()[i];
        a.grad()[i] += d * b.at(i);
        b.grad()[i] += d * a.at(i);
      }
    });
  }
  return out;
}

// y = scale * x + shift, elementwise with scalar coefficients.
inline Tensor affine(const Tensor& x, double scale, double shift, Tape* tape = nullptr) {
  Tensor out = x.clone();
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) = scale * out.at(i) + shift;
  if (tape) {
    detail::prepare(tape, {x, out});
    tape->record([x, out, scale]() {
      for (std::size_t i = 0; i < out.size(); ++i) x.grad()[i] += scale * out.grad()[i];
    });
  }
  return out;
}

// Broadcast-add a length-c vector to every row of an r-by-c matrix.
inline Tensor add_row(const Tensor& x, const Tensor& b, Tape* tape = nullptr) {
  detail::require_rank2(x, "add_row");
  if (b.rank() != 1 || b.size() != x.cols())
    throw ShapeError("add_row: bias " + shape_str(b.shape()) + " does not match row width of " +
                     shape_str(x.shape()));
  Tensor out = x.clone();
  const std::size_t r = x.rows(), c = x.cols();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) += b.at(j);
  if (tape) {
    detail::prepare(tape, {x, b, out});
    tape->record([x, b, out, r, c]() {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) {
          const double d = out.grad()[i * c + j];
          x.grad()[i * c + j] += d;
          b.grad()[j] += d;
        }
    });
  }
  return out;
}

// ---- activations ----------------------------------------------------------

inline double sigmoid_stable(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

inline Tensor activation(const Tensor& x, Act kind, Tape* tape = nullptr) {
  Tensor out = x.clone();
  switch (kind) {
    case Act::Sigmoid:
      for (std::size_t i = 0; i < out.size(); ++i) out.at(i) = sigmoid_stable(out.at(i));
      break;
    case Act::Tanh:
      for (std::size_t i = 0; i < out.size(); ++i) out.at(i) = std::tanh(out.at(i));
      break;
    case Act::Relu:
      for (std::size_t i = 0; i < out.size(); ++i) out.at(i) = out.at(i) > 0.0 ? out.at(i) : 0.0;
      break;
  }
  if (tape) {
    detail::prepare(tape, {x, out});
    // All three derivatives are recoverable from the output alone:
    // sigma' = y(1-y), tanh' = 1-y^2, relu' = 1{y > 0}.
    tape->record([x, out, kind]() {
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double y = out.at(i);
        double d = 0.0;
        switch (kind) {
          case Act::Sigmoid: d = y * (1.0 - y); break;
          case Act::Tanh: d = 1.0 - y * y; break;
          case Act::Relu: d = y > 0.0 ? 1.0 : 0.0; break;
        }
        x.grad()[i] += d * out.grad()[i];
      }
    });
  }
  return out;
}

// ---- softmax over the last dimension ---------------------------------------

inline Tensor softmax_rows(const Tensor& x, Tape* tape = nullptr) {
  if (x.rank() < 1 || x.cols() < 1)
    throw ShapeError("softmax_rows: need at least one column, got " + shape_str(x.shape()));
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out = x.clone();
  for (std::size_t i = 0; i < r; ++i) {
    double mx = out.at(i * c);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, out.at(i * c + j));
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double e = std::exp(out.at(i * c + j) - mx);
      out.at(i * c + j) = e;
      sum += e;
    }
    for (std::size_t j = 0; j < c; ++j) out.at(i * c + j) /= sum;
  }
  if (tape) {
    detail::prepare(tape, {x, out});
    // Per row: dx_j = y_j * (dy_j - sum_k dy_k y_k).
    tape->record([x, out, r, c]() {
      for (std::size_t i = 0; i < r; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += out.grad()[i * c + j] * out.at(i * c + j);
        for (std::size_t j = 0; j < c; ++j)
          x.grad()[i * c + j] += out.at(i * c + j) * (out.grad()[i * c + j] - dot);
      }
    });
  }
  return out;
}

// ---- layer normalization over the last dimension ---------------------------

inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5,
                         Tape* tape = nullptr) {
  if (eps <= 0.0) throw ConfigError("layer_norm: eps must be positive");
  const std::size_t r = x.rows(), c = x.cols();
  if (gain.size() != c || bias.size() != c)
    throw ShapeError("layer_norm: gain/bias width must match " + shape_str(x.shape()));
  Tensor out = x.clone();
  auto xhat = std::make_shared<std::vector<double>>(r * c);
  auto inv_std = std::make_shared<std::vector<double>>(r);
  for (std::size_t i = 0; i < r; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += x.at(i * c + j);
    mean /= static_cast<double>(c);
    double var = 0.0;  // population variance
    for (std::size_t j = 0; j < c; ++j) {
      const double d = x.at(i * c + j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double xh = (x.at(i * c + j) - mean) * is;
      (*xhat)[i * c + j] = xh;
      out.at(i * c + j) = xh * gain.at(j) + bias.at(j);
    }
  }
  if (tape) {
    detail::prepare(tape, {x, gain, bias, out});
    tape->record([x, gain, bias, out, xhat, inv_std, r, c]() {
      std::vector<double> dxhat(c);
      for (std::size_t i = 0; i < r; ++i) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          const double dy = out.grad()[i * c + j];
          const double xh = (*xhat)[i * c + j];
          bias.grad()[j] += dy;
          gain.grad()[j] += dy * xh;
          dxhat[j] = dy * gain.at(j);
          m1 += dxhat[j];
          m2 += dxhat[j] * xh;
        }
        m1 /= static_cast<double>(c);
        m2 /= static_cast<double>(c);
        const double is = (*inv_std)[i];
        for (std::size_t j = 0; j < c; ++j)
          x.grad()[i * c + j] += is * (dxhat[j] - m1 - (*xhat)[i * c + j] * m2);
      }
    });
  }
  return out;
}

// ---- dropout ----------------------------------------------------------------

struct DropoutSpec {
  double rate = 0.0;
  bool training = false;
  SeededRng* rng = nullptr;

  static DropoutSpec off() { return {}; }
  bool active() const { return training && rate > 0.0; }
};

// Inverted dropout: survivors are scaled by 1/(1-rate) at train time so that
// inference is a pure identity. Mask elements are drawn in row-major order.
inline Tensor dropout(const Tensor& x, double rate, bool training, SeededRng* rng,
                      Tape* tape = nullptr) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw ConfigError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return x;
  if (!rng) throw ConfigError("dropout: training mode requires an rng");
  Tensor out = x.clone();
  auto mask = std::make_shared<std::vector<double>>(x.size());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double m = rng->uniform() >= rate ? keep_scale : 0.0;
    (*mask)[i] = m;
    out.at(i) *= m;
  }
  if (tape) {
    detail::prepare(tape, {x, out});
    tape->record([x, out, mask]() {
      for (std::size_t i = 0; i < out.size(); ++i) x.grad()[i] += (*mask)[i] * out.grad()[i];
    });
  }
  return out;
}

inline Tensor dropout(const Tensor& x, const DropoutSpec& spec, Tape* tape = nullptr) {
  return dropout(x, spec.rate, spec.training, spec.rng, tape);
}

// ---- structural ops ----------------------------------------------------------

inline Tensor transpose(const Tensor& x, Tape* tape = nullptr) {
  detail::require_rank2(x, "transpose");
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out = Tensor::zeros({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = x.at(i, j);
  if (tape) {
    detail::prepare(tape, {x, out});
    tape->record([x, out, r, c]() {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) x.grad()[i * c + j] += out.grad()[j * r + i];
    });
  }
  return out;
}

inline Tensor slice_cols(const Tensor& x, std::size_t c0, std::size_t width, Tape* tape = nullptr) {
  detail::require_rank2(x, "slice_cols");
  if (c0 + width > x.cols() || width == 0)
    throw ShapeError("slice_cols: range [" + std::to_string(c0) + ", " + std::to_string(c0 + width) +
                     ") out of " + shape_str(x.shape()));
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out = Tensor::zeros({r, width});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < width; ++j) out.at(i, j) = x.at(i, c0 + j);
  if (tape) {
    detail::prepare(tape, {x, out});
    tape->record([x, out, c0, width, r, c]() {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < width; ++j) x.grad()[i * c + c0 + j] += out.grad()[i * width + j];
    });
  }
  return out;
}

inline Tensor concat_cols(const std::vector<Tensor>& parts, Tape* tape = nullptr) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  const std::size_t r = parts[0].rows();
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    detail::require_rank2(p, "concat_cols");
    if (p.rows() != r) throw ShapeError("concat_cols: row counts disagree");
    total += p.cols();
  }
  Tensor out = Tensor::zeros({r, total});
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) out.at(i, off + j) = p.at(i, j);
    off += p.cols();
  }
  if (tape) {
    for (const Tensor& p : parts) detail::prepare(tape, {p});
    detail::prepare(tape, {out});
    tape->record([parts, out, r, total]() {
      std::size_t off = 0;
      for (const Tensor& p : parts) {
        const std::size_t pc = p.cols();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < pc; ++j) p.grad()[i * pc + j] += out.grad()[i * total + off + j];
        off += pc;
      }
    });
  }
  return out;
}

inline Tensor slice_row(const Tensor& x, std::size_t r0, Tape* tape = nullptr) {
  detail::require_rank2(x, "slice_row");
  if (r0 >= x.rows()) throw ShapeError("slice_row: row " + std::to_string(r0) + " out of " + shape_str(x.shape()));
  const std::size_t c = x.cols();
  Tensor out = Tensor::zeros({1, c});
  for (std::size_t j = 0; j < c; ++j) out.at(0, j) = x.at(r0, j);
  if (tape) {
    detail::prepare(tape, {x, out});
    tape->record([x, out, r0, c]() {
      for (std::size_t j = 0; j < c; ++j) x.grad()[r0 * c + j] += out.grad()[j];
    });
  }
  return out;
}

// Stack T row vectors [1 x c] into a [T x c] matrix.
inline Tensor stack_rows(const std::vector<Tensor>& rows, Tape* tape = nullptr) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  const std::size_t c = rows[0].cols();
  for (const Tensor& t : rows)
    if (t.rows() != 1 || t.cols() != c) throw ShapeError("stack_rows: expected uniform [1x" + std::to_string(c) + "] rows");
  Tensor out = Tensor::zeros({rows.size(), c});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) = rows[i].at(j);
  if (tape) {
    for (const Tensor& t : rows) detail::prepare(tape, {t});
    detail::prepare(tape, {out});
    tape->record([rows, out, c]() {
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < c; ++j) rows[i].grad()[j] += out.grad()[i * c + j];
    });
  }
  return out;
}

// Mean over rows: [r x c] -> [1 x c].
inline Tensor mean_rows(const Tensor& x, Tape* tape = nullptr) {
  detail::require_rank2(x, "mean_rows");
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out = Tensor::zeros({1, c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(0, j) += x.at(i, j);
  for (std::size_t j = 0; j < c; ++j) out.at(0, j) /= static_cast<double>(r);
  if (tape) {
    detail::prepare(tape, {x, out});
    tape->record([x, out, r, c]() {
      const double inv = 1.0 / static_cast<double>(r);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) x.grad()[i * c + j] += inv * out.grad()[j];
    });
  }
  return out;
}

// Sum of all elements -> scalar.
inline Tensor sum_all(const Tensor& x, Tape* tape = nullptr) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x.at(i);
  Tensor out = Tensor::scalar(s);
  if (tape) {
    detail::prepare(tape, {x, out});
    tape->record([x, out]() {
      const double d = out.grad()[0];
      for (std::size_t i = 0; i < x.size(); ++i) x.grad()[i] += d;
    });
  }
  return out;
}

// Collect B size-1 tensors into a length-B vector.
inline Tensor stack_scalars(const std::vector<Tensor>& xs, Tape* tape = nullptr) {
  if (xs.empty()) throw ShapeError("stack_scalars: no inputs");
  Tensor out = Tensor::zeros({xs.size()});
  for (std::size_t i = 0; i < xs.size(); ++i) out.at(i) = xs[i].item();
  if (tape) {
    for (const Tensor& t : xs) detail::prepare(tape, {t});
    detail::prepare(tape, {out});
    tape->record([xs, out]() {
      for (std::size_t i = 0; i < xs.size(); ++i) xs[i].grad()[0] += out.grad()[i];
    });
  }
  return out;
}

// ---- parameter initialization -----------------------------------------------

inline Tensor random_uniform(Shape shape, SeededRng& rng, double lo, double hi) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = rng.uniform(lo, hi);
  return t;
}

inline Tensor random_normal(Shape shape, SeededRng& rng, double mean = 0.0, double stddev = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = rng.normal(mean, stddev);
  return t;
}

// Glorot-uniform: limit = sqrt(6 / (fan_in + fan_out)).
inline Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, SeededRng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return random_uniform({fan_in, fan_out}, rng, -limit, limit);
}

}  // namespace bgtf
