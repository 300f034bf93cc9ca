#pragma once
// Central finite-difference oracle for verifying reverse-mode gradients.

#include <algorithm>
#include <functional>
#include <vector>

#include "bgtf/ops.hpp"
#include "bgtf/tensor.hpp"

namespace bgtf {

struct GradCheckOptions {
  double h = 1e-5;
  // 0 checks every coordinate; otherwise at most this many per tensor,
  // sampled without replacement from coord_seed.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t coord_seed = 0;
  // Test-only hook, run after backward: lets a negative control corrupt the
  // analytic gradients and prove the detector fires.
  std::function<void(std::vector<Tensor>&)> corrupt_gradients;
};

// f builds a scalar loss on the given tape (tape == nullptr means forward
// only). f must be deterministic given the parameter values: dropout off or
// its mask frozen. Returns the max over checked coordinates of
//   |analytic - central difference| / max(1, |analytic|, |numeric|).
inline double grad_check(const std::function<Tensor(Tape*)>& f, const std::vector<Tensor>& params,
                         const GradCheckOptions& opts = {}) {
  if (!(opts.h >= 1e-6 && opts.h <= 1e-4))
    throw OracleError("grad_check: h must lie in [1e-6, 1e-4]");

  for (Tensor p : params) {
    p.ensure_grad();
    p.zero_grad();
  }
  Tape tape;
  Tensor loss = f(&tape);
  if (loss.size() != 1 || !std::isfinite(loss.item()))
    throw OracleError("grad_check: loss is not a finite scalar");
  tape.backward(loss);
  if (opts.corrupt_gradients) {
    std::vector<Tensor> mutable_params = params;
    opts.corrupt_gradients(mutable_params);
  }

  auto eval = [&f]() {
    const double v = f(nullptr).item();
    if (!std::isfinite(v)) throw OracleError("grad_check: non-finite loss during differencing");
    return v;
  };

  SeededRng coord_rng(opts.coord_seed);
  double max_rel = 0.0;
  for (Tensor p : params) {
    std::vector<std::size_t> coords(p.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (opts.max_coords_per_tensor > 0 && coords.size() > opts.max_coords_per_tensor) {
      coord_rng.shuffle(coords);
      coords.resize(opts.max_coords_per_tensor);
    }
    for (std::size_t idx : coords) {
      const double saved = p.at(idx);
      p.at(idx) = saved + opts.h;
      const double up = eval();
      p.at(idx) = saved - opts.h;
      const double down = eval();
      p.at(idx) = saved;
      const double numeric = (up - down) / (2.0 * opts.h);
      const double analytic = p.grad()[idx];
      const double rel = std::abs(analytic - numeric) /
                         std::max({1.0, std::abs(analytic), std::abs(numeric)});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace bgtf
