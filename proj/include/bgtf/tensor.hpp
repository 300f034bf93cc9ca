#pragma once
// Dense 64-bit tensors, the seeded RNG, and the reverse-mode tape that every
// differentiable layer in this library is built on.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bgtf {

// ---------------------------------------------------------------------------
// Error taxonomy. Each maps to a distinct CLI exit code (see commands.hpp).
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct DataError : Error { using Error::Error; };
struct VocabError : Error { using Error::Error; };
struct SchemaError : Error { using Error::Error; };
struct TrainError : Error { using Error::Error; };
struct OracleError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor: shape + row-major doubles + optional gradient buffer. A Tensor is a
// cheap handle onto shared storage; copies alias the same payload, which is
// what lets the tape accumulate gradients into the tensors an op consumed.
// clone() is the deep copy.
// ---------------------------------------------------------------------------

class Tensor {
  struct Storage {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty unless the tensor participates in autodiff
  };

 public:
  Tensor() : s_(std::make_shared<Storage>()) {}

  static Tensor zeros(Shape shape) {
    Tensor t;
    std::size_t n = count(shape);
    t.s_->shape = std::move(shape);
    t.s_->data.assign(n, 0.0);
    return t;
  }

  static Tensor full(Shape shape, double v) {
    Tensor t = zeros(std::move(shape));
    for (double& x : t.s_->data) x = v;
    return t;
  }

  static Tensor scalar(double v) { return from_data({1}, {v}); }

  static Tensor vec(std::vector<double> v) {
    Shape s{v.size()};
    return from_data(std::move(s), std::move(v));
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
    if (v.size() != rows * cols)
      throw ShapeError("matrix: payload size " + std::to_string(v.size()) +
                       " does not fill " + std::to_string(rows) + "x" + std::to_string(cols));
    return from_data({rows, cols}, std::move(v));
  }

  static Tensor from_data(Shape shape, std::vector<double> data) {
    if (data.size() != count(shape))
      throw ShapeError("tensor: payload size " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
    Tensor t;
    t.s_->shape = std::move(shape);
    t.s_->data = std::move(data);
    return t;
  }

  const Shape& shape() const { return s_->shape; }
  std::size_t rank() const { return s_->shape.size(); }
  std::size_t size() const { return s_->data.size(); }

  // Row-wise ops treat a rank-1 tensor as a single row.
  std::size_t rows() const { return rank() == 2 ? s_->shape[0] : 1; }
  std::size_t cols() const { return rank() == 0 ? 0 : s_->shape[rank() - 1]; }

  // A Tensor is a handle: const applies to the handle, not the shared payload.
  std::vector<double>& data() const { return s_->data; }

  double& at(std::size_t i) const { return s_->data[i]; }
  double& at(std::size_t r, std::size_t c) const { return s_->data[r * cols() + c]; }

  double item() const {
    if (size() != 1) throw ShapeError("item: tensor " + shape_str(shape()) + " is not a scalar");
    return s_->data[0];
  }

  bool has_grad() const { return !s_->grad.empty(); }

  void ensure_grad() const {
    if (s_->grad.size() != s_->data.size()) s_->grad.assign(s_->data.size(), 0.0);
  }

  std::vector<double>& grad() const {
    if (!has_grad()) throw ShapeError("grad: tensor has no gradient buffer");
    return s_->grad;
  }

  void zero_grad() const {
    for (double& g : s_->grad) g = 0.0;
  }

  void drop_grad() const { s_->grad.clear(); }

  Tensor clone() const {
    Tensor t;
    t.s_->shape = s_->shape;
    t.s_->data = s_->data;
    return t;
  }

  void copy_data_from(const Tensor& other) const {
    if (other.shape() != shape())
      throw ShapeError("copy_data_from: " + shape_str(other.shape()) + " vs " + shape_str(shape()));
    s_->data = other.s_->data;
  }

  bool same_storage(const Tensor& other) const { return s_ == other.s_; }

  bool all_finite() const {
    for (double v : s_->data)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  static std::size_t count(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
      if (d == 0) throw ShapeError("tensor: zero dimension in shape " + shape_str(shape));
      n *= d;
    }
    return shape.empty() ? 0 : n;
  }

  std::shared_ptr<Storage> s_;
};

// ---------------------------------------------------------------------------
// SeededRng: the one random stream used everywhere. The stream is pinned so
// runs are reproducible within a build:
//   engine     mt19937_64(seed), exactly as specified in the C++ standard
//   uniform()  (next_u64() >> 11) * 2^-53, in [0, 1)
//   normal()   Box-Muller on two uniforms; the pair's second value is cached
//   below(n)   multiply-high mapping of next_u64() onto [0, n)
// Identical seeds give identical streams. Cross-platform bit-identity is not
// promised, only determinism within one build of this library.
// ---------------------------------------------------------------------------

class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // Box-Muller; u1 nudged away from 0 so log() stays finite.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Uniform integer in [0, n). Multiply-high mapping; the bias of n / 2^64 is
  // negligible at the set sizes used here.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Tape: ordered record of executed differentiable ops. backward() seeds the
// scalar loss gradient with 1 and replays the record in exact reverse order;
// every step adds into operand gradients, so a tensor consumed twice receives
// the sum of both contributions.
// ---------------------------------------------------------------------------

class Tape {
 public:
  void record(std::function<void()> step) { steps_.push_back(std::move(step)); }

  std::size_t num_steps() const { return steps_.size(); }

  void backward(Tensor loss) {
    if (loss.size() != 1)
      throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()));
    loss.ensure_grad();
    loss.grad()[0] = 1.0;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  }

  void clear() { steps_.clear(); }

 private:
  std::vector<std::function<void()>> steps_;
};

}  // namespace bgtf
