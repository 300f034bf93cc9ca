#pragma once
// Dataset schema, CSV ingestion/emission, the synthetic workload generator,
// train-statistics standardization, and deterministic splits.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bgtf/tensor.hpp"

namespace bgtf {

// One deep-learning-task row. memory_usage_mb is the prediction target.
struct TaskRecord {
  std::string task_type;        // "training" | "inference"
  std::string model_arch;       // open vocabulary
  std::int64_t input_dim = 0;   // > 0
  std::int64_t batch_size = 0;  // > 0
  std::int64_t num_layers = 0;  // > 0
  std::int64_t num_parameters = 0;  // > 0
  int precision_encoded = 0;        // {0, 1, 2}
  double parameters_per_layer = 0.0;
  double memory_usage_mb = 0.0;  // (0, 48000]

  bool operator==(const TaskRecord&) const = default;
};

inline constexpr double kMemoryCapMb = 48000.0;
inline constexpr double kParamsPerLayerDivisor = 1024000.0;
inline constexpr double kPplTolerance = 1e-4;

inline const std::vector<std::string> kCsvColumns = {
    "task_type",      "model_arch",        "input_dim",
    "batch_size",     "num_layers",        "num_parameters",
    "precision_encoded", "parameters_per_layer", "memory_usage_mb"};

// Derived feature recovered from the dataset: parameter count per layer in
// units of 1,024,000 parameters.
inline double derived_params_per_layer(std::int64_t num_parameters, std::int64_t num_layers) {
  return static_cast<double>(num_parameters) /
         (static_cast<double>(num_layers) * kParamsPerLayerDivisor);
}

inline void validate_record(const TaskRecord& r, std::size_t row, bool with_target = true) {
  auto fail = [row](const std::string& column, const std::string& why) {
    throw DataError("row " + std::to_string(row) + ", column " + column + ": " + why);
  };
  if (r.task_type != "training" && r.task_type != "inference")
    fail("task_type", "expected 'training' or 'inference', got '" + r.task_type + "'");
  if (r.model_arch.empty()) fail("model_arch", "empty value");
  if (r.input_dim <= 0) fail("input_dim", "must be positive");
  if (r.batch_size <= 0) fail("batch_size", "must be positive");
  if (r.num_layers <= 0) fail("num_layers", "must be positive");
  if (r.num_parameters <= 0) fail("num_parameters", "must be positive");
  if (r.precision_encoded < 0 || r.precision_encoded > 2)
    fail("precision_encoded", "must be one of {0, 1, 2}, got " + std::to_string(r.precision_encoded));
  if (!(r.parameters_per_layer >= 0.0)) fail("parameters_per_layer", "must be non-negative");
  const double expected_ppl = derived_params_per_layer(r.num_parameters, r.num_layers);
  if (std::abs(r.parameters_per_layer - expected_ppl) > kPplTolerance)
    fail("parameters_per_layer",
         "inconsistent with num_parameters/(num_layers*1024000): got " +
             std::to_string(r.parameters_per_layer) + ", expected " + std::to_string(expected_ppl));
  if (with_target) {
    if (!(r.memory_usage_mb > 0.0) || r.memory_usage_mb > kMemoryCapMb)
      fail("memory_usage_mb", "must lie in (0, 48000]");
  }
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_double(double v) {
  // Shortest round-trip representation; keeps write-then-read the identity.
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double_field(const std::string& s, std::size_t row, const std::string& col) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw DataError("row " + std::to_string(row) + ", column " + col + ": unparsable value '" + s + "'");
  return v;
}

inline std::int64_t parse_int_field(const std::string& s, std::size_t row, const std::string& col) {
  std::int64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw DataError("row " + std::to_string(row) + ", column " + col + ": unparsable value '" + s + "'");
  return v;
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace detail

struct LoadResult {
  std::vector<TaskRecord> records;
  std::vector<std::string> warnings;
};

// Reads the canonical CSV. Files without task_type/batch_size columns (the
// published-table shape) are accepted with defaults task_type=training,
// batch_size=1 and a warning. Unknown columns are rejected.
inline LoadResult load_csv(const std::string& path, bool with_target = true) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": missing header row");
  const std::vector<std::string> header = detail::split_csv_line(detail::strip_cr(line));

  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    bool known = false;
    for (const std::string& name : kCsvColumns) known = known || name == header[i];
    if (!known) throw DataError(path + ": unknown column '" + header[i] + "'");
    if (col.count(header[i])) throw DataError(path + ": duplicate column '" + header[i] + "'");
    col[header[i]] = i;
  }

  LoadResult out;
  const bool has_task_type = col.count("task_type") > 0;
  const bool has_batch_size = col.count("batch_size") > 0;
  if (!has_task_type) out.warnings.push_back("missing task_type column; defaulting to 'training'");
  if (!has_batch_size) out.warnings.push_back("missing batch_size column; defaulting to 1");
  for (const std::string& name : kCsvColumns) {
    if (name == "task_type" || name == "batch_size") continue;
    if (name == "memory_usage_mb" && !with_target) {
      if (col.count(name)) throw DataError(path + ": unexpected target column memory_usage_mb");
      continue;
    }
    if (!col.count(name)) throw DataError(path + ": missing column '" + name + "'");
  }

  std::size_t row = 1;  // header is row 0
  while (std::getline(in, line)) {
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    const std::vector<std::string> f = detail::split_csv_line(line);
    if (f.size() != header.size())
      throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                      " fields, got " + std::to_string(f.size()));
    TaskRecord r;
    r.task_type = has_task_type ? f[col.at("task_type")] : "training";
    r.model_arch = f[col.at("model_arch")];
    r.input_dim = detail::parse_int_field(f[col.at("input_dim")], row, "input_dim");
    r.batch_size = has_batch_size ? detail::parse_int_field(f[col.at("batch_size")], row, "batch_size") : 1;
    r.num_layers = detail::parse_int_field(f[col.at("num_layers")], row, "num_layers");
    r.num_parameters = detail::parse_int_field(f[col.at("num_parameters")], row, "num_parameters");
    r.precision_encoded =
        static_cast<int>(detail::parse_int_field(f[col.at("precision_encoded")], row, "precision_encoded"));
    r.parameters_per_layer =
        detail::parse_double_field(f[col.at("parameters_per_layer")], row, "parameters_per_layer");
    if (with_target)
      r.memory_usage_mb = detail::parse_double_field(f[col.at("memory_usage_mb")], row, "memory_usage_mb");
    validate_record(r, row, with_target);
    out.records.push_back(std::move(r));
    ++row;
  }
  return out;
}

inline void save_csv(const std::string& path, const std::vector<TaskRecord>& records,
                     bool with_target = true) {
  std::ofstream outf(path, std::ios::binary);  // binary: LF newlines everywhere
  if (!outf) throw IoError("cannot write " + path);
  for (std::size_t i = 0; i < kCsvColumns.size(); ++i) {
    if (kCsvColumns[i] == "memory_usage_mb" && !with_target) continue;
    if (i) outf << ',';
    outf << kCsvColumns[i];
  }
  outf << '\n';
  for (const TaskRecord& r : records) {
    outf << r.task_type << ',' << r.model_arch << ',' << r.input_dim << ',' << r.batch_size << ','
         << r.num_layers << ',' << r.num_parameters << ',' << r.precision_encoded << ','
         << detail::format_double(r.parameters_per_layer);
    if (with_target) outf << ',' << detail::format_double(r.memory_usage_mb);
    outf << '\n';
  }
}

// ---------------------------------------------------------------------------
// Synthetic generator (substitute for the unavailable production dataset).
//
// Generative law, version 1 (constants are frozen so tests stay stable):
//   bytes_per_param = {0 -> 2, 1 -> 4, 2 -> 8}[precision_encoded]
//   memory_mb = c1 * num_parameters * bytes_per_param / 2^20
//             + c2 * batch_size * input_dim * num_layers / 2^10
//             + c3 * arch_offset(model_arch)
//             + eps,   eps ~ Normal(0, sigma)
//   clipped to (0, 48000]
// with c1 = 3.0 (weights + gradients + optimizer state), c2 = 0.5, sigma = 50.
// ---------------------------------------------------------------------------

struct GeneratorConfig {
  int version = 1;
  double c1 = 3.0;
  double c2 = 0.5;
  double c3 = 1.0;
  double sigma = 50.0;
  std::vector<std::pair<std::string, double>> arch_offsets = {
      {"VGG16", 1400.0}, {"BERT", 2600.0}, {"YOLO v4", 2000.0}, {"U-Net", 1000.0}, {"GAN", 1700.0}};
};

inline int bytes_per_param(int precision_encoded) {
  switch (precision_encoded) {
    case 0: return 2;
    case 1: return 4;
    default: return 8;
  }
}

inline double synthetic_memory_formula(const TaskRecord& r, const GeneratorConfig& cfg) {
  double offset = 0.0;
  for (const auto& [arch, v] : cfg.arch_offsets)
    if (arch == r.model_arch) offset = v;
  return cfg.c1 * static_cast<double>(r.num_parameters) * bytes_per_param(r.precision_encoded) /
             1048576.0 +
         cfg.c2 * static_cast<double>(r.batch_size) * static_cast<double>(r.input_dim) *
             static_cast<double>(r.num_layers) / 1024.0 +
         cfg.c3 * offset;
}

inline std::vector<TaskRecord> generate_synthetic(std::size_t n, std::uint64_t seed,
                                                  const GeneratorConfig& cfg = {}) {
  if (n < 1) throw ConfigError("generate_synthetic: need n >= 1");
  SeededRng rng(seed);
  std::vector<TaskRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    TaskRecord r;
    r.task_type = rng.below(2) == 0 ? "training" : "inference";
    r.model_arch = cfg.arch_offsets[rng.below(cfg.arch_offsets.size())].first;
    r.input_dim = 16 + static_cast<std::int64_t>(rng.below(497));      // 16..512
    r.batch_size = 1 + static_cast<std::int64_t>(rng.below(128));      // 1..128
    r.num_layers = 8 + static_cast<std::int64_t>(rng.below(89));       // 8..96
    r.num_parameters = 1000000 + static_cast<std::int64_t>(rng.below(199000001));  // 1e6..2e8
    r.precision_encoded = static_cast<int>(rng.below(3));
    r.parameters_per_layer = derived_params_per_layer(r.num_parameters, r.num_layers);
    const double noise = cfg.sigma > 0.0 ? rng.normal(0.0, cfg.sigma) : 0.0;
    r.memory_usage_mb = std::clamp(synthetic_memory_formula(r, cfg) + noise, 1.0, kMemoryCapMb);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Standardization. z-scores use train-split statistics only (population
// variance). Zero-variance features pass through uncentered with a flag.
// ---------------------------------------------------------------------------

inline const std::vector<std::string> kNumericFeatures = {
    "input_dim", "batch_size", "num_layers", "num_parameters", "parameters_per_layer"};

inline double numeric_feature_value(const TaskRecord& r, const std::string& name) {
  if (name == "input_dim") return static_cast<double>(r.input_dim);
  if (name == "batch_size") return static_cast<double>(r.batch_size);
  if (name == "num_layers") return static_cast<double>(r.num_layers);
  if (name == "num_parameters") return static_cast<double>(r.num_parameters);
  if (name == "parameters_per_layer") return r.parameters_per_layer;
  throw SchemaError("unknown numeric feature '" + name + "'");
}

struct Scaler {
  std::vector<std::string> feature_names = kNumericFeatures;
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<bool> passthrough;  // true where train variance was zero
  double target_mean = 0.0;
  double target_std = 1.0;

  static Scaler identity() {
    Scaler s;
    s.mean.assign(s.feature_names.size(), 0.0);
    s.stddev.assign(s.feature_names.size(), 1.0);
    s.passthrough.assign(s.feature_names.size(), false);
    return s;
  }

  double transform_feature(std::size_t f, double v) const {
    if (passthrough[f]) return v;
    return (v - mean[f]) / stddev[f];
  }

  double invert_feature(std::size_t f, double z) const {
    if (passthrough[f]) return z;
    return z * stddev[f] + mean[f];
  }

  double transform_target(double y) const { return (y - target_mean) / target_std; }
  double invert_target(double z) const { return z * target_std + target_mean; }

  bool operator==(const Scaler&) const = default;
};

inline Scaler fit_scaler(const std::vector<TaskRecord>& records,
                         const std::vector<std::size_t>& train_indices) {
  if (train_indices.empty()) throw DataError("fit_scaler: empty train split");
  Scaler s;
  const double n = static_cast<double>(train_indices.size());
  for (const std::string& name : s.feature_names) {
    double mean = 0.0;
    for (std::size_t i : train_indices) mean += numeric_feature_value(records[i], name);
    mean /= n;
    double var = 0.0;
    for (std::size_t i : train_indices) {
      const double d = numeric_feature_value(records[i], name) - mean;
      var += d * d;
    }
    var /= n;
    const bool degenerate = var == 0.0;
    s.mean.push_back(degenerate ? 0.0 : mean);
    s.stddev.push_back(degenerate ? 1.0 : std::sqrt(var));
    s.passthrough.push_back(degenerate);
  }
  double tm = 0.0;
  for (std::size_t i : train_indices) tm += records[i].memory_usage_mb;
  tm /= n;
  double tv = 0.0;
  for (std::size_t i : train_indices) {
    const double d = records[i].memory_usage_mb - tm;
    tv += d * d;
  }
  tv /= n;
  if (tv == 0.0) throw DataError("fit_scaler: zero-variance target on the train split");
  s.target_mean = tm;
  s.target_std = std::sqrt(tv);
  return s;
}

// ---------------------------------------------------------------------------
// Deterministic splits: seeded permutation partitioned by cumulative
// fractions, sizes floor(f*n) with the remainder assigned to the last split.
// ---------------------------------------------------------------------------

struct DatasetSplits {
  std::vector<std::size_t> train, val, test;
  std::uint64_t seed = 0;
  std::array<double, 3> fractions{};
};

inline DatasetSplits split_dataset(std::size_t n, std::array<double, 3> fractions,
                                   std::uint64_t seed) {
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ConfigError("split_dataset: fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split_dataset: fractions must sum to 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SeededRng rng(seed);
  rng.shuffle(order);
  const std::size_t n_train = static_cast<std::size_t>(std::floor(fractions[0] * static_cast<double>(n)));
  const std::size_t n_val = static_cast<std::size_t>(std::floor(fractions[1] * static_cast<double>(n)));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n)
    throw DataError("split_dataset: a split is empty at n = " + std::to_string(n));
  DatasetSplits s;
  s.seed = seed;
  s.fractions = fractions;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
               order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return s;
}

}  // namespace bgtf
