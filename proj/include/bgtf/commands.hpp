#pragma once
// Command implementations behind the CLI. Each command takes an argument
// struct and output streams so tests can drive it in-process; the binary in
// tools/ is a thin flag-parsing shell around these.

#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bgtf/checkpoint.hpp"
#include "bgtf/gradcheck_suite.hpp"
#include "bgtf/report.hpp"
#include "bgtf/train.hpp"

namespace bgtf {

// Documented exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;   // unexpected failure
inline constexpr int kExitUsage = 2;      // bad flags / configuration
inline constexpr int kExitData = 3;       // data validation, vocabulary, or file I/O
inline constexpr int kExitTrain = 4;      // training divergence
inline constexpr int kExitSchema = 5;     // checkpoint/data schema mismatch
inline constexpr int kExitGradcheck = 6;  // a gradcheck unit failed
inline constexpr int kExitPartial = 7;    // benchmark finished with failed rows

// Runs a command body and maps the error taxonomy onto exit codes.
inline int guard_command(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << '\n';
    return kExitSchema;
  } catch (const TrainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitTrain;
  } catch (const VocabError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

struct GenDataArgs {
  std::size_t n = 452;
  std::uint64_t seed = 0;
  std::string out;
};

inline int cmd_gen_data(const GenDataArgs& args, std::ostream& out, std::ostream& err) {
  return guard_command(
      [&]() {
        if (args.n < 1) throw ConfigError("gen-data: --n must be >= 1");
        if (args.out.empty()) throw ConfigError("gen-data: --out is required");
        const auto records = generate_synthetic(args.n, args.seed);
        save_csv(args.out, records);
        double mean = 0.0, lo = records[0].memory_usage_mb, hi = lo;
        for (const TaskRecord& r : records) {
          mean += r.memory_usage_mb;
          lo = std::min(lo, r.memory_usage_mb);
          hi = std::max(hi, r.memory_usage_mb);
        }
        mean /= double(records.size());
        out << "wrote " << records.size() << " rows to " << args.out << '\n';
        out << "memory_usage_mb: mean=" << detail::fixed3(mean) << " min=" << detail::fixed3(lo)
            << " max=" << detail::fixed3(hi) << '\n';
        return kExitOk;
      },
      err);
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string model = "hybrid";
  std::string preset = "tiny";
  std::uint64_t seed = 0;
  std::string out;           // checkpoint path, required
  std::string history;       // defaults to <out>.history.csv
  std::array<double, 3> fractions = {0.7, 0.15, 0.15};
  bool timing = false;       // record wall time in the history CSV

  // Neural flags (optional = explicitly set by the user).
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> learning_rate;
  std::optional<std::size_t> patience;
  std::optional<double> clip_norm;
  std::optional<double> dropout;

  // Tree flags.
  std::optional<std::size_t> max_depth;
  std::optional<std::size_t> min_leaf;
  std::optional<std::size_t> n_trees;
  std::optional<std::size_t> n_rounds;
  std::optional<double> eta;
  std::optional<double> lambda;
  std::optional<double> gamma;
  std::optional<double> feature_fraction;
};

namespace detail {

inline bool is_neural(ModelKind k) { return k == ModelKind::Hybrid || k == ModelKind::Transformer; }

inline void write_history_csv(const std::string& path, const TrainHistory& h, bool timing) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os << "epoch,train_loss,val_loss,seconds\n";
  for (std::size_t e = 0; e < h.train_loss.size(); ++e) {
    os << (e + 1) << ',' << full_precision(h.train_loss[e]) << ',';
    if (!std::isnan(h.val_loss[e])) os << full_precision(h.val_loss[e]);
    os << ',';
    // Deterministic by default so identical runs emit identical files; wall
    // time is opt-in via --timing.
    if (timing) {
      std::ostringstream sec;
      sec << std::fixed << std::setprecision(3) << h.seconds[e];
      os << sec.str();
    } else {
      os << "0.000";
    }
    os << '\n';
  }
}

struct FitOutcome {
  TrainedModel model;
  TrainHistory history;
};

// One deterministic fit: neural kinds run the Adam loop on standardized
// targets, tree kinds fit the design matrix in original units.
inline FitOutcome fit_model(ModelKind kind, const std::vector<TaskRecord>& records,
                            const DatasetSplits& splits, const FeatureSpec& spec,
                            const Scaler& scaler, const TrainArgs& args) {
  FitOutcome outcome;
  outcome.model.kind = kind;
  outcome.model.spec = spec;
  outcome.model.scaler = scaler;
  outcome.model.split_seed = splits.seed;
  outcome.model.split_fractions = splits.fractions;

  if (is_neural(kind)) {
    HybridConfig cfg = HybridConfig::from_preset(args.preset);
    if (args.dropout) cfg.dropout = *args.dropout;
    SeededRng init_rng(derive_seed(args.seed, 0));
    ModelParams params = ModelParams::init(kind, cfg, spec, init_rng);

    auto encode_split = [&](const std::vector<std::size_t>& idx) {
      NeuralDataset ds;
      for (std::size_t i : idx) {
        ds.records.push_back(encode_record(records[i], spec, scaler));
        ds.targets_std.push_back(scaler.transform_target(records[i].memory_usage_mb));
      }
      return ds;
    };
    const NeuralDataset train_ds = encode_split(splits.train);
    const NeuralDataset val_ds = encode_split(splits.val);

    TrainConfig cfg_train;
    cfg_train.epochs = args.epochs.value_or(200);
    cfg_train.batch_size = args.batch_size.value_or(32);
    cfg_train.learning_rate = args.learning_rate.value_or(1e-3);
    cfg_train.seed = args.seed;
    cfg_train.early_stop_patience = args.patience;
    cfg_train.clip_max_norm = args.clip_norm;
    outcome.history = train_neural(params, train_ds, val_ds, cfg_train);
    outcome.model.neural = std::move(params);
    return outcome;
  }

  const DesignMatrix m = tree_design_matrix(records, splits.train, spec, scaler);
  switch (kind) {
    case ModelKind::Cart: {
      CartOptions opts;
      opts.max_depth = args.max_depth.value_or(8);
      opts.min_samples_leaf = args.min_leaf.value_or(2);
      outcome.model.cart = cart_fit(m.rows, m.targets, opts);
      break;
    }
    case ModelKind::RandomForest: {
      RfOptions opts;
      opts.n_trees = args.n_trees.value_or(100);
      opts.max_depth = args.max_depth.value_or(8);
      opts.min_samples_leaf = args.min_leaf.value_or(2);
      opts.feature_fraction = args.feature_fraction;
      opts.seed = args.seed;
      outcome.model.forest = rf_fit(m.rows, m.targets, opts);
      break;
    }
    case ModelKind::Adaboost: {
      AdaboostOptions opts;
      opts.n_rounds = args.n_rounds.value_or(50);
      opts.max_depth = args.max_depth.value_or(3);
      opts.seed = args.seed;
      outcome.model.adaboost = adaboost_r2_fit(m.rows, m.targets, opts);
      break;
    }
    case ModelKind::Gbt: {
      GbtOptions opts;
      opts.n_rounds = args.n_rounds.value_or(100);
      opts.max_depth = args.max_depth.value_or(4);
      opts.eta = args.eta.value_or(0.1);
      opts.lambda = args.lambda.value_or(1.0);
      opts.gamma = args.gamma.value_or(0.0);
      outcome.model.gbt = gbt_fit(m.rows, m.targets, opts);
      break;
    }
    default:
      throw ConfigError("fit_model: unhandled kind");
  }
  return outcome;
}

inline void warn_ignored_neural_flags(const TrainArgs& args, ModelKind kind, std::ostream& err) {
  if (is_neural(kind)) return;
  auto warn = [&](bool set, const char* flag) {
    if (set)
      err << "warning: " << flag << " does not apply to --model " << model_kind_name(kind)
          << "; ignored\n";
  };
  warn(args.epochs.has_value(), "--epochs");
  warn(args.batch_size.has_value(), "--batch-size");
  warn(args.learning_rate.has_value(), "--lr");
  warn(args.patience.has_value(), "--patience");
  warn(args.clip_norm.has_value(), "--clip-norm");
  warn(args.dropout.has_value(), "--dropout");
}

}  // namespace detail

inline int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  return guard_command(
      [&]() {
        if (args.data.empty() || args.out.empty())
          throw ConfigError("train: --data and --out are required");
        const ModelKind kind = model_kind_from_name(args.model);
        detail::warn_ignored_neural_flags(args, kind, err);

        LoadResult loaded = load_csv(args.data);
        for (const std::string& w : loaded.warnings) err << "warning: " << w << '\n';
        const FeatureSpec spec = FeatureSpec::canonical(loaded.records);
        const DatasetSplits splits =
            split_dataset(loaded.records.size(), args.fractions, args.seed);
        const Scaler scaler = fit_scaler(loaded.records, splits.train);

        detail::FitOutcome outcome =
            detail::fit_model(kind, loaded.records, splits, spec, scaler, args);
        save_checkpoint(args.out, outcome.model);
        const std::string history_path =
            args.history.empty() ? args.out + ".history.csv" : args.history;
        detail::write_history_csv(history_path, outcome.history, args.timing);

        out << "trained " << model_kind_name(kind) << " on " << splits.train.size()
            << " rows; checkpoint " << args.out << '\n';
        if (!outcome.history.train_loss.empty()) {
          out << "final train loss (standardized): "
              << detail::full_precision(outcome.history.train_loss.back()) << '\n';
          if (!std::isnan(outcome.history.val_loss.back()))
            out << "best val loss (standardized): "
                << detail::full_precision(
                       outcome.history.val_loss[outcome.history.best_epoch])
                << " at epoch " << (outcome.history.best_epoch + 1) << '\n';
        }
        return kExitOk;
      },
      err);
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string ckpt;
  std::string data;
  std::string split = "test";  // train | val | test | all
  std::string out_csv;         // optional full-precision CSV row
};

namespace detail {

inline std::vector<std::size_t> select_split(const DatasetSplits& splits, const std::string& name,
                                             std::size_t n) {
  if (name == "train") return splits.train;
  if (name == "val") return splits.val;
  if (name == "test") return splits.test;
  if (name == "all") {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    return all;
  }
  throw ConfigError("eval: unknown split '" + name + "' (expected train|val|test|all)");
}

inline void print_metrics_row(const MetricsReport& r, std::ostream& out) {
  out << std::left << std::setw(16) << r.model << std::right << std::setw(12) << fixed3(r.mse)
      << std::setw(12) << fixed3(r.rmse) << std::setw(12) << fixed3(r.mae) << std::setw(12)
      << fixed3(r.mape_percent) << std::setw(12) << r2_cell(r, false) << '\n';
}

inline void write_metrics_csv(const std::string& path, const MetricsReport& r) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os << "model,mse,rmse,mae,mape,r2,n\n";
  os << r.model << ',' << full_precision(r.mse) << ',' << full_precision(r.rmse) << ','
     << full_precision(r.mae) << ',' << full_precision(r.mape_percent) << ','
     << (r.r2 ? full_precision(*r.r2) : "") << ',' << r.n << '\n';
}

}  // namespace detail

inline int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  return guard_command(
      [&]() {
        if (args.ckpt.empty() || args.data.empty())
          throw ConfigError("eval: --ckpt and --data are required");
        const TrainedModel model = load_checkpoint(args.ckpt);
        LoadResult loaded = load_csv(args.data);
        for (const std::string& w : loaded.warnings) err << "warning: " << w << '\n';
        require_schema_match(model.spec, FeatureSpec::canonical(loaded.records));

        const DatasetSplits splits =
            split_dataset(loaded.records.size(), model.split_fractions, model.split_seed);
        const std::vector<std::size_t> idx =
            detail::select_split(splits, args.split, loaded.records.size());

        std::vector<TaskRecord> subset;
        std::vector<double> y_true;
        for (std::size_t i : idx) {
          subset.push_back(loaded.records[i]);
          y_true.push_back(loaded.records[i].memory_usage_mb);
        }
        const std::vector<double> y_pred = model.predict_mb(subset);
        const MetricsReport rep = compute_metrics(y_true, y_pred, model_kind_name(model.kind));

        out << std::left << std::setw(16) << "Model" << std::right << std::setw(12) << "MSE"
            << std::setw(12) << "RMSE" << std::setw(12) << "MAE" << std::setw(12) << "MAPE"
            << std::setw(12) << "R²" << '\n';
        detail::print_metrics_row(rep, out);
        if (rep.n_mape_excluded > 0)
          out << "(MAPE computed over " << (rep.n - rep.n_mape_excluded) << " of " << rep.n
              << " samples; " << rep.n_mape_excluded << " near-zero targets excluded)\n";
        if (!args.out_csv.empty()) detail::write_metrics_csv(args.out_csv, rep);
        return kExitOk;
      },
      err);
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string ckpt;
  std::string input;  // CSV without the target column
  std::string out;
};

inline int cmd_predict(const PredictArgs& args, std::ostream& out, std::ostream& err) {
  return guard_command(
      [&]() {
        if (args.ckpt.empty() || args.input.empty() || args.out.empty())
          throw ConfigError("predict: --ckpt, --input and --out are required");
        const TrainedModel model = load_checkpoint(args.ckpt);
        LoadResult loaded = load_csv(args.input, /*with_target=*/false);
        for (const std::string& w : loaded.warnings) err << "warning: " << w << '\n';

        // Validate all category values first and report every bad row.
        bool vocab_ok = true;
        for (std::size_t i = 0; i < loaded.records.size(); ++i) {
          for (const FeatureDesc& f : model.spec.features) {
            if (f.kind != FeatureKind::Categorical) continue;
            const std::string value = categorical_feature_value(loaded.records[i], f.name);
            bool known = false;
            for (const std::string& v : f.vocab) known = known || v == value;
            if (!known) {
              err << "row " << (i + 1) << ": feature '" << f.name << "': unknown category '"
                  << value << "'\n";
              vocab_ok = false;
            }
          }
        }
        if (!vocab_ok) throw VocabError("predict: input contains out-of-vocabulary categories");

        std::vector<double> preds;
        if (!loaded.records.empty()) preds = model.predict_mb(loaded.records);

        std::ofstream os(args.out, std::ios::binary);
        if (!os) throw IoError("cannot write " + args.out);
        for (std::size_t c = 0; c < kCsvColumns.size(); ++c) {
          if (kCsvColumns[c] == "memory_usage_mb") continue;
          os << kCsvColumns[c] << ',';
        }
        os << "predicted_memory_mb\n";
        for (std::size_t i = 0; i < loaded.records.size(); ++i) {
          const TaskRecord& r = loaded.records[i];
          os << r.task_type << ',' << r.model_arch << ',' << r.input_dim << ',' << r.batch_size
             << ',' << r.num_layers << ',' << r.num_parameters << ',' << r.precision_encoded << ','
             << detail::format_double(r.parameters_per_layer) << ','
             << detail::format_double(preds[i]) << '\n';
        }
        out << "wrote " << loaded.records.size() << " predictions to " << args.out << '\n';
        return kExitOk;
      },
      err);
}

// ---------------------------------------------------------------------------
// benchmark
// ---------------------------------------------------------------------------

struct BenchmarkArgs {
  std::string data;
  std::uint64_t seed = 0;
  std::string preset = "tiny";
  std::string out_dir;
  std::size_t jobs = 1;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> learning_rate;
};

inline int cmd_benchmark(const BenchmarkArgs& args, std::ostream& out, std::ostream& err) {
  return guard_command(
      [&]() {
        if (args.data.empty() || args.out_dir.empty())
          throw ConfigError("benchmark: --data and --out are required");
        LoadResult loaded = load_csv(args.data);
        for (const std::string& w : loaded.warnings) err << "warning: " << w << '\n';
        const FeatureSpec spec = FeatureSpec::canonical(loaded.records);
        const DatasetSplits splits =
            split_dataset(loaded.records.size(), {0.7, 0.15, 0.15}, args.seed);
        const Scaler scaler = fit_scaler(loaded.records, splits.train);

        std::vector<TaskRecord> test_records;
        std::vector<double> y_true;
        for (std::size_t i : splits.test) {
          test_records.push_back(loaded.records[i]);
          y_true.push_back(loaded.records[i].memory_usage_mb);
        }

        struct Job {
          ModelKind kind;
          const char* display;
        };
        const std::vector<Job> jobs_list = {
            {ModelKind::Cart, "decision-tree"},   {ModelKind::RandomForest, "random-forest"},
            {ModelKind::Adaboost, "adaboost"},    {ModelKind::Gbt, "gbt"},
            {ModelKind::Hybrid, "hybrid"},        {ModelKind::Transformer, "transformer"}};

        struct JobResult {
          bool ok = false;
          MetricsReport metrics;
          std::string error;
        };

        auto run_one = [&](std::size_t j) {
          JobResult res;
          try {
            TrainArgs fit_args;
            fit_args.preset = args.preset;
            // Per-model seed fixed in advance: results are identical whether
            // jobs run sequentially or in parallel.
            fit_args.seed = derive_seed(args.seed, 100 + j);
            fit_args.epochs = args.epochs;
            fit_args.batch_size = args.batch_size;
            fit_args.learning_rate = args.learning_rate;
            detail::FitOutcome outcome =
                detail::fit_model(jobs_list[j].kind, loaded.records, splits, spec, scaler, fit_args);
            res.metrics =
                compute_metrics(y_true, outcome.model.predict_mb(test_records), jobs_list[j].display);
            res.ok = true;
          } catch (const std::exception& e) {
            res.error = e.what();
          }
          return res;
        };

        std::vector<JobResult> results(jobs_list.size());
        if (args.jobs <= 1) {
          for (std::size_t j = 0; j < jobs_list.size(); ++j) results[j] = run_one(j);
        } else {
          std::vector<std::future<JobResult>> futures;
          for (std::size_t j = 0; j < jobs_list.size(); ++j)
            futures.push_back(std::async(std::launch::async, run_one, j));
          for (std::size_t j = 0; j < jobs_list.size(); ++j) results[j] = futures[j].get();
        }

        BenchmarkReport rep;
        for (std::size_t j = 0; j < jobs_list.size(); ++j) {
          const bool ablation_only = jobs_list[j].kind == ModelKind::Transformer;
          if (!results[j].ok) {
            rep.failed.push_back(jobs_list[j].display);
            err << "error: model " << jobs_list[j].display << " failed: " << results[j].error
                << '\n';
            continue;
          }
          if (!ablation_only) rep.table.push_back(results[j].metrics);
        }
        // Ablation pair: plain transformer vs the hybrid, same splits/seed.
        for (std::size_t j = 0; j < jobs_list.size(); ++j) {
          if (jobs_list[j].kind == ModelKind::Transformer && results[j].ok)
            rep.ablation.push_back(results[j].metrics);
        }
        for (std::size_t j = 0; j < jobs_list.size(); ++j) {
          if (jobs_list[j].kind == ModelKind::Hybrid && results[j].ok)
            rep.ablation.push_back(results[j].metrics);
        }

        std::filesystem::create_directories(args.out_dir);
        auto write_file = [&](const std::string& name, const std::string& content) {
          std::ofstream os(std::filesystem::path(args.out_dir) / name, std::ios::binary);
          if (!os) throw IoError("cannot write " + name + " in " + args.out_dir);
          os << content;
        };
        write_file("report.txt", render_text(rep));
        write_file("report.csv", render_csv(rep));
        write_file("report.md", render_markdown(rep));
        std::vector<std::pair<std::string, double>> mse_bars, rmse_bars;
        for (const MetricsReport& r : rep.table) {
          mse_bars.emplace_back(r.model, r.mse);
          rmse_bars.emplace_back(r.model, r.rmse);
        }
        write_file("mse.svg", render_svg_bars("MSE by model", mse_bars));
        write_file("rmse.svg", render_svg_bars("RMSE by model", rmse_bars));

        out << render_text(rep);
        out << "\nreports written to " << args.out_dir << '\n';
        return rep.failed.empty() ? kExitOk : kExitPartial;
      },
      err);
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::size_t n_seeds = 3;
  std::string sabotage;  // hidden: negative-control unit name
};

inline int cmd_gradcheck(const GradcheckArgs& args, std::ostream& out, std::ostream& err) {
  return guard_command(
      [&]() {
        const auto results = run_gradcheck_suite(args.seed, args.n_seeds, args.sabotage);
        bool all_passed = true;
        out << std::left << std::setw(24) << "unit" << std::setw(16) << "max_rel_err"
            << "status\n";
        for (const GradcheckUnitResult& r : results) {
          std::ostringstream e;
          e << std::scientific << std::setprecision(3) << r.max_rel_err;
          out << std::left << std::setw(24) << r.name << std::setw(16) << e.str()
              << (r.passed ? "PASS" : "FAIL") << '\n';
          all_passed = all_passed && r.passed;
        }
        if (!all_passed) {
          err << "error: gradient check failed\n";
          return kExitGradcheck;
        }
        return kExitOk;
      },
      err);
}

}  // namespace bgtf
