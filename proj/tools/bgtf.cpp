// bgtf — GPU-memory requirement prediction toolkit.
//
// Subcommands: gen-data, train, eval, predict, benchmark, gradcheck.
// The default seed for every subcommand can be set via the BGTF_SEED
// environment variable; an explicit --seed always wins.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bgtf/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"GPU memory requirement prediction: BiGRU+Transformer regressor and tree baselines"};
  app.require_subcommand(1);

  bgtf::GenDataArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-data", "Generate a synthetic task dataset CSV");
  gen->add_option("--n", gen_args.n, "Number of rows")->capture_default_str();
  gen->add_option("--seed", gen_args.seed, "Generator seed")->envname("BGTF_SEED");
  gen->add_option("--out", gen_args.out, "Output CSV path")->required();

  bgtf::TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  train->add_option("--data", train_args.data, "Training CSV")->required();
  train->add_option("--model", train_args.model, "hybrid|transformer|cart|rf|adaboost|gbt")
      ->capture_default_str();
  train->add_option("--preset", train_args.preset, "paper|tiny (neural models)")
      ->capture_default_str();
  train->add_option("--seed", train_args.seed, "Seed for split/init/shuffle")->envname("BGTF_SEED");
  train->add_option("--out", train_args.out, "Checkpoint output path")->required();
  train->add_option("--history", train_args.history, "History CSV path (default <out>.history.csv)");
  train->add_option("--split-fractions", train_args.fractions, "train val test fractions")
      ->expected(3);
  train->add_flag("--timing", train_args.timing, "Record wall time in the history CSV");
  train->add_option("--epochs", train_args.epochs, "Training epochs (default 200)");
  train->add_option("--batch-size", train_args.batch_size, "Mini-batch size (default 32)");
  train->add_option("--lr", train_args.learning_rate, "Adam learning rate (default 1e-3)");
  train->add_option("--patience", train_args.patience, "Early-stop patience (default off)");
  train->add_option("--clip-norm", train_args.clip_norm, "Global-norm gradient clip (default off)");
  train->add_option("--dropout", train_args.dropout, "Dropout override (default per preset)");
  train->add_option("--max-depth", train_args.max_depth, "Tree depth cap");
  train->add_option("--min-leaf", train_args.min_leaf, "Minimum samples per leaf");
  train->add_option("--n-trees", train_args.n_trees, "Forest size (rf)");
  train->add_option("--n-rounds", train_args.n_rounds, "Boosting rounds (adaboost/gbt)");
  train->add_option("--eta", train_args.eta, "GBT shrinkage");
  train->add_option("--lambda", train_args.lambda, "GBT L2 leaf regularization");
  train->add_option("--gamma", train_args.gamma, "GBT split penalty");
  train->add_option("--feature-fraction", train_args.feature_fraction,
                    "RF features per split (default 1/sqrt(F))");

  bgtf::EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  eval->add_option("--ckpt", eval_args.ckpt, "Checkpoint path")->required();
  eval->add_option("--data", eval_args.data, "Dataset CSV")->required();
  eval->add_option("--split", eval_args.split, "train|val|test|all")->capture_default_str();
  eval->add_option("--out", eval_args.out_csv, "Optional full-precision CSV output");

  bgtf::PredictArgs predict_args;
  CLI::App* predict = app.add_subcommand("predict", "Predict memory for a target-free CSV");
  predict->add_option("--ckpt", predict_args.ckpt, "Checkpoint path")->required();
  predict->add_option("--input", predict_args.input, "Input CSV without memory_usage_mb")->required();
  predict->add_option("--out", predict_args.out, "Predictions CSV path")->required();

  bgtf::BenchmarkArgs bench_args;
  CLI::App* bench = app.add_subcommand(
      "benchmark", "Train all baselines plus both neural models on one split and report");
  bench->add_option("--data", bench_args.data, "Dataset CSV")->required();
  bench->add_option("--seed", bench_args.seed, "Split/per-model seed")->envname("BGTF_SEED");
  bench->add_option("--preset", bench_args.preset, "Neural preset")->capture_default_str();
  bench->add_option("--out", bench_args.out_dir, "Output directory")->required();
  bench->add_option("--jobs", bench_args.jobs, "Parallel model fits (1 = reference order)")
      ->capture_default_str();
  bench->add_option("--epochs", bench_args.epochs, "Neural epochs (default 200)");
  bench->add_option("--batch-size", bench_args.batch_size, "Neural batch size");
  bench->add_option("--lr", bench_args.learning_rate, "Neural learning rate");

  bgtf::GradcheckArgs grad_args;
  CLI::App* grad = app.add_subcommand("gradcheck", "Finite-difference check of every layer");
  grad->add_option("--seed", grad_args.seed, "Base seed")->envname("BGTF_SEED");
  grad->add_option("--seeds", grad_args.n_seeds, "Seed count")->capture_default_str();
  grad->add_option("--sabotage", grad_args.sabotage, "Corrupt a unit's gradient (negative control)")
      ->group("");  // hidden

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return bgtf::kExitUsage;
  }

  if (gen->parsed()) return bgtf::cmd_gen_data(gen_args, std::cout, std::cerr);
  if (train->parsed()) return bgtf::cmd_train(train_args, std::cout, std::cerr);
  if (eval->parsed()) return bgtf::cmd_eval(eval_args, std::cout, std::cerr);
  if (predict->parsed()) return bgtf::cmd_predict(predict_args, std::cout, std::cerr);
  if (bench->parsed()) return bgtf::cmd_benchmark(bench_args, std::cout, std::cerr);
  if (grad->parsed()) return bgtf::cmd_gradcheck(grad_args, std::cout, std::cerr);
  return bgtf::kExitUsage;
}
