// metaal: experiment runner for learned single-shot label acquisition.
//
//   metaal run --dataset data/letter.csv --budgets 2,4,6 --out runs/letter
//   metaal compare runs/a/results.csv runs/b/results.csv [--json out.json]
//   metaal gen-synthetic --classes 40 --per-class 100 --features 16 --out synth.csv
//   metaal replay runs/letter/manifest.json --out runs/letter-replay
//
// Exit codes: 0 ok, 1 runtime failure, 2 configuration or validation error.
// Log verbosity: METAAL_LOG_LEVEL=trace|debug|info|warn|error|off (default info).

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "metaal/experiment.hpp"

namespace {

using namespace metaal;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("metaal");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S] %^%l%$ %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("METAAL_LOG_LEVEL")) spdlog::set_level(spdlog::level::from_str(env));
}

struct RunFlags {
  experiment::RunConfig cfg;
  std::string format = "csv";
  std::vector<std::size_t> split{10, 7, 9};
  std::vector<std::size_t> problems{2000, 500, 500};
  std::vector<std::string> strategies{"random", "kmedoids", "policy"};
  std::string similarity = "euclidean";
  std::string optimizer = "sgd";
  std::string out;
  bool no_baseline = false;
  bool no_baseline_embedder = false;
  bool random_policy_init = false;
  bool no_shuffle_pool = false;
};

void add_run_options(CLI::App& app, RunFlags& f) {
  auto& c = f.cfg;
  app.add_option("--dataset", c.dataset, "Dataset file")->required();
  app.add_option("--format", f.format, "csv or libsvm")->capture_default_str();
  app.add_option("--label-column", c.csv.label_column, "CSV label column; negative counts from the end")
      ->capture_default_str();
  app.add_option("--label-name", c.csv.label_name, "CSV label column by header name (implies --header)");
  app.add_flag("--header", c.csv.header, "CSV has a header row");
  app.add_option("--dataset-name", c.dataset_name, "Name used in result rows (default: file stem)");
  app.add_option("--split", f.split, "Class counts train,validation,test")->delimiter(',')->capture_default_str();
  app.add_option("--classes-per-problem", c.shape.classes_per_problem, "P")->capture_default_str();
  app.add_option("--pool-size", c.shape.pool_size, "N")->capture_default_str();
  app.add_option("--eval-size", c.shape.eval_size, "M")->capture_default_str();
  app.add_option("--problems", f.problems, "Problem counts train,validation,test")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--strategy", f.strategies, "random, kmedoids and/or policy (comma separated)")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--budgets", c.budgets, "Budgets k (comma separated)")->delimiter(',')->capture_default_str();
  app.add_option("--similarity", f.similarity, "cosine or euclidean")->capture_default_str();
  app.add_option("--temperature", c.train.temperature, "Softmax temperature (multiplies similarities)")
      ->capture_default_str();
  app.add_option("--embed-dim", c.embed_dim, "Latent dimension of f; 0 = raw features")->capture_default_str();
  app.add_option("--embed-hidden", c.embed_hidden, "Hidden layer widths of f")->delimiter(',');
  app.add_option("--embed-activation", c.embed_activation, "Hidden activation of f")->capture_default_str();
  app.add_option("--hidden-dim", c.hidden_dim, "LSTM hidden size of the policy")->capture_default_str();
  app.add_option("--lr", c.train.learning_rate, "Learning rate")->capture_default_str();
  app.add_option("--optimizer", f.optimizer, "sgd or adam")->capture_default_str();
  app.add_option("--clip", c.train.clip_norm, "Gradient-norm clip; 0 disables")->capture_default_str();
  app.add_option("--episodes", c.train.episodes, "Training episodes per budget")->capture_default_str();
  app.add_option("--mc-samples", c.train.mc_samples, "Monte-Carlo histories per episode")->capture_default_str();
  app.add_option("--lambda", c.train.lambda, "Labeling cost weight")->capture_default_str();
  app.add_option("--eval-interval", c.train.eval_interval, "Episodes between validation passes")
      ->capture_default_str();
  app.add_option("--eval-seeds", c.train.eval_seeds, "Mask draws per validation problem")->capture_default_str();
  app.add_option("--test-seeds", c.test_seeds, "Mask draws per test problem")->capture_default_str();
  app.add_option("--baseline-decay", c.train.baseline_decay, "EMA decay of the reward baseline")
      ->capture_default_str();
  app.add_option("--threads", c.train.threads, "Evaluation threads")->capture_default_str();
  app.add_option("--seed", c.seed, "Master seed")->capture_default_str();
  app.add_option("--out", f.out, "Output directory")->required();
  app.add_flag("--balanced", c.shape.balanced, "Stratify pool and eval sets by class");
  app.add_flag("--standardize", c.standardize, "z-score features using train-class statistics");
  app.add_flag("--with-replacement", c.train.with_replacement, "Policy samples with replacement");
  app.add_flag("--no-baseline", f.no_baseline, "Disable the reward baseline");
  app.add_flag("--batch-baseline", c.train.batch_baseline,
               "Baseline each history with the mean loss of the other histories of its problem");
  app.add_flag("--no-baseline-embedder", f.no_baseline_embedder, "Do not train f for the random/k-medoids baselines");
  app.add_flag("--random-policy-init", f.random_policy_init, "Random policy head instead of the uniform start");
  app.add_flag("--no-shuffle-pool", f.no_shuffle_pool, "Keep pool order fixed during policy training");
}

// Converts flag strings into the config, collecting every problem.
std::vector<std::string> finish(RunFlags& f) {
  std::vector<std::string> errs;
  auto& c = f.cfg;
  try {
    c.format = data::parse_format(f.format);
  } catch (const std::exception& e) {
    errs.push_back(std::string("--format: ") + e.what());
  }
  try {
    c.train.similarity = predictor::parse_similarity(f.similarity);
  } catch (const std::exception& e) {
    errs.push_back(std::string("--similarity: ") + e.what());
  }
  try {
    c.train.optimizer = trainer::parse_optimizer(f.optimizer);
  } catch (const std::exception& e) {
    errs.push_back(std::string("--optimizer: ") + e.what());
  }
  c.strategies.clear();
  for (const auto& s : f.strategies) {
    try {
      c.strategies.push_back(selector::parse_strategy(s));
    } catch (const std::exception& e) {
      errs.push_back(std::string("--strategy: ") + e.what());
    }
  }
  if (f.split.size() == 3) {
    c.partition = {f.split[0], f.split[1], f.split[2]};
  } else {
    errs.push_back("--split: expected three counts train,validation,test");
  }
  if (f.problems.size() == 3) {
    c.problems = {f.problems[0], f.problems[1], f.problems[2]};
  } else {
    errs.push_back("--problems: expected three counts train,validation,test");
  }
  if (!c.csv.label_name.empty()) c.csv.header = true;
  c.out = f.out;
  c.train.use_baseline = !f.no_baseline;
  c.train_baseline_embedder = !f.no_baseline_embedder;
  c.policy_zero_init = !f.random_policy_init;
  c.train.shuffle_pool = !f.no_shuffle_pool;
  for (auto& e : c.check()) errs.push_back(std::move(e));
  return errs;
}

int report_config_errors(const std::vector<std::string>& errs) {
  for (const auto& e : errs) std::cerr << "error: " << e << '\n';
  return 2;
}

void print_rows(const std::vector<experiment::ResultRow>& rows) {
  std::cout << experiment::results_header() << '\n';
  for (const auto& r : rows) std::cout << experiment::format_row(r) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Learned single-shot label acquisition: train, evaluate and compare selection strategies"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "Train and evaluate strategies across budgets");
  add_run_options(*run, run_flags);

  std::vector<std::string> compare_files;
  std::string compare_json;
  auto* cmp = app.add_subcommand("compare", "Pivot results.csv files into a budget x strategy table");
  cmp->add_option("files", compare_files, "results.csv files")->required();
  cmp->add_option("--json", compare_json, "Also write the table as JSON to this path");

  experiment::SyntheticSpec synth;
  std::string synth_out;
  auto* gen = app.add_subcommand("gen-synthetic", "Write a Gaussian-cluster dataset as CSV");
  gen->add_option("--classes", synth.classes)->capture_default_str();
  gen->add_option("--per-class", synth.per_class)->capture_default_str();
  gen->add_option("--features", synth.features, "Feature dimension K")->capture_default_str();
  gen->add_option("--spread", synth.spread, "Cluster standard deviation")->capture_default_str();
  gen->add_option("--seed", synth.seed)->capture_default_str();
  gen->add_option("--out", synth_out, "Output CSV path")->required();

  std::string manifest, replay_out;
  auto* rep = app.add_subcommand("replay", "Re-run a manifest into a new output directory");
  rep->add_option("manifest", manifest, "manifest.json of an earlier run")->required();
  rep->add_option("--out", replay_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*run) {
      const auto errs = finish(run_flags);
      if (!errs.empty()) return report_config_errors(errs);
      const auto outputs = experiment::run_experiment(run_flags.cfg);
      print_rows(outputs.rows);
      spdlog::info("wrote {} and {}", outputs.results_csv.string(), outputs.manifest.string());
    } else if (*cmp) {
      std::vector<std::filesystem::path> paths(compare_files.begin(), compare_files.end());
      const auto table = experiment::compare(paths);
      std::cout << experiment::format_table(table);
      if (!compare_json.empty()) {
        std::ofstream f(compare_json);
        if (!f) throw std::runtime_error("cannot write " + compare_json);
        f << experiment::to_json(table).dump(2) << '\n';
      }
    } else if (*gen) {
      if (synth.classes == 0 || synth.per_class == 0 || synth.features == 0 || !(synth.spread >= 0.0)) {
        return report_config_errors({"gen-synthetic: classes, per-class and features must be positive, spread >= 0"});
      }
      experiment::gen_synthetic(synth, synth_out);
      spdlog::info("wrote {} rows to {}", synth.classes * synth.per_class, synth_out);
    } else if (*rep) {
      const auto outputs = experiment::replay(manifest, replay_out);
      print_rows(outputs.rows);
    }
  } catch (const experiment::ConfigError& e) {
    return report_config_errors(e.problems());
  } catch (const experiment::CompareError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const data::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const trainer::TrainingAborted& e) {
    std::cerr << "error: training aborted: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
