#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "metaal/data.hpp"
#include "metaal/selector.hpp"
#include "metaal/trainer.hpp"

namespace metaal::experiment {

inline constexpr int kResultsSchemaVersion = 1;

/// Invalid run configuration; carries every problem found, not just the first.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct RunConfig {
  std::string dataset;
  data::Format format = data::Format::csv;
  data::CsvOptions csv;
  /// Label used in result rows; defaults to the dataset file stem.
  std::string dataset_name;

  data::PartitionCounts partition{10, 7, 9};
  data::ProblemShape shape{2, 25, 40, false};
  data::SuiteCounts problems{2000, 500, 500};
  std::vector<selector::Strategy> strategies{selector::Strategy::random, selector::Strategy::kmedoids,
                                             selector::Strategy::policy};
  std::vector<std::size_t> budgets{1, 2, 3, 4, 5, 6};

  /// budget, strategy and seed are filled per run; the rest applies to every training.
  trainer::TrainConfig train;
  /// Latent dimension L of f; 0 disables the representation (f = identity).
  std::size_t embed_dim = 16;
  std::vector<std::size_t> embed_hidden;
  std::string embed_activation = "tanh";
  std::size_t hidden_dim = 16;
  /// Train f for the random and k-medoids baselines too (only f is learned for them).
  bool train_baseline_embedder = true;
  /// Start the policy head at zero, i.e. from the uniform (random) selection distribution.
  bool policy_zero_init = true;
  /// Mask draws per test problem.
  std::size_t test_seeds = 1;
  bool standardize = false;

  std::filesystem::path out;
  std::uint64_t seed = 0;

  trainer::ModelSpec model_spec(std::size_t input_dim) const;
  /// Field-level checks that do not need the dataset.
  std::vector<std::string> check() const;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

/// Checks that need the data: class counts per split, N+M feasibility, budgets <= N.
std::vector<std::string> check_against(const RunConfig& cfg, const data::BaseDataset& ds);

struct ResultRow {
  std::string dataset;
  std::size_t classes_per_problem = 0;
  std::size_t budget = 0;
  std::string strategy;
  std::string split;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  std::size_t n_problems = 0;
  std::uint64_t seed = 0;
};

std::string results_header();
std::string format_row(const ResultRow& r);
std::vector<ResultRow> read_results(const std::filesystem::path& path);

struct RunOutputs {
  std::vector<ResultRow> rows;
  std::filesystem::path results_csv;
  std::filesystem::path manifest;
  std::filesystem::path train_log;
};

/// Loads data, builds the problem suite and, for every budget and strategy,
/// trains (policy, plus f for baselines when a representation is used),
/// keeps the best-on-validation parameters and evaluates on test problems.
RunOutputs run_experiment(const RunConfig& cfg);

/// Re-runs a manifest into `out` using its recorded configuration and problem suite.
RunOutputs replay(const std::filesystem::path& manifest, const std::filesystem::path& out);

struct CompareTable {
  /// Column labels: strategies, suffixed with the file number when two files share one.
  std::vector<std::string> columns;
  struct Row {
    std::string dataset;
    std::size_t classes_per_problem = 0;
    std::string split;
    std::size_t budget = 0;
    std::vector<std::optional<double>> values;
  };
  std::vector<Row> rows;
  /// (a, b) column pairs; delta = b - a.
  std::vector<std::pair<std::size_t, std::size_t>> deltas;
};

/// Raised for empty inputs or schema mismatches (CLI exit code 2).
class CompareError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

CompareTable compare(const std::vector<std::filesystem::path>& paths);
std::string format_table(const CompareTable& t);
nlohmann::json to_json(const CompareTable& t);

struct SyntheticSpec {
  std::size_t classes = 40;
  std::size_t per_class = 100;
  std::size_t features = 16;
  double spread = 0.5;
  std::uint64_t seed = 0;
};

/// One isotropic Gaussian cluster per class, means uniform in [-1, 1]^K.
/// CSV rows: K features then the label "c<j>".
void gen_synthetic(const SyntheticSpec& spec, const std::filesystem::path& path);

}  // namespace metaal::experiment
