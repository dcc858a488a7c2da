#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "metaal/experiment.hpp"
#include "metaal/nn/checkpoint.hpp"
#include "metaal/random.hpp"

namespace metaal::experiment {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kPartitionStream = 0x70617274ULL;
constexpr std::uint64_t kSuiteStream = 0x73756974ULL;
constexpr std::uint64_t kModelStream = 0x6d6f646cULL;
constexpr std::uint64_t kTrainerStream = 0x74726e72ULL;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

// Appends rows to results.csv, writing the header when the file is new.
void append_results(const fs::path& path, const std::vector<ResultRow>& rows) {
  bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  if (!fresh) {
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    if (first != results_header()) {
      throw ConfigError({"--out: existing " + path.string() + " has a different results schema"});
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::app);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  if (fresh) f << results_header() << '\n';
  for (const auto& r : rows) f << format_row(r) << '\n';
}

std::string dataset_label(const RunConfig& cfg) {
  return cfg.dataset_name.empty() ? fs::path(cfg.dataset).stem().string() : cfg.dataset_name;
}

data::BaseDataset load(const RunConfig& cfg) {
  if (!fs::exists(cfg.dataset)) throw ConfigError({"--dataset: file not found: " + cfg.dataset});
  return data::load_dataset(cfg.dataset, cfg.format, cfg.csv);
}

data::BaseDataset prepare(const RunConfig& cfg, const data::BaseDataset& raw, const data::ClassPartition& part) {
  return cfg.standardize ? raw.standardized(part.train) : raw;
}

RunOutputs run_with(const RunConfig& cfg, const data::BaseDataset& ds, const data::ClassPartition& partition,
                    const data::ProblemSuite& suite, std::uint64_t fingerprint) {
  fs::create_directories(cfg.out);
  fs::create_directories(cfg.out / "checkpoints");

  RunOutputs outputs;
  outputs.results_csv = cfg.out / "results.csv";
  outputs.manifest = cfg.out / "manifest.json";
  outputs.train_log = cfg.out / "train_log.csv";

  const auto spec = cfg.model_spec(ds.feature_dim());
  const auto label = dataset_label(cfg);
  const bool has_embedder = !spec.embedder.widths.empty();

  nlohmann::json runs = nlohmann::json::array();
  std::string log_text = trainer::train_log_header() + "\n";

  for (std::size_t budget : cfg.budgets) {
    for (auto strategy : cfg.strategies) {
      const auto name = selector::to_string(strategy);
      trainer::TrainConfig tc = cfg.train;
      tc.budget = budget;
      tc.strategy = strategy;
      tc.seed = derive_seed(cfg.seed, kTrainerStream, budget * 8 + static_cast<std::uint64_t>(strategy));

      trainer::Model model = trainer::Model::create(spec, derive_seed(cfg.seed, kModelStream));
      if (cfg.policy_zero_init) model.zero_policy_head();

      const bool train_it = strategy == selector::Strategy::policy ||
                            (has_embedder && cfg.train_baseline_embedder && tc.episodes > 0);
      nlohmann::json run = {{"strategy", name}, {"budget", budget}, {"trained", train_it}};

      ResultRow val_row{label, cfg.shape.classes_per_problem, budget, name, "validation", 0.0, 0.0,
                        suite.validation.size(), cfg.seed};
      if (train_it) {
        spdlog::info("training {} at budget {} for {} episodes", name, budget, tc.episodes);
        auto res = trainer::train(ds, suite.train, suite.validation, model, tc);
        model = std::move(res.best);
        for (const auto& row : res.log) {
          log_text += trainer::format_log_row(row) + "\n";
          if (row.episode == res.best_episode) {
            val_row.accuracy_mean = row.accuracy_mean;
            val_row.accuracy_std = row.accuracy_std;
          }
        }
        const auto ckpt_name = fmt::format("{}_k{}.mpck", name, budget);
        nn::Checkpoint ckpt{model.params(),
                            {{"model", model.spec().to_json()}, {"train", tc.to_json()}, {"best_episode", res.best_episode}},
                            tc.seed};
        nn::save_checkpoint(cfg.out / "checkpoints" / ckpt_name, ckpt);
        run["best_episode"] = res.best_episode;
        run["checkpoint"] = "checkpoints/" + ckpt_name;
      } else if (!suite.validation.empty()) {
        const auto ev = trainer::evaluate(ds, suite.validation, model, strategy, budget, tc, tc.eval_seeds);
        val_row.accuracy_mean = ev.mean;
        val_row.accuracy_std = ev.std;
      }

      const auto test = trainer::evaluate(ds, suite.test, model, strategy, budget, tc, cfg.test_seeds);
      spdlog::info("{} k={}: test accuracy {:.4f} (std {:.4f})", name, budget, test.mean, test.std);
      ResultRow test_row{label, cfg.shape.classes_per_problem, budget, name, "test", test.mean, test.std,
                         suite.test.size(), cfg.seed};
      if (!suite.validation.empty()) outputs.rows.push_back(val_row);
      outputs.rows.push_back(test_row);

      nlohmann::json masks = nlohmann::json::array();
      for (std::size_t p = 0; p < suite.test.size(); ++p) masks.push_back(selector::to_json(test.masks[p], suite.test[p].id));
      run["test_masks"] = std::move(masks);
      runs.push_back(std::move(run));
    }
  }

  append_results(outputs.results_csv, outputs.rows);
  write_text(outputs.train_log, log_text);

  nlohmann::json manifest = {{"schema_version", kResultsSchemaVersion},
                             {"config", cfg.to_json()},
                             {"dataset",
                              {{"path", cfg.dataset},
                               {"fingerprint", fmt::format("{:016x}", fingerprint)},
                               {"rows", ds.rows()},
                               {"features", ds.feature_dim()},
                               {"classes", ds.class_names()}}},
                             {"seeds",
                              {{"master", cfg.seed},
                               {"partition", derive_seed(cfg.seed, kPartitionStream)},
                               {"suite", derive_seed(cfg.seed, kSuiteStream)},
                               {"model", derive_seed(cfg.seed, kModelStream)}}},
                             {"partition", data::to_json(partition)},
                             {"suite", data::to_json(suite)},
                             {"runs", std::move(runs)}};
  write_text(outputs.manifest, manifest.dump(1) + "\n");
  return outputs;
}

}  // namespace

std::string results_header() {
  return "schema_version,dataset,classes_per_problem,budget,strategy,split,accuracy_mean,accuracy_std,n_problems,seed";
}

std::string format_row(const ResultRow& r) {
  return fmt::format("{},{},{},{},{},{},{:.6f},{:.6f},{},{}", kResultsSchemaVersion, r.dataset, r.classes_per_problem,
                     r.budget, r.strategy, r.split, r.accuracy_mean, r.accuracy_std, r.n_problems, r.seed);
}

std::vector<ResultRow> read_results(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) return {};
  if (line != results_header()) {
    throw CompareError(path.string() + ": unrecognised results schema (header '" + line + "')");
  }
  std::vector<ResultRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 10) {
      throw CompareError(fmt::format("{}:{}: expected 10 fields, found {}", path.string(), lineno, cells.size()));
    }
    if (cells[0] != std::to_string(kResultsSchemaVersion)) {
      throw CompareError(fmt::format("{}:{}: schema version {} is not supported", path.string(), lineno, cells[0]));
    }
    try {
      ResultRow r;
      r.dataset = cells[1];
      r.classes_per_problem = std::stoul(cells[2]);
      r.budget = std::stoul(cells[3]);
      r.strategy = cells[4];
      r.split = cells[5];
      r.accuracy_mean = std::stod(cells[6]);
      r.accuracy_std = std::stod(cells[7]);
      r.n_problems = std::stoul(cells[8]);
      r.seed = std::stoull(cells[9]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw CompareError(fmt::format("{}:{}: malformed number", path.string(), lineno));
    }
  }
  return rows;
}

RunOutputs run_experiment(const RunConfig& cfg) {
  auto errs = cfg.check();
  if (!errs.empty()) throw ConfigError(std::move(errs));
  const auto raw = load(cfg);
  errs = check_against(cfg, raw);
  if (!errs.empty()) throw ConfigError(std::move(errs));

  const auto partition = data::partition_classes(raw, cfg.partition, derive_seed(cfg.seed, kPartitionStream));
  const auto ds = prepare(cfg, raw, partition);
  const auto suite = data::make_problem_suite(ds, partition, cfg.shape, cfg.problems, derive_seed(cfg.seed, kSuiteStream));
  spdlog::info("{}: {} rows, {} classes; {} train / {} validation / {} test problems", cfg.dataset, ds.rows(),
               ds.class_count(), suite.train.size(), suite.validation.size(), suite.test.size());
  return run_with(cfg, ds, partition, suite, data::file_fingerprint(cfg.dataset));
}

RunOutputs replay(const fs::path& manifest_path, const fs::path& out) {
  std::ifstream in(manifest_path);
  if (!in) throw ConfigError({"replay: cannot read manifest " + manifest_path.string()});
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError({"replay: manifest is not valid JSON: " + std::string(e.what())});
  }
  if (manifest.value("schema_version", 0) != kResultsSchemaVersion) {
    throw ConfigError({"replay: unsupported manifest schema version"});
  }

  RunConfig cfg = RunConfig::from_json(manifest.at("config"));
  cfg.out = out;
  if (!fs::exists(cfg.dataset)) {
    const auto beside = manifest_path.parent_path() / cfg.dataset;
    if (fs::exists(beside)) cfg.dataset = beside.string();
  }
  auto errs = cfg.check();
  if (!errs.empty()) throw ConfigError(std::move(errs));
  const auto raw = load(cfg);

  const auto fingerprint = data::file_fingerprint(cfg.dataset);
  const auto recorded = manifest.at("dataset").at("fingerprint").get<std::string>();
  if (fmt::format("{:016x}", fingerprint) != recorded) {
    throw ConfigError({"replay: dataset " + cfg.dataset + " does not match the manifest fingerprint " + recorded});
  }
  const auto partition = data::partition_from_json(manifest.at("partition"));
  const auto ds = prepare(cfg, raw, partition);
  const auto suite = data::suite_from_json(manifest.at("suite"));
  return run_with(cfg, ds, partition, suite, fingerprint);
}

}  // namespace metaal::experiment
