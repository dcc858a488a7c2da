#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "metaal/experiment.hpp"

namespace metaal::experiment {

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : "; ") + s;
  return out;
}

nn::Activation activation_from(const std::string& s) {
  if (s == "linear") return nn::Activation::linear;
  if (s == "tanh") return nn::Activation::tanh;
  if (s == "sigmoid") return nn::Activation::sigmoid;
  if (s == "relu") return nn::Activation::relu;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

bool needs_training(const RunConfig& cfg) {
  for (auto s : cfg.strategies) {
    if (s == selector::Strategy::policy) return true;
  }
  return cfg.embed_dim > 0 && cfg.train_baseline_embedder && cfg.train.episodes > 0;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::invalid_argument("invalid configuration: " + join(problems)), problems_(std::move(problems)) {}

trainer::ModelSpec RunConfig::model_spec(std::size_t input_dim) const {
  trainer::ModelSpec spec;
  spec.embedder.input_dim = input_dim;
  if (embed_dim > 0) {
    spec.embedder.widths = embed_hidden;
    spec.embedder.widths.push_back(embed_dim);
  }
  spec.embedder.hidden_activation = activation_from(embed_activation);
  spec.embedder.output_activation = nn::Activation::linear;
  spec.rnn_hidden = hidden_dim;
  return spec;
}

std::vector<std::string> RunConfig::check() const {
  std::vector<std::string> errs;
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) errs.push_back(msg);
  };

  need(!dataset.empty(), "--dataset: a dataset path is required");
  need(!out.empty(), "--out: an output directory is required");
  need(shape.classes_per_problem >= 1, "--classes-per-problem: must be >= 1");
  need(shape.pool_size >= 1, "--pool-size: must be >= 1");
  need(shape.eval_size >= 1, "--eval-size: must be >= 1");
  need(problems.test >= 1, "--problems: need at least one test problem");

  need(!strategies.empty(), "--strategy: at least one strategy is required");
  std::set<selector::Strategy> seen_s(strategies.begin(), strategies.end());
  need(seen_s.size() == strategies.size(), "--strategy: duplicate strategy");

  need(!budgets.empty(), "--budgets: at least one budget is required");
  std::set<std::size_t> seen_b;
  for (std::size_t k : budgets) {
    need(k >= 1, "--budgets: budget must be >= 1");
    need(k <= shape.pool_size || train.with_replacement,
         fmt::format("--budgets: budget {} exceeds pool size {}", k, shape.pool_size));
    need(seen_b.insert(k).second, fmt::format("--budgets: duplicate budget {}", k));
  }

  if (needs_training(*this)) {
    need(problems.train >= 1, "--problems: training needs at least one train problem");
    need(problems.validation >= 1, "--problems: model selection needs at least one validation problem");
    need(partition.train >= shape.classes_per_problem || problems.train == 0,
         fmt::format("--split: {} train classes cannot form problems of P={}", partition.train,
                     shape.classes_per_problem));
    need(partition.validation >= shape.classes_per_problem || problems.validation == 0,
         fmt::format("--split: {} validation classes cannot form problems of P={}", partition.validation,
                     shape.classes_per_problem));
  }
  need(partition.test >= shape.classes_per_problem,
       fmt::format("--split: {} test classes cannot form problems of P={}", partition.test,
                   shape.classes_per_problem));

  need(std::isfinite(train.lambda) && train.lambda >= 0.0, "--lambda: must be >= 0");
  need(train.mc_samples >= 1, "--mc-samples: must be >= 1");
  need(std::isfinite(train.learning_rate) && train.learning_rate > 0.0, "--lr: must be > 0");
  need(std::isfinite(train.temperature) && train.temperature > 0.0, "--temperature: must be > 0");
  need(train.clip_norm >= 0.0, "--clip: must be >= 0");
  need(train.eval_interval >= 1, "--eval-interval: must be >= 1");
  need(train.eval_seeds >= 1, "--eval-seeds: must be >= 1");
  need(train.baseline_decay >= 0.0 && train.baseline_decay < 1.0, "--baseline-decay: must be in [0, 1)");
  need(train.threads >= 1, "--threads: must be >= 1");
  need(test_seeds >= 1, "--test-seeds: must be >= 1");
  need(hidden_dim >= 1, "--hidden-dim: must be >= 1");
  for (std::size_t w : embed_hidden) need(w >= 1, "--embed-hidden: layer widths must be >= 1");
  if (embed_dim == 0) need(embed_hidden.empty(), "--embed-hidden: requires --embed-dim > 0");
  try {
    activation_from(embed_activation);
  } catch (const std::invalid_argument& e) {
    errs.push_back(std::string("--embed-activation: ") + e.what());
  }
  return errs;
}

std::vector<std::string> check_against(const RunConfig& cfg, const data::BaseDataset& ds) {
  std::vector<std::string> errs;
  const std::size_t P = cfg.shape.classes_per_problem, N = cfg.shape.pool_size, M = cfg.shape.eval_size;
  const auto& pc = cfg.partition;
  const std::size_t total = pc.train + pc.validation + pc.test;
  if (total > ds.class_count()) {
    errs.push_back(fmt::format("--split: {}+{}+{} classes requested but the dataset has {}", pc.train, pc.validation,
                               pc.test, ds.class_count()));
    return errs;
  }

  // Any P classes of a split must supply N+M rows, so check the P smallest
  // classes in the dataset (the partition is not known yet).
  std::vector<std::size_t> sizes;
  for (std::size_t c = 0; c < ds.class_count(); ++c) sizes.push_back(ds.rows_of(static_cast<data::ClassId>(c)).size());
  std::sort(sizes.begin(), sizes.end());
  if (P <= sizes.size()) {
    if (cfg.shape.balanced) {
      const std::size_t need = (N + P - 1) / P + (M + P - 1) / P;
      if (sizes.front() < need) {
        errs.push_back(fmt::format("--balanced: smallest class has {} rows, balanced problems need {} per class",
                                   sizes.front(), need));
      }
    } else {
      std::size_t rows = 0;
      for (std::size_t i = 0; i < P; ++i) rows += sizes[i];
      if (rows < N + M) {
        errs.push_back(fmt::format("--pool-size/--eval-size: the {} smallest classes hold {} rows, N+M={}", P, rows,
                                   N + M));
      }
    }
  }
  return errs;
}

nlohmann::json RunConfig::to_json() const {
  std::vector<std::string> strat;
  for (auto s : strategies) strat.push_back(selector::to_string(s));
  return {{"dataset", dataset},
          {"format", data::to_string(format)},
          {"csv",
           {{"header", csv.header},
            {"label_column", csv.label_column},
            {"label_name", csv.label_name},
            {"delimiter", std::string(1, csv.delimiter)}}},
          {"dataset_name", dataset_name},
          {"partition", {{"train", partition.train}, {"validation", partition.validation}, {"test", partition.test}}},
          {"classes_per_problem", shape.classes_per_problem},
          {"pool_size", shape.pool_size},
          {"eval_size", shape.eval_size},
          {"balanced", shape.balanced},
          {"problems", {{"train", problems.train}, {"validation", problems.validation}, {"test", problems.test}}},
          {"strategies", strat},
          {"budgets", budgets},
          {"train", train.to_json()},
          {"embed_dim", embed_dim},
          {"embed_hidden", embed_hidden},
          {"embed_activation", embed_activation},
          {"hidden_dim", hidden_dim},
          {"train_baseline_embedder", train_baseline_embedder},
          {"policy_zero_init", policy_zero_init},
          {"test_seeds", test_seeds},
          {"standardize", standardize},
          {"out", out.string()},
          {"seed", seed}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  c.dataset = j.at("dataset").get<std::string>();
  c.format = data::parse_format(j.at("format").get<std::string>());
  const auto& csv = j.at("csv");
  c.csv.header = csv.at("header").get<bool>();
  c.csv.label_column = csv.at("label_column").get<int>();
  c.csv.label_name = csv.at("label_name").get<std::string>();
  c.csv.delimiter = csv.at("delimiter").get<std::string>().at(0);
  c.dataset_name = j.at("dataset_name").get<std::string>();
  const auto& pc = j.at("partition");
  c.partition = {pc.at("train").get<std::size_t>(), pc.at("validation").get<std::size_t>(),
                 pc.at("test").get<std::size_t>()};
  c.shape.classes_per_problem = j.at("classes_per_problem").get<std::size_t>();
  c.shape.pool_size = j.at("pool_size").get<std::size_t>();
  c.shape.eval_size = j.at("eval_size").get<std::size_t>();
  c.shape.balanced = j.at("balanced").get<bool>();
  const auto& pr = j.at("problems");
  c.problems = {pr.at("train").get<std::size_t>(), pr.at("validation").get<std::size_t>(),
                pr.at("test").get<std::size_t>()};
  c.strategies.clear();
  for (const auto& s : j.at("strategies")) c.strategies.push_back(selector::parse_strategy(s.get<std::string>()));
  c.budgets = j.at("budgets").get<std::vector<std::size_t>>();
  c.train = trainer::TrainConfig::from_json(j.at("train"));
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.embed_hidden = j.at("embed_hidden").get<std::vector<std::size_t>>();
  c.embed_activation = j.at("embed_activation").get<std::string>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.train_baseline_embedder = j.at("train_baseline_embedder").get<bool>();
  c.policy_zero_init = j.at("policy_zero_init").get<bool>();
  c.test_seeds = j.at("test_seeds").get<std::size_t>();
  c.standardize = j.at("standardize").get<bool>();
  c.out = j.at("out").get<std::string>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace metaal::experiment
