#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "metaal/data.hpp"
#include "metaal/nn/layers.hpp"
#include "metaal/nn/param_store.hpp"
#include "metaal/predictor.hpp"
#include "metaal/random.hpp"
#include "metaal/selector.hpp"

namespace metaal::trainer {

struct ModelSpec {
  /// Representation f; no layers means f is the identity.
  nn::EmbedderSpec embedder;
  std::size_t rnn_hidden = 16;

  nlohmann::json to_json() const;
  static ModelSpec from_json(const nlohmann::json& j);
};

/// Every trainable parameter (embedder f and policy theta) in one store.
class Model {
 public:
  static Model create(const ModelSpec& spec, std::uint64_t seed);
  /// Policy head weights and bias set to zero, giving a uniform selection distribution.
  void zero_policy_head();

  const ModelSpec& spec() const { return spec_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  selector::PolicySpec policy_spec() const;
  std::size_t latent_dim() const { return spec_.embedder.output_dim(); }

  nn::Var embed(nn::Graph& g, std::span<const double> x);
  std::vector<std::vector<double>> embed_rows(const data::BaseDataset& ds, std::span<const std::size_t> rows);

 private:
  ModelSpec spec_;
  nn::ParamStore params_;
};

enum class OptimizerKind { sgd, adam };

OptimizerKind parse_optimizer(const std::string& name);
std::string to_string(OptimizerKind k);

struct TrainConfig {
  double lambda = 0.0;
  std::size_t budget = 2;
  /// Monte-Carlo histories per problem.
  std::size_t mc_samples = 8;
  double learning_rate = 0.01;
  std::size_t episodes = 10000;
  predictor::Similarity similarity = predictor::Similarity::euclidean;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  /// Gradient-norm clipping threshold; 0 disables.
  double clip_norm = 5.0;
  OptimizerKind optimizer = OptimizerKind::sgd;
  std::size_t eval_interval = 1000;
  /// Mask draws per validation problem for stochastic strategies.
  std::size_t eval_seeds = 1;
  bool use_baseline = true;
  double baseline_decay = 0.99;
  /// Per-history baseline: mean loss of the other mc_samples - 1 histories
  /// of the same problem, instead of the moving average.
  bool batch_baseline = false;
  bool with_replacement = false;
  /// Present the pool to the recurrent policy in a fresh random order on every training episode.
  bool shuffle_pool = true;
  /// Acquisition strategy used while training; baselines train only f.
  selector::Strategy strategy = selector::Strategy::policy;
  std::size_t threads = 1;

  /// Throws std::invalid_argument naming the first invalid field.
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpisodeLoss {
  /// Sum of per-example cross-entropies plus lambda * |D_alpha|.
  double total = 0.0;
  double prediction = 0.0;
  double labeling_cost = 0.0;
  std::vector<double> per_example;
};

EpisodeLoss episode_loss(const data::BaseDataset& ds, const data::Problem& problem, const selector::SelectionMask& mask,
                         Model& model, const TrainConfig& cfg);

struct EstimatorOptions {
  bool score_function = true;
  bool pathwise = true;
  /// Replaces the prediction loss in the score-function term (pathwise term unaffected).
  std::optional<double> constant_reward;
  /// Overrides cfg.shuffle_pool.
  std::optional<bool> shuffle_pool;
};

struct GradientEstimate {
  /// d/d(params) of the expected episode loss, flat in ParamStore order.
  std::vector<double> gradient;
  /// Prediction loss per history.
  std::vector<double> losses;
  std::vector<selector::SelectionMask> masks;
  double mean_loss = 0.0;
};

/// Monte-Carlo score-function estimate averaged over cfg.mc_samples histories:
/// grad log P(alpha) * (R_alpha - baseline) + grad R_alpha (pathwise through f).
GradientEstimate policy_gradient_estimate(const data::BaseDataset& ds, const data::Problem& problem, Model& model,
                                          const TrainConfig& cfg, double baseline, Rng& rng,
                                          const EstimatorOptions& opts = {});

/// p <- p - lr * g, with g rescaled to norm clip_norm when larger (clip_norm > 0).
/// Returns the norm of g before clipping.
double sgd_step(nn::ParamStore& params, std::span<const double> grads, double lr, double clip_norm = 0.0);

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, double clip_norm);
  /// Returns the pre-clipping gradient norm.
  double step(nn::ParamStore& params, std::span<const double> grads);

 private:
  OptimizerKind kind_;
  double lr_;
  double clip_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

struct EvalResult {
  double mean = 0.0;
  double std = 0.0;
  /// Accuracy per problem, averaged over mask draws.
  std::vector<double> per_problem;
  /// First draw's mask for each problem.
  std::vector<selector::SelectionMask> masks;
};

/// Seed of draw `draw` for problem `problem_seed`; shared by all budgets so
/// random masks for increasing budgets are nested.
std::uint64_t eval_mask_seed(std::uint64_t problem_seed, selector::Strategy strategy, std::size_t draw);

EvalResult evaluate(const data::BaseDataset& ds, std::span<const data::Problem> problems, Model& model,
                    selector::Strategy strategy, std::size_t budget, const TrainConfig& cfg, std::size_t n_seeds);

struct TrainLogRow {
  std::size_t episode = 0;
  std::string split;
  std::size_t budget = 0;
  std::string strategy;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  double loss_mean = 0.0;
  double grad_norm = 0.0;
  double baseline = 0.0;
};

std::string train_log_header();
std::string format_log_row(const TrainLogRow& row);

struct TrainResult {
  Model best;
  double best_validation_accuracy = 0.0;
  std::size_t best_episode = 0;
  std::vector<TrainLogRow> log;
};

/// Parameters went non-finite; `last_good` holds the model before the failing step.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, Model last_good, std::size_t episode)
      : std::runtime_error(what), last_good(std::move(last_good)), episode(episode) {}
  Model last_good;
  std::size_t episode;
};

using ProgressFn = std::function<void(const TrainLogRow&)>;

/// Samples training problems uniformly, applies one estimator step per
/// episode, and keeps the parameters with the best validation accuracy
/// (evaluated before training and every cfg.eval_interval episodes).
TrainResult train(const data::BaseDataset& ds, std::span<const data::Problem> train_problems,
                  std::span<const data::Problem> validation_problems, Model initial, const TrainConfig& cfg,
                  const ProgressFn& progress = {});

}  // namespace metaal::trainer
