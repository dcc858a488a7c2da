#include "metaal/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace metaal::trainer {

namespace {

constexpr std::uint64_t kTrainStream = 0x7261696eULL;
constexpr std::uint64_t kEvalStream = 0x6576616cULL;

// Problem embedded into one graph; pool order may be permuted for the policy.
struct EmbeddedProblem {
  std::vector<std::size_t> order;  // position -> pool index
  std::vector<nn::Var> pool;       // by position
  std::vector<nn::Var> eval;
  std::vector<std::size_t> eval_labels;
};

EmbeddedProblem embed_problem(nn::Graph& g, const data::BaseDataset& ds, const data::Problem& problem, Model& model,
                              std::vector<std::size_t> order) {
  EmbeddedProblem e;
  e.order = std::move(order);
  e.pool.reserve(e.order.size());
  for (std::size_t pos : e.order) e.pool.push_back(model.embed(g, ds.row(problem.pool[pos])));
  e.eval.reserve(problem.eval.size());
  for (std::size_t r : problem.eval) e.eval.push_back(model.embed(g, ds.row(r)));
  e.eval_labels = problem.eval_labels(ds);
  return e;
}

// Sum of cross-entropies over the eval set given the selected positions.
nn::Var prediction_loss(const EmbeddedProblem& e, std::span<const std::size_t> positions,
                        std::span<const std::size_t> labels, std::size_t num_classes, const TrainConfig& cfg,
                        std::vector<double>* per_example) {
  std::vector<nn::Var> support;
  support.reserve(positions.size());
  for (std::size_t p : positions) support.push_back(e.pool[p]);
  std::vector<nn::Var> terms;
  terms.reserve(e.eval.size());
  for (std::size_t i = 0; i < e.eval.size(); ++i) {
    nn::Var pred = predictor::predict(e.eval[i], support, labels, num_classes, cfg.similarity, cfg.temperature);
    terms.push_back(nn::cross_entropy(pred, e.eval_labels[i]));
    if (per_example) per_example->push_back(terms.back().item());
  }
  return nn::sum(nn::stack(terms));
}

std::vector<std::size_t> identity_order(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

double l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + name + "' (expected sgd or adam)");
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

void TrainConfig::validate() const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (budget == 0) throw std::invalid_argument("budget must be >= 1");
  if (mc_samples == 0) throw std::invalid_argument("mc_samples must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  if (!(clip_norm >= 0.0)) throw std::invalid_argument("clip norm must be >= 0");
  if (eval_interval == 0) throw std::invalid_argument("eval interval must be >= 1");
  if (eval_seeds == 0) throw std::invalid_argument("eval seeds must be >= 1");
  if (!(baseline_decay >= 0.0 && baseline_decay < 1.0)) throw std::invalid_argument("baseline decay must be in [0,1)");
  if (threads == 0) throw std::invalid_argument("threads must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"lambda", lambda},
          {"budget", budget},
          {"mc_samples", mc_samples},
          {"learning_rate", learning_rate},
          {"episodes", episodes},
          {"similarity", predictor::to_string(similarity)},
          {"temperature", temperature},
          {"seed", seed},
          {"clip_norm", clip_norm},
          {"optimizer", to_string(optimizer)},
          {"eval_interval", eval_interval},
          {"eval_seeds", eval_seeds},
          {"use_baseline", use_baseline},
          {"baseline_decay", baseline_decay},
          {"with_replacement", with_replacement},
          {"shuffle_pool", shuffle_pool},
          {"strategy", selector::to_string(strategy)},
          {"batch_baseline", batch_baseline},
          {"threads", threads}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.lambda = j.at("lambda").get<double>();
  c.budget = j.at("budget").get<std::size_t>();
  c.mc_samples = j.at("mc_samples").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.episodes = j.at("episodes").get<std::size_t>();
  c.similarity = predictor::parse_similarity(j.at("similarity").get<std::string>());
  c.temperature = j.at("temperature").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.clip_norm = j.at("clip_norm").get<double>();
  c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  c.eval_interval = j.at("eval_interval").get<std::size_t>();
  c.eval_seeds = j.at("eval_seeds").get<std::size_t>();
  c.use_baseline = j.at("use_baseline").get<bool>();
  c.baseline_decay = j.at("baseline_decay").get<double>();
  c.with_replacement = j.at("with_replacement").get<bool>();
  c.shuffle_pool = j.at("shuffle_pool").get<bool>();
  c.strategy = selector::parse_strategy(j.at("strategy").get<std::string>());
  c.batch_baseline = j.value("batch_baseline", false);
  c.threads = j.value("threads", std::size_t{1});
  return c;
}

EpisodeLoss episode_loss(const data::BaseDataset& ds, const data::Problem& problem, const selector::SelectionMask& mask,
                         Model& model, const TrainConfig& cfg) {
  if (mask.alpha.size() != problem.pool.size()) throw DimensionError("episode_loss: mask length != pool size");
  const auto positions = mask.selected();
  if (positions.empty()) throw predictor::EmptySupportError();

  nn::Graph g;
  const auto e = embed_problem(g, ds, problem, model, identity_order(problem.pool.size()));
  const data::Oracle oracle(ds, problem);
  const auto labels = oracle.query(positions);

  EpisodeLoss out;
  nn::Var loss = prediction_loss(e, positions, labels, problem.num_classes(), cfg, &out.per_example);
  out.prediction = loss.item();
  out.labeling_cost = cfg.lambda * static_cast<double>(positions.size());
  out.total = out.prediction + out.labeling_cost;
  return out;
}

GradientEstimate policy_gradient_estimate(const data::BaseDataset& ds, const data::Problem& problem, Model& model,
                                          const TrainConfig& cfg, double baseline, Rng& rng,
                                          const EstimatorOptions& opts) {
  if (cfg.mc_samples == 0) throw std::invalid_argument("mc_samples must be >= 1");
  const std::size_t n = problem.pool.size();
  const bool policy = cfg.strategy == selector::Strategy::policy;

  std::vector<std::size_t> order = identity_order(n);
  if (policy && opts.shuffle_pool.value_or(cfg.shuffle_pool)) std::shuffle(order.begin(), order.end(), rng);

  nn::Graph g;
  const auto e = embed_problem(g, ds, problem, model, order);
  const data::Oracle oracle(ds, problem);
  const auto spec = model.policy_spec();

  std::optional<nn::Var> scores;
  selector::PolicyOutput dist;
  if (policy) {
    scores = selector::policy_scores(g, model.params(), spec, e.pool);
    dist = selector::policy_output_from_scores(scores->value());
  }
  std::vector<std::vector<double>> pool_values;
  if (cfg.strategy == selector::Strategy::kmedoids) {
    for (const auto& v : e.pool) pool_values.emplace_back(v.value().begin(), v.value().end());
  }

  GradientEstimate est;
  std::vector<nn::Var> terms;
  std::vector<nn::Var> log_probs;
  std::vector<double> rewards;
  for (std::size_t m = 0; m < cfg.mc_samples; ++m) {
    selector::SelectionMask mask;
    switch (cfg.strategy) {
      case selector::Strategy::policy:
        mask = selector::sample_alpha(dist, cfg.budget, rng, cfg.with_replacement);
        break;
      case selector::Strategy::random:
        mask = selector::select_random(n, cfg.budget, rng());
        break;
      case selector::Strategy::kmedoids:
        mask = selector::kmedoids_select(pool_values, cfg.budget, rng());
        break;
    }
    const auto positions = mask.selected();
    std::vector<std::size_t> pool_idx;
    for (std::size_t p : positions) pool_idx.push_back(order[p]);
    const auto labels = oracle.query(pool_idx);

    nn::Var loss = prediction_loss(e, positions, labels, problem.num_classes(), cfg, nullptr);
    rewards.push_back(opts.constant_reward.value_or(loss.item()));
    est.losses.push_back(loss.item());
    if (opts.pathwise) terms.push_back(loss);
    if (policy && opts.score_function) {
      log_probs.push_back(nn::sequential_log_prob(*scores, mask.chosen, cfg.with_replacement));
    }

    // Report the mask in original pool indices.
    selector::SelectionMask out = mask;
    for (auto& c : out.chosen) c = order[c];
    out.alpha.assign(n, 0);
    for (std::size_t c : out.chosen) out.alpha[c] = 1;
    est.masks.push_back(std::move(out));
  }

  const double reward_sum = std::accumulate(rewards.begin(), rewards.end(), 0.0);
  const bool loo = cfg.use_baseline && cfg.batch_baseline && cfg.mc_samples > 1;
  for (std::size_t m = 0; m < log_probs.size(); ++m) {
    // Leave-one-out mean of the other histories keeps the estimator unbiased.
    const double b = loo ? (reward_sum - rewards[m]) / static_cast<double>(cfg.mc_samples - 1) : baseline;
    terms.push_back(nn::scale(log_probs[m], rewards[m] - b));
  }
  est.mean_loss = std::accumulate(est.losses.begin(), est.losses.end(), 0.0) / static_cast<double>(cfg.mc_samples);

  auto& params = model.params();
  params.zero_grad();
  if (!terms.empty()) {
    nn::Var surrogate = nn::scale(nn::sum(nn::stack(terms)), 1.0 / static_cast<double>(cfg.mc_samples));
    g.backward(surrogate);
  }
  est.gradient = params.flatten_grads();
  params.zero_grad();
  return est;
}

double sgd_step(nn::ParamStore& params, std::span<const double> grads, double lr, double clip_norm) {
  if (grads.size() != params.parameter_count()) {
    throw DimensionError("sgd_step: gradient length " + std::to_string(grads.size()) + " != parameter count " +
                         std::to_string(params.parameter_count()));
  }
  const double norm = l2(grads);
  const double factor = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;
  std::size_t off = 0;
  for (std::size_t t = 0; t < params.tensor_count(); ++t) {
    for (double& v : params.tensor(t).values) v -= lr * factor * grads[off++];
  }
  return norm;
}

Optimizer::Optimizer(OptimizerKind kind, double lr, double clip_norm) : kind_(kind), lr_(lr), clip_(clip_norm) {}

double Optimizer::step(nn::ParamStore& params, std::span<const double> grads) {
  if (kind_ == OptimizerKind::sgd) return sgd_step(params, grads, lr_, clip_);

  if (grads.size() != params.parameter_count()) throw DimensionError("adam: gradient length mismatch");
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  if (m_.empty()) {
    m_.assign(grads.size(), 0.0);
    v_.assign(grads.size(), 0.0);
  }
  const double norm = l2(grads);
  const double factor = (clip_ > 0.0 && norm > clip_) ? clip_ / norm : 1.0;
  ++t_;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  std::size_t off = 0;
  for (std::size_t t = 0; t < params.tensor_count(); ++t) {
    for (double& p : params.tensor(t).values) {
      const double gi = factor * grads[off];
      m_[off] = b1 * m_[off] + (1.0 - b1) * gi;
      v_[off] = b2 * v_[off] + (1.0 - b2) * gi * gi;
      p -= lr_ * (m_[off] / c1) / (std::sqrt(v_[off] / c2) + eps);
      ++off;
    }
  }
  return norm;
}

std::uint64_t eval_mask_seed(std::uint64_t problem_seed, selector::Strategy strategy, std::size_t draw) {
  return derive_seed(problem_seed, kEvalStream + static_cast<std::uint64_t>(strategy), draw);
}

EvalResult evaluate(const data::BaseDataset& ds, std::span<const data::Problem> problems, Model& model,
                    selector::Strategy strategy, std::size_t budget, const TrainConfig& cfg, std::size_t n_seeds) {
  if (problems.empty()) throw std::invalid_argument("evaluate: no problems");
  if (n_seeds == 0) throw std::invalid_argument("evaluate: n_seeds must be >= 1");
  const std::size_t draws = n_seeds;
  const auto spec = model.policy_spec();

  EvalResult res;
  res.per_problem.assign(problems.size(), 0.0);
  res.masks.resize(problems.size());

  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      const auto& prob = problems[p];
      const auto pool = model.embed_rows(ds, prob.pool);
      const auto eval = model.embed_rows(ds, prob.eval);
      const auto truths = prob.eval_labels(ds);
      const data::Oracle oracle(ds, prob);
      std::optional<selector::PolicyOutput> dist;
      if (strategy == selector::Strategy::policy) dist = selector::policy_scores(model.params(), spec, pool);

      double acc_sum = 0.0;
      for (std::size_t s = 0; s < draws; ++s) {
        const std::uint64_t seed = eval_mask_seed(prob.seed, strategy, s);
        selector::SelectionMask mask;
        switch (strategy) {
          case selector::Strategy::random:
            mask = selector::select_random(pool.size(), budget, seed);
            break;
          case selector::Strategy::kmedoids:
            mask = selector::kmedoids_select(pool, budget, seed);
            break;
          case selector::Strategy::policy:
            mask = selector::sample_alpha(*dist, budget, seed, cfg.with_replacement);
            break;
        }
        predictor::LabeledSubset support;
        support.pool_indices = mask.selected();
        support.labels = oracle.query(support.pool_indices);
        support.num_classes = prob.num_classes();
        for (std::size_t i : support.pool_indices) support.embeddings.push_back(pool[i]);

        std::vector<predictor::PredictionDistribution> preds;
        preds.reserve(eval.size());
        for (const auto& x : eval) preds.push_back(predictor::predict(x, support, cfg.similarity, cfg.temperature));
        acc_sum += predictor::accuracy(preds, truths);
        if (s == 0) res.masks[p] = std::move(mask);
      }
      res.per_problem[p] = acc_sum / static_cast<double>(draws);
    }
  };

  const std::size_t threads = std::min(cfg.threads, problems.size());
  if (threads <= 1) {
    run(0, problems.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (problems.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk, e = std::min(problems.size(), b + chunk);
      if (b < e) pool.emplace_back(run, b, e);
    }
    for (auto& th : pool) th.join();
  }

  // Ordered reduction keeps results independent of the thread count.
  double sum = 0.0;
  for (double a : res.per_problem) sum += a;
  res.mean = sum / static_cast<double>(problems.size());
  double sq = 0.0;
  for (double a : res.per_problem) sq += (a - res.mean) * (a - res.mean);
  res.std = std::sqrt(sq / static_cast<double>(problems.size()));
  return res;
}

std::string train_log_header() {
  return "episode,split,budget,strategy,accuracy_mean,accuracy_std,loss_mean,grad_norm,baseline";
}

std::string format_log_row(const TrainLogRow& r) {
  return fmt::format("{},{},{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}", r.episode, r.split, r.budget, r.strategy,
                     r.accuracy_mean, r.accuracy_std, r.loss_mean, r.grad_norm, r.baseline);
}

TrainResult train(const data::BaseDataset& ds, std::span<const data::Problem> train_problems,
                  std::span<const data::Problem> validation_problems, Model initial, const TrainConfig& cfg,
                  const ProgressFn& progress) {
  cfg.validate();
  if (train_problems.empty()) throw std::invalid_argument("train: no training problems");
  if (validation_problems.empty()) throw std::invalid_argument("train: no validation problems");

  Model model = std::move(initial);
  Rng rng(derive_seed(cfg.seed, kTrainStream));
  Optimizer opt(cfg.optimizer, cfg.learning_rate, cfg.clip_norm);
  std::uniform_int_distribution<std::size_t> pick(0, train_problems.size() - 1);
  const std::string strategy = selector::to_string(cfg.strategy);

  TrainResult result{model, 0.0, 0, {}};
  std::optional<double> baseline;
  double loss_acc = 0.0, norm_acc = 0.0;
  std::size_t since_eval = 0;

  auto validate_now = [&](std::size_t episode) {
    const auto ev = evaluate(ds, validation_problems, model, cfg.strategy, cfg.budget, cfg, cfg.eval_seeds);
    TrainLogRow row{episode,
                    "validation",
                    cfg.budget,
                    strategy,
                    ev.mean,
                    ev.std,
                    since_eval ? loss_acc / static_cast<double>(since_eval) : 0.0,
                    since_eval ? norm_acc / static_cast<double>(since_eval) : 0.0,
                    baseline.value_or(0.0)};
    result.log.push_back(row);
    if (progress) progress(row);
    spdlog::debug("[{} k={}] episode {} val acc {:.4f} loss {:.3f}", strategy, cfg.budget, episode, ev.mean,
                  row.loss_mean);
    if (episode == 0 || ev.mean > result.best_validation_accuracy) {
      result.best_validation_accuracy = ev.mean;
      result.best_episode = episode;
      result.best = model;
    }
    loss_acc = norm_acc = 0.0;
    since_eval = 0;
  };

  validate_now(0);
  for (std::size_t ep = 1; ep <= cfg.episodes; ++ep) {
    const auto& problem = train_problems[pick(rng)];
    const double b = cfg.use_baseline ? baseline.value_or(0.0) : 0.0;
    auto est = policy_gradient_estimate(ds, problem, model, cfg, b, rng);

    const std::vector<double> before = model.params().flatten();
    const double norm = opt.step(model.params(), est.gradient);
    if (!model.params().all_finite() || !std::isfinite(norm)) {
      Model last_good = model;
      last_good.params().restore(before);
      throw TrainingAborted(fmt::format("non-finite parameters after episode {} (grad norm {})", ep, norm),
                            std::move(last_good), ep);
    }
    if (cfg.use_baseline) {
      baseline = baseline ? cfg.baseline_decay * *baseline + (1.0 - cfg.baseline_decay) * est.mean_loss
                          : est.mean_loss;
    }
    loss_acc += est.mean_loss;
    norm_acc += norm;
    ++since_eval;
    if (ep % cfg.eval_interval == 0 || ep == cfg.episodes) validate_now(ep);
  }
  return result;
}

}  // namespace metaal::trainer
