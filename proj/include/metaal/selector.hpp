#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "metaal/nn/graph.hpp"
#include "metaal/nn/layers.hpp"
#include "metaal/nn/param_store.hpp"
#include "metaal/random.hpp"

namespace metaal::selector {

enum class Strategy { random, kmedoids, policy };

Strategy parse_strategy(const std::string& name);
std::string to_string(Strategy s);

/// The acquisition decision alpha over a pool of size N.
struct SelectionMask {
  std::vector<std::uint8_t> alpha;
  /// Indices in draw order (may repeat when sampling with replacement).
  std::vector<std::size_t> chosen;
  /// log P(draw sequence) under the policy; 0 for non-stochastic selectors.
  double log_prob = 0.0;
  std::size_t budget = 0;

  std::size_t selected_count() const;
  /// Distinct selected indices in increasing order.
  std::vector<std::size_t> selected() const;
};

nlohmann::json to_json(const SelectionMask& m, std::size_t problem_id);

struct PolicyOutput {
  std::vector<double> scores;
  std::vector<double> distribution;
};

SelectionMask select_random(std::size_t n, std::size_t k, std::uint64_t seed);

struct KMedoidsResult {
  std::vector<std::size_t> initial_medoids;
  /// Final medoids, sorted.
  std::vector<std::size_t> medoids;
  /// assignment[i] = medoid (pool index) serving point i.
  std::vector<std::size_t> assignment;
  /// Objective after each assignment step; non-increasing.
  std::vector<double> cost_history;
  std::size_t iterations = 0;

  double cost() const { return cost_history.back(); }
};

/// Sum over points of the Euclidean distance to the nearest medoid.
double kmedoids_cost(std::span<const std::vector<double>> points, std::span<const std::size_t> medoids);

/// k-medoids++ seeding followed by assign/update alternation to a fixed point.
KMedoidsResult kmedoids(std::span<const std::vector<double>> points, std::size_t k, std::uint64_t seed,
                        std::size_t max_iterations = 100);
/// Runs only the alternation from the given medoids.
KMedoidsResult kmedoids_from(std::span<const std::vector<double>> points, std::vector<std::size_t> initial,
                             std::size_t max_iterations = 100);

SelectionMask kmedoids_select(std::span<const std::vector<double>> pool_embedded, std::size_t k, std::uint64_t seed);

/// Bidirectional LSTM over the pool followed by a linear score head.
struct PolicySpec {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 16;
  std::string prefix = "policy";

  nn::LstmCellParams forward_cell() const { return {prefix + ".fwd", input_dim, hidden_dim}; }
  nn::LstmCellParams backward_cell() const { return {prefix + ".bwd", input_dim, hidden_dim}; }
  nn::LinearParams head() const { return {prefix + ".head", 2 * hidden_dim, 1}; }
  void register_in(nn::ParamStore& store) const;
};

/// Per-position scores (length N) in the order the pool was given.
nn::Var policy_scores(nn::Graph& g, nn::ParamStore& store, const PolicySpec& spec, std::span<const nn::Var> pool);
/// Value-level scores plus softmax distribution (temperature 1).
PolicyOutput policy_scores(nn::ParamStore& store, const PolicySpec& spec,
                           std::span<const std::vector<double>> pool_embedded);
PolicyOutput policy_output_from_scores(std::span<const double> scores);

/// k sequential draws; without replacement each draw renormalises over the
/// indices not yet taken.
SelectionMask sample_alpha(const PolicyOutput& dist, std::size_t k, Rng& rng, bool with_replacement = false);
SelectionMask sample_alpha(const PolicyOutput& dist, std::size_t k, std::uint64_t seed, bool with_replacement = false);

struct SelectContext {
  nn::ParamStore* params = nullptr;
  const PolicySpec* policy = nullptr;
  bool with_replacement = false;
};

SelectionMask select(Strategy strategy, std::span<const std::vector<double>> pool_embedded, std::size_t k,
                     std::uint64_t seed, const SelectContext& ctx = {});

}  // namespace metaal::selector
