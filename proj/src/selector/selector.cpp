#include "metaal/selector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "metaal/predictor.hpp"

namespace metaal::selector {

namespace {

void check_budget(std::size_t n, std::size_t k) {
  if (n == 0) throw std::invalid_argument("empty pool");
  if (k == 0) throw std::invalid_argument("budget must be at least 1");
  if (k > n) {
    throw std::invalid_argument("budget k=" + std::to_string(k) + " exceeds pool size N=" + std::to_string(n));
  }
}

double distance(std::span<const double> a, std::span<const double> b) {
  return -predictor::euclidean_similarity(a, b);
}

SelectionMask mask_from(std::size_t n, std::vector<std::size_t> chosen, std::size_t budget, double log_prob) {
  SelectionMask m;
  m.alpha.assign(n, 0);
  for (std::size_t i : chosen) m.alpha.at(i) = 1;
  m.chosen = std::move(chosen);
  m.budget = budget;
  m.log_prob = log_prob;
  return m;
}

}  // namespace

Strategy parse_strategy(const std::string& name) {
  if (name == "random") return Strategy::random;
  if (name == "kmedoids") return Strategy::kmedoids;
  if (name == "policy") return Strategy::policy;
  throw std::invalid_argument("unknown strategy '" + name + "' (expected random, kmedoids or policy)");
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::random:
      return "random";
    case Strategy::kmedoids:
      return "kmedoids";
    case Strategy::policy:
      return "policy";
  }
  return "?";
}

std::size_t SelectionMask::selected_count() const {
  return static_cast<std::size_t>(std::count(alpha.begin(), alpha.end(), std::uint8_t{1}));
}

std::vector<std::size_t> SelectionMask::selected() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (alpha[i]) out.push_back(i);
  }
  return out;
}

nlohmann::json to_json(const SelectionMask& m, std::size_t problem_id) {
  return {{"problem", problem_id}, {"indices", m.chosen}, {"log_prob", m.log_prob}};
}

SelectionMask select_random(std::size_t n, std::size_t k, std::uint64_t seed) {
  check_budget(n, k);
  Rng rng(seed);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  return mask_from(n, std::move(idx), k, 0.0);
}

double kmedoids_cost(std::span<const std::vector<double>> points, std::span<const std::size_t> medoids) {
  double cost = 0.0;
  for (const auto& p : points) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t m : medoids) best = std::min(best, distance(p, points[m]));
    cost += best;
  }
  return cost;
}

KMedoidsResult kmedoids_from(std::span<const std::vector<double>> points, std::vector<std::size_t> initial,
                             std::size_t max_iterations) {
  const std::size_t n = points.size();
  const std::size_t k = initial.size();
  check_budget(n, k);

  KMedoidsResult res;
  res.initial_medoids = initial;
  std::vector<std::size_t> medoids = std::move(initial);
  std::vector<std::size_t> cluster(n);

  // Pairwise distances; N is small (tens).
  std::vector<double> dist(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) dist[i * n + j] = dist[j * n + i] = distance(points[i], points[j]);
  }

  auto assign = [&] {
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < k; ++j) {
        if (dist[i * n + medoids[j]] < dist[i * n + medoids[best]]) best = j;
      }
      cluster[i] = best;
      cost += dist[i * n + medoids[best]];
    }
    // A medoid always serves itself, even when it coincides with another medoid.
    for (std::size_t j = 0; j < k; ++j) cluster[medoids[j]] = j;
    return cost;
  };

  for (std::size_t it = 0; it < max_iterations; ++it) {
    res.cost_history.push_back(assign());
    res.iterations = it + 1;

    bool changed = false;
    for (std::size_t j = 0; j < k; ++j) {
      double best_cost = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (cluster[i] == j) best_cost += dist[i * n + medoids[j]];
      }
      std::size_t best = medoids[j];
      for (std::size_t c = 0; c < n; ++c) {
        if (cluster[c] != j || c == medoids[j]) continue;
        double cost = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (cluster[i] == j) cost += dist[i * n + c];
        }
        if (cost < best_cost) {
          best_cost = cost;
          best = c;
        }
      }
      if (best != medoids[j]) {
        medoids[j] = best;
        changed = true;
      }
    }
    if (!changed) break;
  }
  if (res.iterations == max_iterations) res.cost_history.push_back(assign());

  res.assignment.resize(n);
  for (std::size_t i = 0; i < n; ++i) res.assignment[i] = medoids[cluster[i]];
  res.medoids = medoids;
  std::sort(res.medoids.begin(), res.medoids.end());
  return res;
}

KMedoidsResult kmedoids(std::span<const std::vector<double>> points, std::size_t k, std::uint64_t seed,
                        std::size_t max_iterations) {
  const std::size_t n = points.size();
  check_budget(n, k);
  Rng rng(seed);
  std::vector<std::size_t> medoids;
  std::vector<char> is_medoid(n, 0);
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  medoids.push_back(first(rng));
  is_medoid[medoids.back()] = 1;

  // k-medoids++: next seed drawn with probability proportional to squared
  // distance from the nearest chosen medoid.
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  while (medoids.size() < k) {
    const auto& last = points[medoids.back()];
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (is_medoid[i]) {
        nearest[i] = 0.0;
        continue;
      }
      const double d = distance(points[i], last);
      nearest[i] = std::min(nearest[i], d * d);
      total += nearest[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      for (std::size_t i = 0; i < n; ++i) {
        if (is_medoid[i] || nearest[i] == 0.0) continue;
        pick = i;
        r -= nearest[i];
        if (r < 0.0) break;
      }
    }
    if (pick == n) {
      // Every remaining point coincides with a medoid; take one uniformly.
      std::vector<std::size_t> rest;
      for (std::size_t i = 0; i < n; ++i) {
        if (!is_medoid[i]) rest.push_back(i);
      }
      std::uniform_int_distribution<std::size_t> any(0, rest.size() - 1);
      pick = rest[any(rng)];
    }
    medoids.push_back(pick);
    is_medoid[pick] = 1;
  }
  return kmedoids_from(points, std::move(medoids), max_iterations);
}

SelectionMask kmedoids_select(std::span<const std::vector<double>> pool_embedded, std::size_t k, std::uint64_t seed) {
  auto res = kmedoids(pool_embedded, k, seed);
  return mask_from(pool_embedded.size(), res.medoids, k, 0.0);
}

void PolicySpec::register_in(nn::ParamStore& store) const {
  forward_cell().register_in(store);
  backward_cell().register_in(store);
  head().register_in(store);
}

nn::Var policy_scores(nn::Graph& g, nn::ParamStore& store, const PolicySpec& spec, std::span<const nn::Var> pool) {
  if (pool.empty()) throw std::invalid_argument("policy_scores: empty pool");
  const auto fwd = nn::LstmCell::bind(g, store, spec.forward_cell());
  const auto bwd = nn::LstmCell::bind(g, store, spec.backward_cell());
  const auto head = spec.head();
  const auto states = nn::bidirectional_scan(pool, fwd, bwd);
  std::vector<nn::Var> scores;
  scores.reserve(states.size());
  for (const auto& h : states) scores.push_back(nn::linear_forward(g, store, head, h));
  return nn::stack(scores);
}

PolicyOutput policy_output_from_scores(std::span<const double> scores) {
  PolicyOutput out;
  out.scores.assign(scores.begin(), scores.end());
  const double m = *std::max_element(scores.begin(), scores.end());
  out.distribution.resize(scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out.distribution[i] = std::exp(scores[i] - m);
    z += out.distribution[i];
  }
  for (double& p : out.distribution) p /= z;
  return out;
}

PolicyOutput policy_scores(nn::ParamStore& store, const PolicySpec& spec,
                           std::span<const std::vector<double>> pool_embedded) {
  nn::Graph g;
  std::vector<nn::Var> pool;
  pool.reserve(pool_embedded.size());
  for (const auto& x : pool_embedded) pool.push_back(g.constant(x));
  return policy_output_from_scores(policy_scores(g, store, spec, pool).value());
}

SelectionMask sample_alpha(const PolicyOutput& dist, std::size_t k, Rng& rng, bool with_replacement) {
  const auto& p = dist.distribution;
  const std::size_t n = p.size();
  if (with_replacement) {
    if (n == 0) throw std::invalid_argument("empty pool");
    if (k == 0) throw std::invalid_argument("budget must be at least 1");
  } else {
    check_budget(n, k);
  }
  std::vector<char> taken(n, 0);
  std::vector<std::size_t> chosen;
  double log_prob = 0.0;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t t = 0; t < k; ++t) {
    double mass = 0.0;
    std::size_t last = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!taken[i] && p[i] > 0.0) {
        mass += p[i];
        last = i;
      }
    }
    std::size_t pick = last;
    if (last == n) {
      // Remaining probability underflowed; fall back to the first free index.
      pick = static_cast<std::size_t>(std::find(taken.begin(), taken.end(), 0) - taken.begin());
      mass = 0.0;
    } else {
      double r = u(rng) * mass;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i] || p[i] <= 0.0) continue;
        r -= p[i];
        if (r < 0.0) {
          pick = i;
          break;
        }
      }
    }
    log_prob += mass > 0.0 ? std::log(p[pick]) - std::log(mass) : -std::numeric_limits<double>::infinity();
    chosen.push_back(pick);
    if (!with_replacement) taken[pick] = 1;
  }
  return mask_from(n, std::move(chosen), k, log_prob);
}

SelectionMask sample_alpha(const PolicyOutput& dist, std::size_t k, std::uint64_t seed, bool with_replacement) {
  Rng rng(seed);
  return sample_alpha(dist, k, rng, with_replacement);
}

SelectionMask select(Strategy strategy, std::span<const std::vector<double>> pool_embedded, std::size_t k,
                     std::uint64_t seed, const SelectContext& ctx) {
  switch (strategy) {
    case Strategy::random:
      return select_random(pool_embedded.size(), k, seed);
    case Strategy::kmedoids:
      return kmedoids_select(pool_embedded, k, seed);
    case Strategy::policy: {
      if (ctx.params == nullptr || ctx.policy == nullptr) {
        throw std::invalid_argument("policy strategy needs parameters");
      }
      const auto out = policy_scores(*ctx.params, *ctx.policy, pool_embedded);
      return sample_alpha(out, k, seed, ctx.with_replacement);
    }
  }
  throw std::invalid_argument("unknown strategy");
}

}  // namespace metaal::selector
