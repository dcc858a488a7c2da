#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "metaal/nn/checkpoint.hpp"
#include "metaal/nn/grad_check.hpp"
#include "metaal/nn/graph.hpp"
#include "metaal/nn/layers.hpp"
#include "../support/oracles.hpp"

using namespace metaal;
using namespace metaal::nn;
using metaal::testing::random_tensor;

namespace {

constexpr int kSeeds = 20;
constexpr double kTol = 1e-4;

// Reduces an op's output to a scalar with fixed random weights so every
// output coordinate contributes to the checked gradient.
Var weighted_sum(Graph& g, Var out, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0xabcdefULL);
  return dot(out, g.constant(random_tensor(out.shape().size() == 1 ? out.shape() : Shape{out.size()}, rng)));
}

void check_op(const char* name, const std::function<std::vector<Tensor>(std::mt19937_64&)>& make_inputs,
              const std::function<Var(Graph&, std::span<const Var>)>& op) {
  for (int s = 0; s < kSeeds; ++s) {
    std::mt19937_64 rng(1000 + s);
    auto inputs = make_inputs(rng);
    auto report = grad_check(
        [&](Graph& g, std::span<const Var> xs) { return weighted_sum(g, op(g, xs), static_cast<std::uint64_t>(s)); },
        inputs);
    INFO(name << " seed " << s << ": " << report.summary());
    CHECK(report.passed(kTol));
  }
}

std::vector<Tensor> vecs(std::mt19937_64& rng, std::size_t count, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(random_tensor({n}, rng, lo, hi));
  return out;
}

// Values bounded away from zero so kinks (relu) are never straddled by eps.
Tensor away_from_zero(std::mt19937_64& rng, std::size_t n) {
  auto t = random_tensor({n}, rng, 0.05, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (double& v : t.values) v = sign(rng) ? v : -v;
  return t;
}

}  // namespace

TEST_CASE("tensor shapes are validated") {
  CHECK_THROWS_AS(Tensor(Shape{2, 0}), DimensionError);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  auto m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(Tensor::identity(3).values == std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});
}

TEST_CASE("param store names, flatten and restore") {
  ParamStore store;
  store.add("a", {2, 3});
  store.add("b", {3});
  CHECK_THROWS(store.add("a", {1}));
  CHECK(store.parameter_count() == 9);
  CHECK(store.names() == std::vector<std::string>{"a", "b"});
  store.init_uniform(7);

  SUBCASE("flatten then restore is bit-exact") {
    const auto flat = store.flatten();
    ParamStore other;
    other.add("a", {2, 3});
    other.add("b", {3});
    other.restore(flat);
    const auto back = other.flatten();
    REQUIRE(back.size() == flat.size());
    for (std::size_t i = 0; i < flat.size(); ++i) CHECK(std::memcmp(&back[i], &flat[i], sizeof(double)) == 0);
  }
  SUBCASE("restore rejects a wrong length") { CHECK_THROWS_AS(store.restore(std::vector<double>(4)), DimensionError); }
  SUBCASE("uniform init is bounded by 1/sqrt(fan_in) and seeded") {
    for (double v : store.at("a").values) CHECK(std::abs(v) <= 1.0 / std::sqrt(3.0));
    ParamStore again;
    again.add("a", {2, 3});
    again.add("b", {3});
    again.init_uniform(7);
    CHECK(again.flatten() == store.flatten());
  }
}

TEST_CASE("linear_forward hand cases") {
  Graph g;
  Var x = g.constant(std::vector<double>{3, 4});
  Var eye = g.constant(Tensor::identity(2));
  Var zero_b = g.constant(std::vector<double>{0, 0});
  auto y = linear_forward(x, eye, zero_b).value();
  CHECK(y[0] == 3.0);
  CHECK(y[1] == 4.0);

  Var zero_w = g.constant(Tensor(Shape{2, 2}, 0.0));
  Var ones = g.constant(std::vector<double>{1, 1});
  auto z = linear_forward(x, zero_w, ones).value();
  CHECK(z[0] == 1.0);
  CHECK(z[1] == 1.0);

  CHECK_THROWS_AS(linear_forward(g.constant(std::vector<double>{1, 2, 3}), eye, zero_b), DimensionError);
  CHECK_THROWS_AS(linear_forward(x, eye, g.constant(std::vector<double>{1, 2, 3})), DimensionError);
}

TEST_CASE("softmax values and properties") {
  Graph g;
  auto p = softmax(g.constant(std::vector<double>{1, 2, 3}), 1.0).value();
  CHECK(p[0] == doctest::Approx(0.09003057).epsilon(1e-7));
  CHECK(p[1] == doctest::Approx(0.24472847).epsilon(1e-7));
  CHECK(p[2] == doctest::Approx(0.66524096).epsilon(1e-7));

  for (double t : {0.1, 1.0, 7.0}) {
    auto u = softmax(g.constant(std::vector<double>{0, 0, 0}), t).value();
    for (double v : u) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  auto sharp = softmax(g.constant(std::vector<double>{1, 0}), 1e6).value();
  CHECK(sharp[0] == doctest::Approx(1.0));
  CHECK(sharp[1] < 1e-300);
  CHECK_THROWS(softmax(g.constant(std::vector<double>{1, 0}), 0.0));
  CHECK_THROWS(softmax(g.constant(std::vector<double>{1, 0}), -1.0));

  std::mt19937_64 rng(3);
  for (int s = 0; s < 50; ++s) {
    auto z = random_tensor({6}, rng, -50, 50);
    auto shifted = z;
    for (double& v : shifted.values) v += 123.0;
    auto a = softmax(g.constant(z), 0.7).value();
    auto b = softmax(g.constant(shifted), 0.7).value();
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i] >= 0.0);
      CHECK(std::abs(a[i] - b[i]) < 1e-12);
      total += a[i];
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("cross-entropy clamps and is inert outside the clamp") {
  Graph g;
  Var onehot = g.variable(Tensor::vector({1.0, 0.0}));
  Var ce = cross_entropy(onehot, 0);
  CHECK(ce.item() == doctest::Approx(-std::log(1.0 - 1e-12)));
  CHECK(cross_entropy(onehot, 1).item() == doctest::Approx(-std::log(1e-12)));
  Var loss = cross_entropy(onehot, 1);
  g.backward(loss);
  CHECK(g.grad(onehot)[1] == 0.0);
}

TEST_CASE("elementwise and structural ops pass gradient checks on 20 seeds") {
  check_op("add", [](auto& r) { return vecs(r, 2, 4); }, [](Graph&, auto xs) { return add(xs[0], xs[1]); });
  check_op("sub", [](auto& r) { return vecs(r, 2, 4); }, [](Graph&, auto xs) { return sub(xs[0], xs[1]); });
  check_op("mul", [](auto& r) { return vecs(r, 2, 4); }, [](Graph&, auto xs) { return mul(xs[0], xs[1]); });
  check_op("scale", [](auto& r) { return vecs(r, 1, 4); }, [](Graph&, auto xs) { return scale(xs[0], -2.5); });
  check_op("add_constant", [](auto& r) { return vecs(r, 1, 4); },
           [](Graph&, auto xs) { return add_constant(xs[0], 0.3); });
  check_op("matvec", [](auto& r) { return std::vector<Tensor>{random_tensor({3, 4}, r), random_tensor({4}, r)}; },
           [](Graph&, auto xs) { return matvec(xs[0], xs[1]); });
  check_op("linear_forward",
           [](auto& r) {
             return std::vector<Tensor>{random_tensor({4}, r), random_tensor({3, 4}, r), random_tensor({3}, r)};
           },
           [](Graph&, auto xs) { return linear_forward(xs[0], xs[1], xs[2]); });
  check_op("sigmoid", [](auto& r) { return vecs(r, 1, 5, -3, 3); }, [](Graph&, auto xs) { return sigmoid(xs[0]); });
  check_op("tanh", [](auto& r) { return vecs(r, 1, 5, -3, 3); }, [](Graph&, auto xs) { return tanh(xs[0]); });
  check_op("relu", [](auto& r) { return std::vector<Tensor>{away_from_zero(r, 6)}; },
           [](Graph&, auto xs) { return relu(xs[0]); });
  check_op("log", [](auto& r) { return vecs(r, 1, 5, 0.2, 3.0); }, [](Graph&, auto xs) { return log(xs[0]); });
  check_op("slice", [](auto& r) { return vecs(r, 1, 6); }, [](Graph&, auto xs) { return slice(xs[0], 2, 3); });
  check_op("concat", [](auto& r) { return std::vector<Tensor>{random_tensor({2}, r), random_tensor({3}, r)}; },
           [](Graph&, auto xs) { return concat(xs[0], xs[1]); });
  check_op("stack+element", [](auto& r) { return vecs(r, 1, 4); },
           [](Graph&, auto xs) {
             std::vector<Var> parts{element(xs[0], 3), element(xs[0], 1), element(xs[0], 1)};
             return stack(parts);
           });
  check_op("sum", [](auto& r) { return vecs(r, 1, 5); }, [](Graph&, auto xs) { return sum(xs[0]); });
  check_op("dot", [](auto& r) { return vecs(r, 2, 5); }, [](Graph&, auto xs) { return dot(xs[0], xs[1]); });
  for (double t : {0.3, 1.0, 4.0}) {
    check_op("softmax", [](auto& r) { return vecs(r, 1, 5, -2, 2); },
             [t](Graph&, auto xs) { return softmax(xs[0], t); });
  }
  check_op("softmax+cross_entropy", [](auto& r) { return vecs(r, 1, 4, -2, 2); },
           [](Graph&, auto xs) { return cross_entropy(softmax(xs[0], 1.5), 2); });
  check_op("cosine", [](auto& r) { return vecs(r, 2, 4); },
           [](Graph&, auto xs) { return cosine_similarity(xs[0], xs[1]); });
  check_op("euclidean", [](auto& r) { return vecs(r, 2, 4); },
           [](Graph&, auto xs) { return euclidean_similarity(xs[0], xs[1]); });
  check_op("sequential_log_prob", [](auto& r) { return vecs(r, 1, 6, -2, 2); },
           [](Graph&, auto xs) {
             const std::vector<std::size_t> draws{4, 0, 2};
             return sequential_log_prob(xs[0], draws);
           });
  check_op("sequential_log_prob with replacement", [](auto& r) { return vecs(r, 1, 5, -2, 2); },
           [](Graph&, auto xs) {
             const std::vector<std::size_t> draws{1, 1, 3};
             return sequential_log_prob(xs[0], draws, true);
           });
}

TEST_CASE("sequential_log_prob equals the product of renormalised probabilities") {
  Graph g;
  const std::vector<double> scores{0.2, -1.0, 0.7, 0.1};
  std::vector<double> p(scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp(scores[i]);
  for (double& v : p) v /= z;
  Var s = g.constant(scores);
  for (std::size_t k = 1; k <= 3; ++k) {
    for (const auto& seq : testing::ordered_draws(4, k)) {
      const double expected = std::log(testing::sequence_probability(p, seq));
      CHECK(sequential_log_prob(s, seq).item() == doctest::Approx(expected).epsilon(1e-12));
    }
  }
  CHECK_THROWS(sequential_log_prob(s, std::vector<std::size_t>{1, 1}));
  CHECK_THROWS(sequential_log_prob(s, std::vector<std::size_t>{9}));
}

TEST_CASE("cosine with a zero vector is zero with zero gradient") {
  Graph g;
  Var a = g.variable(Tensor::vector({0.0, 0.0}));
  Var b = g.variable(Tensor::vector({1.0, 2.0}));
  Var c = cosine_similarity(a, b);
  CHECK(c.item() == 0.0);
  g.backward(c);
  for (double v : g.grad(a)) CHECK(v == 0.0);
  for (double v : g.grad(b)) CHECK(v == 0.0);
}

TEST_CASE("shape mismatches raise DimensionError") {
  Graph g;
  Var a = g.constant(std::vector<double>{1, 2});
  Var b = g.constant(std::vector<double>{1, 2, 3});
  CHECK_THROWS_AS(add(a, b), DimensionError);
  CHECK_THROWS_AS(mul(a, b), DimensionError);
  CHECK_THROWS_AS(dot(a, b), DimensionError);
  CHECK_THROWS_AS(cosine_similarity(a, b), DimensionError);
  CHECK_THROWS_AS(euclidean_similarity(a, b), DimensionError);
  CHECK_THROWS_AS(slice(a, 1, 2), DimensionError);
  CHECK_THROWS_AS(g.backward(a), DimensionError);
}

TEST_CASE("LSTM cell") {
  SUBCASE("zero parameters and zero state stay at zero") {
    ParamStore store;
    LstmCellParams p{"cell", 3, 2};
    p.register_in(store);
    Graph g;
    auto cell = LstmCell::bind(g, store, p);
    auto s = lstm_cell_step(cell, g.constant(std::vector<double>{0.4, -1, 2}), g.constant(std::vector<double>(2, 0.0)),
                            g.constant(std::vector<double>(2, 0.0)));
    for (double v : s.h.value()) CHECK(v == 0.0);
    for (double v : s.c.value()) CHECK(v == 0.0);
  }

  SUBCASE("single unit matches a scalar hand computation") {
    ParamStore store;
    LstmCellParams p{"cell", 1, 1};
    p.register_in(store);
    // Gate order i, f, o, g.
    store.at("cell.w_x").values = {0.5, -0.3, 0.8, 1.2};
    store.at("cell.w_h").values = {0.1, 0.2, -0.4, 0.7};
    store.at("cell.b").values = {0.05, 0.6, -0.1, 0.0};
    const double x = 0.9, h0 = -0.2, c0 = 0.3;
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    const double i = sig(0.5 * x + 0.1 * h0 + 0.05);
    const double f = sig(-0.3 * x + 0.2 * h0 + 0.6);
    const double o = sig(0.8 * x - 0.4 * h0 - 0.1);
    const double cand = std::tanh(1.2 * x + 0.7 * h0);
    const double c = f * c0 + i * cand;
    const double h = o * std::tanh(c);

    Graph g;
    auto cell = LstmCell::bind(g, store, p);
    auto s = lstm_cell_step(cell, g.constant(std::vector<double>{x}), g.constant(std::vector<double>{h0}),
                            g.constant(std::vector<double>{c0}));
    CHECK(s.c.item() == doctest::Approx(c).epsilon(1e-14));
    CHECK(s.h.item() == doctest::Approx(h).epsilon(1e-14));
  }

  SUBCASE("BPTT over 5 steps matches finite differences") {
    for (int seed = 0; seed < kSeeds; ++seed) {
      ParamStore store;
      LstmCellParams p{"cell", 3, 4};
      p.register_in(store);
      store.init_uniform(static_cast<std::uint64_t>(seed));
      std::mt19937_64 rng(seed);
      std::vector<Tensor> inputs;
      for (int t = 0; t < 5; ++t) inputs.push_back(random_tensor({3}, rng));
      auto unroll = [&](Graph& g, std::span<const Var> xs) {
        auto cell = LstmCell::bind(g, store, p);
        LstmState s{g.constant(std::vector<double>(4, 0.0)), g.constant(std::vector<double>(4, 0.0))};
        for (const Var& x : xs) s = lstm_cell_step(cell, x, s.h, s.c);
        return add(weighted_sum(g, s.h, 11), weighted_sum(g, s.c, 12));
      };
      auto wrt_inputs = grad_check(unroll, inputs);
      INFO("inputs seed " << seed << ": " << wrt_inputs.summary());
      CHECK(wrt_inputs.passed(kTol));
      auto wrt_params = grad_check_params(store, [&](Graph& g, ParamStore&) {
        std::vector<Var> xs;
        for (const auto& t : inputs) xs.push_back(g.constant(t));
        return unroll(g, xs);
      });
      INFO("params seed " << seed << ": " << wrt_params.summary());
      CHECK(wrt_params.passed(kTol));
    }
  }
}

TEST_CASE("bidirectional scan") {
  ParamStore store;
  LstmCellParams fp{"fwd", 2, 3}, bp{"bwd", 2, 3};
  fp.register_in(store);
  bp.register_in(store);
  store.init_uniform(5);
  std::mt19937_64 rng(9);
  std::vector<Tensor> seq;
  for (int t = 0; t < 4; ++t) seq.push_back(random_tensor({2}, rng));

  SUBCASE("length-1 sequence is one step in each direction") {
    Graph g;
    auto f = LstmCell::bind(g, store, fp);
    auto b = LstmCell::bind(g, store, bp);
    std::vector<Var> one{g.constant(seq[0])};
    auto out = bidirectional_scan(one, f, b);
    REQUIRE(out.size() == 1);
    auto zero = g.constant(std::vector<double>(3, 0.0));
    auto hf = lstm_cell_step(f, one[0], zero, zero).h.value();
    auto hb = lstm_cell_step(b, one[0], zero, zero).h.value();
    auto v = out[0].value();
    REQUIRE(v.size() == 6);
    for (int i = 0; i < 3; ++i) {
      CHECK(v[i] == hf[i]);
      CHECK(v[3 + i] == hb[i]);
    }
  }

  SUBCASE("reversing input and swapping directions reverses output with halves swapped") {
    Graph g;
    auto f = LstmCell::bind(g, store, fp);
    auto b = LstmCell::bind(g, store, bp);
    std::vector<Var> xs, rev;
    for (const auto& t : seq) xs.push_back(g.constant(t));
    rev.assign(xs.rbegin(), xs.rend());
    auto out = bidirectional_scan(xs, f, b);
    auto out_rev = bidirectional_scan(rev, b, f);
    const std::size_t n = xs.size();
    for (std::size_t i = 0; i < n; ++i) {
      auto a = out[i].value();
      auto r = out_rev[n - 1 - i].value();
      for (int j = 0; j < 3; ++j) {
        CHECK(a[j] == doctest::Approx(r[3 + j]).epsilon(1e-15));
        CHECK(a[3 + j] == doctest::Approx(r[j]).epsilon(1e-15));
      }
    }
  }

  SUBCASE("empty sequence is rejected") {
    Graph g;
    auto f = LstmCell::bind(g, store, fp);
    auto b = LstmCell::bind(g, store, bp);
    CHECK_THROWS(bidirectional_scan(std::vector<Var>{}, f, b));
  }

  SUBCASE("gradients match finite differences on 20 seeds") {
    for (int seed = 0; seed < kSeeds; ++seed) {
      store.init_uniform(static_cast<std::uint64_t>(100 + seed));
      std::mt19937_64 r(seed);
      std::vector<Tensor> s4;
      for (int t = 0; t < 4; ++t) s4.push_back(random_tensor({2}, r));
      auto fn = [&](Graph& g, std::span<const Var> xs) {
        auto f = LstmCell::bind(g, store, fp);
        auto b = LstmCell::bind(g, store, bp);
        auto out = bidirectional_scan(xs, f, b);
        Var total = weighted_sum(g, out[0], 1);
        for (std::size_t i = 1; i < out.size(); ++i) total = add(total, weighted_sum(g, out[i], 1 + i));
        return total;
      };
      auto rep = grad_check(fn, s4);
      INFO("seed " << seed << ": " << rep.summary());
      CHECK(rep.passed(kTol));
      auto rep_p = grad_check_params(store, [&](Graph& g, ParamStore&) {
        std::vector<Var> xs;
        for (const auto& t : s4) xs.push_back(g.constant(t));
        return fn(g, xs);
      });
      INFO("params seed " << seed << ": " << rep_p.summary());
      CHECK(rep_p.passed(kTol));
    }
  }

  SUBCASE("every output position depends on every input position") {
    Graph g;
    auto f = LstmCell::bind(g, store, fp);
    auto b = LstmCell::bind(g, store, bp);
    std::vector<Var> xs;
    for (const auto& t : seq) xs.push_back(g.variable(t));
    auto out = bidirectional_scan(xs, f, b);
    for (std::size_t i = 0; i < out.size(); ++i) {
      Graph g2;
      auto f2 = LstmCell::bind(g2, store, fp);
      auto b2 = LstmCell::bind(g2, store, bp);
      std::vector<Var> ys;
      for (const auto& t : seq) ys.push_back(g2.variable(t));
      auto o = bidirectional_scan(ys, f2, b2);
      g2.backward(sum(o[i]));
      for (std::size_t j = 0; j < ys.size(); ++j) {
        double norm = 0.0;
        for (double v : g2.grad(ys[j])) norm += std::abs(v);
        INFO("output " << i << " input " << j);
        CHECK(norm > 0.0);
      }
    }
  }
}

TEST_CASE("MLP embedder") {
  SUBCASE("identity single layer returns its input") {
    EmbedderSpec spec{3, {3}, Activation::tanh, Activation::linear};
    ParamStore store;
    spec.register_in(store);
    store.at("embed.0.weight").values = Tensor::identity(3).values;
    Graph g;
    auto y = mlp_embed(g, store, spec, g.constant(std::vector<double>{1.5, -2, 0.25})).value();
    CHECK(y[0] == 1.5);
    CHECK(y[1] == -2.0);
    CHECK(y[2] == 0.25);
    CHECK_THROWS_AS(mlp_embed(g, store, spec, g.constant(std::vector<double>{1, 2})), DimensionError);
  }

  SUBCASE("pure and differentiable") {
    EmbedderSpec spec{4, {5, 3}, Activation::tanh, Activation::linear};
    for (int seed = 0; seed < kSeeds; ++seed) {
      ParamStore store;
      spec.register_in(store);
      store.init_uniform(static_cast<std::uint64_t>(seed));
      std::mt19937_64 rng(seed);
      std::vector<Tensor> x{random_tensor({4}, rng)};
      Graph g1, g2;
      auto a = mlp_embed(g1, store, spec, g1.constant(x[0])).value();
      auto b = mlp_embed(g2, store, spec, g2.constant(x[0])).value();
      CHECK(std::vector<double>(a.begin(), a.end()) == std::vector<double>(b.begin(), b.end()));

      auto fn = [&](Graph& g, std::span<const Var> xs) { return weighted_sum(g, mlp_embed(g, store, spec, xs[0]), 3); };
      auto rep = grad_check(fn, x);
      INFO(rep.summary());
      CHECK(rep.passed(kTol));
      auto rep_p = grad_check_params(store, [&](Graph& g, ParamStore&) {
        std::vector<Var> xs{g.constant(x[0])};
        return fn(g, xs);
      });
      INFO(rep_p.summary());
      CHECK(rep_p.passed(kTol));
    }
  }
}

TEST_CASE("parameter gradients accumulate into the store") {
  ParamStore store;
  store.add("w", {2});
  store.at("w").values = {1.0, 2.0};
  for (int round = 1; round <= 2; ++round) {
    Graph g;
    Var w = g.parameter(store, "w");
    CHECK(g.parameter(store, "w").id == w.id);
    g.backward(sum(w));
    CHECK(store.flatten_grads() == std::vector<double>{1.0 * round, 1.0 * round});
  }
  store.zero_grad();
  CHECK(store.flatten_grads() == std::vector<double>{0.0, 0.0});
}

TEST_CASE("checkpoint round trip and corruption") {
  ParamStore store;
  store.add("embed.0.weight", {2, 3});
  store.add("embed.0.bias", {2}, 3);
  store.init_uniform(42);
  Checkpoint ckpt{store, {{"lr", 0.01}, {"name", "x"}}, 99};
  const auto dir = testing::temp_dir("ckpt");
  save_checkpoint(dir / "a.mpck", ckpt);
  auto back = load_checkpoint(dir / "a.mpck");
  CHECK(back.seed == 99);
  CHECK(back.hyperparameters == ckpt.hyperparameters);
  CHECK(back.params.names() == store.names());
  CHECK(back.params.flatten() == store.flatten());
  CHECK(back.params.at("embed.0.weight").shape == Shape{2, 3});

  const auto bytes = encode_checkpoint(ckpt);
  CHECK(bytes.substr(0, 4) == "MPCK");
  CHECK_THROWS_AS(decode_checkpoint("XXXX" + bytes.substr(4)), CheckpointError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.mpck"), CheckpointError);
}
