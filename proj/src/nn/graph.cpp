#include "metaal/nn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace metaal::nn {

namespace {

constexpr double kProbClamp = 1e-12;

Graph& graph_of(Var a) {
  if (a.graph == nullptr) throw std::invalid_argument("Var is not attached to a graph");
  return *a.graph;
}

Graph& graph_of(Var a, Var b) {
  if (a.graph != b.graph) throw std::invalid_argument("Vars belong to different graphs");
  return graph_of(a);
}

void require_same_size(Var a, Var b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_vector(Var a, const char* op) {
  if (a.shape().size() != 1) {
    throw DimensionError(std::string(op) + ": expected a vector, got " + shape_string(a.shape()));
  }
}

// Applies an elementwise map whose derivative is expressed through the output.
template <typename F, typename DF>
Var unary_map(Var a, F f, DF df_from_output) {
  Graph& g = graph_of(a);
  auto in = a.value();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  const std::size_t ia = a.id;
  return g.record(a.shape(), std::move(out), g.requires_grad(ia), [ia, df_from_output](Graph& g, std::size_t self) {
    auto go = g.grad(self);
    auto y = g.value(self);
    auto ga = g.grad(ia);
    auto x = g.value(ia);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * df_from_output(x[i], y[i]);
  });
}

}  // namespace

const Shape& Var::shape() const { return graph->shape(id); }
std::size_t Var::size() const { return graph->value(id).size(); }
std::span<const double> Var::value() const { return graph->value(id); }
double Var::item() const {
  auto v = value();
  if (v.size() != 1) throw DimensionError("item() on node of shape " + shape_string(shape()));
  return v[0];
}

Var Graph::constant(Tensor t) { return record(std::move(t.shape), std::move(t.values), false, nullptr); }

Var Graph::constant(std::vector<double> v) {
  Shape s{v.size()};
  return record(std::move(s), std::move(v), false, nullptr);
}

Var Graph::variable(Tensor t) { return record(std::move(t.shape), std::move(t.values), true, nullptr); }

Var Graph::parameter(ParamStore& store, const std::string& name) {
  auto& by_name = bound_[&store];
  if (auto it = by_name.find(name); it != by_name.end()) return Var{this, it->second};
  const Tensor& t = store.at(name);
  Var v = record(t.shape, t.values, true, nullptr);
  by_name.emplace(name, v.id);
  bindings_.push_back({&store, name, v.id});
  return v;
}

Var Graph::record(Shape shape, std::vector<double> value, bool requires_grad, BackwardFn backward) {
  Node n;
  n.shape = std::move(shape);
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

void Graph::backward(Var root) {
  if (root.graph != this) throw std::invalid_argument("backward: root belongs to another graph");
  if (nodes_[root.id].value.size() != 1) {
    throw DimensionError("backward: root must be a single element, got " + shape_string(nodes_[root.id].shape));
  }
  for (std::size_t i = 0; i <= root.id; ++i) {
    auto& n = nodes_[i];
    if (n.requires_grad) n.grad.assign(n.value.size(), 0.0);
  }
  if (!nodes_[root.id].requires_grad) return;
  nodes_[root.id].grad[0] = 1.0;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (n.requires_grad && n.backward) n.backward(*this, i);
  }
  for (const auto& b : bindings_) {
    if (b.node > root.id) continue;
    Tensor& t = b.store->at(b.name);
    if (!t.grad) t.zero_grad();
    const auto& g = nodes_[b.node].grad;
    for (std::size_t i = 0; i < g.size(); ++i) (*t.grad)[i] += g[i];
  }
}

Var add(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_size(a, b, "add");
  auto va = a.value();
  auto vb = b.value();
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + vb[i];
  const std::size_t ia = a.id, ib = b.id;
  return g.record(a.shape(), std::move(out), g.requires_grad(ia) || g.requires_grad(ib),
                  [ia, ib](Graph& g, std::size_t self) {
                    auto go = g.grad(self);
                    if (g.requires_grad(ia)) {
                      auto ga = g.grad(ia);
                      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
                    }
                    if (g.requires_grad(ib)) {
                      auto gb = g.grad(ib);
                      for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
                    }
                  });
}

Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var mul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_size(a, b, "mul");
  auto va = a.value();
  auto vb = b.value();
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
  const std::size_t ia = a.id, ib = b.id;
  return g.record(a.shape(), std::move(out), g.requires_grad(ia) || g.requires_grad(ib),
                  [ia, ib](Graph& g, std::size_t self) {
                    auto go = g.grad(self);
                    auto va = g.value(ia);
                    auto vb = g.value(ib);
                    if (g.requires_grad(ia)) {
                      auto ga = g.grad(ia);
                      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * vb[i];
                    }
                    if (g.requires_grad(ib)) {
                      auto gb = g.grad(ib);
                      for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * va[i];
                    }
                  });
}

Var scale(Var a, double c) {
  return unary_map(
      a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var add_constant(Var a, double c) {
  return unary_map(
      a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var matvec(Var w, Var x) {
  Graph& g = graph_of(w, x);
  const auto& ws = w.shape();
  require_vector(x, "matvec");
  if (ws.size() != 2 || ws[1] != x.size()) {
    throw DimensionError("matvec: weight " + shape_string(ws) + " incompatible with input " + shape_string(x.shape()));
  }
  const std::size_t rows = ws[0], cols = ws[1];
  auto vw = w.value();
  auto vx = x.value();
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = vw.data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * vx[c];
    out[r] = acc;
  }
  const std::size_t iw = w.id, ix = x.id;
  return g.record(Shape{rows}, std::move(out), g.requires_grad(iw) || g.requires_grad(ix),
                  [iw, ix, rows, cols](Graph& g, std::size_t self) {
                    auto go = g.grad(self);
                    if (g.requires_grad(iw)) {
                      auto gw = g.grad(iw);
                      auto vx = g.value(ix);
                      for (std::size_t r = 0; r < rows; ++r) {
                        const double gr = go[r];
                        if (gr == 0.0) continue;
                        double* row = gw.data() + r * cols;
                        for (std::size_t c = 0; c < cols; ++c) row[c] += gr * vx[c];
                      }
                    }
                    if (g.requires_grad(ix)) {
                      auto gx = g.grad(ix);
                      auto vw = g.value(iw);
                      for (std::size_t r = 0; r < rows; ++r) {
                        const double gr = go[r];
                        if (gr == 0.0) continue;
                        const double* row = vw.data() + r * cols;
                        for (std::size_t c = 0; c < cols; ++c) gx[c] += gr * row[c];
                      }
                    }
                  });
}

Var linear_forward(Var x, Var weight, Var bias) {
  const auto& ws = weight.shape();
  if (ws.size() != 2 || bias.shape() != Shape{ws[0]}) {
    throw DimensionError("linear: bias " + shape_string(bias.shape()) + " incompatible with weight " +
                         shape_string(ws));
  }
  return add(matvec(weight, x), bias);
}

Var sigmoid(Var a) {
  return unary_map(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary_map(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary_map(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var activate(Var a, Activation act) {
  switch (act) {
    case Activation::linear:
      return a;
    case Activation::tanh:
      return tanh(a);
    case Activation::sigmoid:
      return sigmoid(a);
    case Activation::relu:
      return relu(a);
  }
  return a;
}

Var log(Var a) {
  return unary_map(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var slice(Var a, std::size_t begin, std::size_t length) {
  Graph& g = graph_of(a);
  require_vector(a, "slice");
  if (length == 0 || begin + length > a.size()) {
    throw DimensionError("slice [" + std::to_string(begin) + ", +" + std::to_string(length) + ") out of range for " +
                         shape_string(a.shape()));
  }
  auto v = a.value();
  std::vector<double> out(v.begin() + begin, v.begin() + begin + length);
  const std::size_t ia = a.id;
  return g.record(Shape{length}, std::move(out), g.requires_grad(ia), [ia, begin](Graph& g, std::size_t self) {
    auto go = g.grad(self);
    auto ga = g.grad(ia);
    for (std::size_t i = 0; i < go.size(); ++i) ga[begin + i] += go[i];
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat of zero parts");
  Graph& g = graph_of(parts[0]);
  std::vector<double> out;
  std::vector<std::size_t> ids;
  bool rg = false;
  for (const Var& p : parts) {
    graph_of(parts[0], p);
    require_vector(p, "concat");
    auto v = p.value();
    out.insert(out.end(), v.begin(), v.end());
    ids.push_back(p.id);
    rg = rg || g.requires_grad(p.id);
  }
  const std::size_t n = out.size();
  return g.record(Shape{n}, std::move(out), rg, [ids = std::move(ids)](Graph& g, std::size_t self) {
    auto go = g.grad(self);
    std::size_t off = 0;
    for (std::size_t id : ids) {
      const std::size_t len = g.value(id).size();
      if (g.requires_grad(id)) {
        auto gp = g.grad(id);
        for (std::size_t i = 0; i < len; ++i) gp[i] += go[off + i];
      }
      off += len;
    }
  });
}

Var concat(Var a, Var b) {
  const Var parts[] = {a, b};
  return concat(std::span<const Var>(parts));
}

Var stack(std::span<const Var> scalars) {
  if (scalars.empty()) throw DimensionError("stack of zero scalars");
  for (const Var& s : scalars) {
    if (s.shape() != Shape{1}) throw DimensionError("stack: element of shape " + shape_string(s.shape()) + " is not scalar");
  }
  return concat(scalars);
}

Var element(Var a, std::size_t index) { return slice(a, index, 1); }

Var sum(Var a) {
  Graph& g = graph_of(a);
  double acc = 0.0;
  for (double v : a.value()) acc += v;
  const std::size_t ia = a.id;
  return g.record(Shape{1}, {acc}, g.requires_grad(ia), [ia](Graph& g, std::size_t self) {
    const double go = g.grad(self)[0];
    for (double& x : g.grad(ia)) x += go;
  });
}

Var dot(Var a, Var b) {
  require_same_size(a, b, "dot");
  return sum(mul(a, b));
}

Var softmax(Var z, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("softmax: temperature must be positive");
  Graph& g = graph_of(z);
  require_vector(z, "softmax");
  auto v = z.value();
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, temperature * x);
  std::vector<double> out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(temperature * v[i] - m);
    total += out[i];
  }
  for (double& y : out) y /= total;
  const std::size_t iz = z.id;
  return g.record(z.shape(), std::move(out), g.requires_grad(iz), [iz, temperature](Graph& g, std::size_t self) {
    auto go = g.grad(self);
    auto y = g.value(self);
    double inner = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) inner += go[i] * y[i];
    auto gz = g.grad(iz);
    for (std::size_t i = 0; i < y.size(); ++i) gz[i] += temperature * y[i] * (go[i] - inner);
  });
}

Var cross_entropy(Var probs, std::size_t target) {
  Graph& g = graph_of(probs);
  require_vector(probs, "cross_entropy");
  if (target >= probs.size()) throw DimensionError("cross_entropy: target out of range");
  const double p = probs.value()[target];
  const bool clamped = !(p > kProbClamp && p < 1.0 - kProbClamp);
  const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  const std::size_t ip = probs.id;
  return g.record(Shape{1}, {-std::log(pc)}, g.requires_grad(ip) && !clamped,
                  [ip, target, pc](Graph& g, std::size_t self) { g.grad(ip)[target] -= g.grad(self)[0] / pc; });
}

Var cosine_similarity(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_vector(a, "cosine_similarity");
  require_same_size(a, b, "cosine_similarity");
  auto va = a.value();
  auto vb = b.value();
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    ab += va[i] * vb[i];
    aa += va[i] * va[i];
    bb += vb[i] * vb[i];
  }
  const double na = std::sqrt(aa), nb = std::sqrt(bb);
  const bool degenerate = na == 0.0 || nb == 0.0;
  const double c = degenerate ? 0.0 : ab / (na * nb);
  const std::size_t ia = a.id, ib = b.id;
  const bool rg = !degenerate && (g.requires_grad(ia) || g.requires_grad(ib));
  return g.record(Shape{1}, {c}, rg, [ia, ib, na, nb, c](Graph& g, std::size_t self) {
    const double go = g.grad(self)[0];
    auto va = g.value(ia);
    auto vb = g.value(ib);
    if (g.requires_grad(ia)) {
      auto ga = g.grad(ia);
      for (std::size_t i = 0; i < va.size(); ++i) ga[i] += go * (vb[i] / (na * nb) - c * va[i] / (na * na));
    }
    if (g.requires_grad(ib)) {
      auto gb = g.grad(ib);
      for (std::size_t i = 0; i < vb.size(); ++i) gb[i] += go * (va[i] / (na * nb) - c * vb[i] / (nb * nb));
    }
  });
}

Var euclidean_similarity(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_vector(a, "euclidean_similarity");
  require_same_size(a, b, "euclidean_similarity");
  auto va = a.value();
  auto vb = b.value();
  double d2 = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) d2 += (va[i] - vb[i]) * (va[i] - vb[i]);
  const double d = std::sqrt(d2);
  const std::size_t ia = a.id, ib = b.id;
  const bool rg = d > 0.0 && (g.requires_grad(ia) || g.requires_grad(ib));
  return g.record(Shape{1}, {-d}, rg, [ia, ib, d](Graph& g, std::size_t self) {
    const double go = g.grad(self)[0];
    auto va = g.value(ia);
    auto vb = g.value(ib);
    const bool ra = g.requires_grad(ia), rb = g.requires_grad(ib);
    for (std::size_t i = 0; i < va.size(); ++i) {
      const double t = -go * (va[i] - vb[i]) / d;
      if (ra) g.grad(ia)[i] += t;
      if (rb) g.grad(ib)[i] -= t;
    }
  });
}

Var sequential_log_prob(Var scores, std::span<const std::size_t> draws, bool with_replacement) {
  Graph& g = graph_of(scores);
  require_vector(scores, "sequential_log_prob");
  auto s = scores.value();
  const std::size_t n = s.size();
  if (draws.empty()) throw std::invalid_argument("sequential_log_prob: no draws");
  if (!with_replacement && draws.size() > n) throw std::invalid_argument("sequential_log_prob: more draws than items");

  // Per draw, the softmax over the indices still available; kept for backward.
  std::vector<std::vector<double>> probs;
  std::vector<char> taken(n, 0);
  double total = 0.0;
  for (std::size_t d : draws) {
    if (d >= n) throw DimensionError("sequential_log_prob: draw index out of range");
    if (taken[d]) throw std::invalid_argument("sequential_log_prob: index drawn twice without replacement");
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (!taken[j]) m = std::max(m, s[j]);
    }
    std::vector<double> p(n, 0.0);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!taken[j]) {
        p[j] = std::exp(s[j] - m);
        z += p[j];
      }
    }
    for (double& x : p) x /= z;
    total += s[d] - m - std::log(z);
    probs.push_back(std::move(p));
    if (!with_replacement) taken[d] = 1;
  }
  const std::size_t is = scores.id;
  std::vector<std::size_t> order(draws.begin(), draws.end());
  return g.record(Shape{1}, {total}, g.requires_grad(is),
                  [is, probs = std::move(probs), order = std::move(order)](Graph& g, std::size_t self) {
                    const double go = g.grad(self)[0];
                    auto gs = g.grad(is);
                    for (std::size_t t = 0; t < order.size(); ++t) {
                      gs[order[t]] += go;
                      const auto& p = probs[t];
                      for (std::size_t j = 0; j < p.size(); ++j) gs[j] -= go * p[j];
                    }
                  });
}

}  // namespace metaal::nn
